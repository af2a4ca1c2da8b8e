"""Builtin benchmark systems, problem builders, the classic-method
stationarity check, and model-bundle serialization."""

import json

import numpy as np

from . import linalg
from .autodiff import ParamVector, grad, hessian
from .autodiff import functions as fn
from .casimir import CasimirParameterization, GridCasimir, build_parameterization
from .config import InlineSystem
from .errors import ConfigError, StructuralError
from .neural import Mlp
from .phs import PortHamiltonianSystem, interconnect
from .train import XI_SEGMENT, AdamSettings, LyapunovComposition, RoaSettings, TrainProblem
from .prng import Xoshiro256StarStar

BUNDLE_SCHEMA_VERSION = 1


def _pendulum_hamiltonian(xs, p=None):
    q, mom = xs
    return 0.5 * mom * mom + (1.0 - fn.cos(q))


def pendulum_system():
    """Pendulum plant: H = p^2/2 + (1 - cos q), torque input on momentum."""
    return PortHamiltonianSystem(
        state_dim=2,
        input_dim=1,
        J=np.array([[0.0, 1.0], [-1.0, 0.0]]),
        R=np.zeros((2, 2)),
        G=np.array([[0.0], [1.0]]),
        hamiltonian=_pendulum_hamiltonian,
        region=[[-2.0, 2.0], [-2.0, 2.0]],
    )


def _msd_hamiltonian(xs, p=None):
    q, mom = xs
    return 0.5 * mom * mom + 0.5 * q * q


def msd_system(damping=0.2):
    """Linear mass-spring-damper; analytic smoke-test system."""
    return PortHamiltonianSystem(
        state_dim=2,
        input_dim=1,
        J=np.array([[0.0, 1.0], [-1.0, 0.0]]),
        R=np.array([[0.0, 0.0], [0.0, float(damping)]]),
        G=np.array([[0.0], [1.0]]),
        hamiltonian=_msd_hamiltonian,
        region=[[-2.0, 2.0], [-2.0, 2.0]],
    )


def _quadratic_hamiltonian(Q):
    Q = np.asarray(Q, dtype=float)

    def H(xs, p=None):
        out = None
        n = Q.shape[0]
        for i in range(n):
            for j in range(n):
                if Q[i, j] == 0.0:
                    continue
                term = xs[i] * xs[j] * (0.5 * Q[i, j])
                out = term if out is None else out + term
        return 0.0 if out is None else out

    return H


def build_system(spec):
    """Resolve a config system entry (builtin name or inline description)."""
    if isinstance(spec, str):
        if spec == "pendulum":
            return pendulum_system()
        if spec == "msd":
            return msd_system()
        raise ConfigError(f"unknown builtin system '{spec}'")
    if isinstance(spec, dict):
        spec = InlineSystem.model_validate(spec)
    ham = spec.hamiltonian
    kind = ham.get("kind")
    if kind == "quadratic":
        H = _quadratic_hamiltonian(ham["Q"])
    elif kind == "pendulum":
        H = _pendulum_hamiltonian
    elif kind == "msd":
        H = _msd_hamiltonian
    else:
        raise ConfigError(f"unknown hamiltonian kind '{kind}'")
    return PortHamiltonianSystem(
        state_dim=spec.state_dim,
        input_dim=spec.input_dim,
        J=np.asarray(spec.J, dtype=float),
        R=np.asarray(spec.R, dtype=float),
        G=np.asarray(spec.G, dtype=float),
        hamiltonian=H,
        region=spec.region,
    )


def integrator_controller(hc_net):
    """Single-integrator PHS controller: J_c = 0, R_c = 0, G_c = 1."""

    def H_c(xs, p=None):
        return hc_net.forward(list(xs), p)

    return PortHamiltonianSystem(
        state_dim=1,
        input_dim=1,
        J=np.zeros((1, 1)),
        R=np.zeros((1, 1)),
        G=np.ones((1, 1)),
        hamiltonian=H_c,
    )


def sample_box(box, n, seed):
    """n seeded uniform samples from an axis-aligned box (rows are [lo, hi])."""
    box = np.asarray(box, dtype=float)
    rng = Xoshiro256StarStar(seed)
    out = np.empty((n, box.shape[0]))
    for i in range(n):
        for j in range(box.shape[0]):
            out[i, j] = rng.uniform_in(box[j, 0], box[j, 1])
    return out


def make_grid(box, points_per_axis):
    """Regular grid over a box, flattened to (N, n)."""
    box = np.asarray(box, dtype=float)
    axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def build_problem(cfg, margin_a=None, seed=None):
    """Assemble plant, controller, Casimir, Lyapunov composition, and the
    training problem from an ExperimentConfig.  Returns (problem, parts)."""
    seed = cfg.seed if seed is None else int(seed)
    margin = cfg.loss.margin_a if margin_a is None else float(margin_a)
    plant = build_system(cfg.system)
    params = ParamVector()
    hc_net = Mlp(cfg.networks.H_c, seed=seed + 7, params=params, name="H_c")
    controller = integrator_controller(hc_net)
    cl = interconnect(plant, controller)

    nets = {"H_c": hc_net}
    if cfg.loss.kind == "parameterized":
        cas = build_parameterization(
            cl,
            widths_K=cfg.networks.K,
            widths_beta=cfg.networks.beta,
            seed=seed,
            params=params,
        )
        nets["K"] = cas.K
        for i, b in enumerate(cas.betas):
            nets[f"beta_{i}"] = b
        grid = None
    else:
        c_widths = list(cfg.networks.C_grid)
        c_widths[0] = cl.state_dim
        c_net = Mlp(c_widths, seed=seed, params=params, name="C_grid")
        cas = GridCasimir(c_net)
        nets["C_grid"] = c_net
        box = cfg.loss.grid_box
        if box is None:
            box = [[-2.0, 2.0]] * cl.state_dim
        grid = make_grid(box, cfg.loss.grid_points_per_axis)

    phi = None
    if cfg.networks.phi is not None:
        phi = Mlp(cfg.networks.phi, seed=seed + 23, params=params, name="phi")
        nets["phi"] = phi

    lyap = LyapunovComposition(cl, casimir=cas, phi=phi)

    if len(cfg.xi_star_init) != controller.state_dim:
        raise ConfigError(
            f"xi_star_init has length {len(cfg.xi_star_init)}, "
            f"controller state dimension is {controller.state_dim}"
        )
    params.allocate(XI_SEGMENT, (controller.state_dim,), init=cfg.xi_star_init)

    roa = None
    if cfg.roa is not None:
        box = cfg.roa.box
        if box is None:
            box = [[-2.0, 2.0]] * cl.state_dim
        roa = RoaSettings(
            gamma=cfg.roa.gamma,
            samples=sample_box(box, cfg.roa.n_samples, seed + 3001),
        )

    problem = TrainProblem(
        closed_loop=cl,
        lyapunov=lyap,
        params=params,
        x_star=np.asarray(cfg.target, dtype=float),
        margin_a=margin,
        loss_kind=cfg.loss.kind,
        grid=grid,
        grid_reduction=cfg.loss.grid_reduction,
        grid_margin_override=cfg.loss.grid_use_margin,
        roa=roa,
        optimizer=AdamSettings(
            step_size=cfg.optimizer.step_size,
            beta1=cfg.optimizer.beta1,
            beta2=cfg.optimizer.beta2,
            epsilon_hat=cfg.optimizer.epsilon_hat,
            epochs=cfg.optimizer.epochs,
            early_stop_loss=cfg.optimizer.early_stop_loss,
        ),
    )
    parts = {
        "plant": plant,
        "controller": controller,
        "closed_loop": cl,
        "casimir": cas,
        "lyapunov": lyap,
        "networks": nets,
        "params": params,
        "seed": seed,
    }
    return problem, parts


def effective_K(cas, p=None):
    """Scalar program s -> C evaluated with the unnormalized argument q - xi.

    The stored parameterization takes z . v with v orthonormal; for a rank-1
    kernel with v = c * [1, 0, ..., -1] this rescales the input by c."""
    if not isinstance(cas, CasimirParameterization) or cas.r != 1:
        raise StructuralError("effective_K requires a rank-1 kernel parameterization")
    c = float(cas.basis[0, 0])

    def K_eff(s):
        inner = cas.betas[0].forward([s * c], p)
        return cas.K.forward([inner], p)

    return K_eff


def stationarity_residual(K_fn, Hc_fn, xi_star, q_star):
    """Classic energy-shaping conditions for the pendulum loop.

    K_fn and Hc_fn are scalar programs of one autodiff scalar, written in the
    unnormalized Casimir argument q - xi.  Returns (r1, r2, min_eig_M)."""
    xi_star = float(np.atleast_1d(xi_star)[0])
    q_star = float(q_star)
    s = q_star - xi_star
    Kp = float(grad(lambda xs: K_fn(xs[0]), [s])[0])
    Kpp = float(hessian(lambda xs: K_fn(xs[0]), [s])[0, 0])
    Hcp = float(grad(lambda xs: Hc_fn(xs[0]), [xi_star])[0])
    Hcpp = float(hessian(lambda xs: Hc_fn(xs[0]), [xi_star])[0, 0])
    r1 = np.sin(q_star) + Kp
    r2 = -Kp + Hcp
    M = np.array(
        [
            [np.cos(q_star) + Kpp, 0.0, -Kpp],
            [0.0, 1.0, 0.0],
            [-Kpp, 0.0, Kpp + Hcpp],
        ]
    )
    min_eig = float(linalg.symmetric_eig(M).eigenvalues[0])
    return r1, r2, min_eig


# -- model bundle ---------------------------------------------------------


def bundle_dict(cfg, parts, report):
    nets = {name: net.to_dict() for name, net in parts["networks"].items()}
    cas = parts["casimir"]
    basis = (
        cas.basis.tolist() if isinstance(cas, CasimirParameterization) else None
    )
    system = cfg.system if isinstance(cfg.system, str) else cfg.system.model_dump()
    return {
        "schema_version": BUNDLE_SCHEMA_VERSION,
        "kind": "casimir-controller",
        "system": system,
        "loss_kind": cfg.loss.kind,
        "margin_a": report.margin_a,
        "epsilon": report.epsilon,
        "x_star": list(map(float, cfg.target)),
        "xi_star": [repr(float(v)) for v in report.xi_star],
        "basis": basis,
        "networks": nets,
        "networks_phi": "phi" in parts["networks"],
    }


def save_bundle(path, cfg, parts, report):
    with open(path, "w") as f:
        json.dump(bundle_dict(cfg, parts, report), f, indent=2, sort_keys=True)


def load_bundle(path_or_dict):
    """Rebuild closed loop, Casimir, Lyapunov composition, and parameters."""
    if isinstance(path_or_dict, dict):
        data = path_or_dict
    else:
        with open(path_or_dict) as f:
            data = json.load(f)
    if data.get("schema_version") != BUNDLE_SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported bundle schema_version {data.get('schema_version')}"
        )
    plant = build_system(data["system"])
    params = ParamVector()
    nets = {}
    hc_net = Mlp.from_dict(data["networks"]["H_c"], params=params, name="H_c")
    nets["H_c"] = hc_net
    controller = integrator_controller(hc_net)
    cl = interconnect(plant, controller)
    if data["loss_kind"] == "parameterized":
        basis = np.asarray(data["basis"], dtype=float)
        betas = []
        i = 0
        while f"beta_{i}" in data["networks"]:
            betas.append(
                Mlp.from_dict(data["networks"][f"beta_{i}"], params=params, name=f"beta_{i}")
            )
            i += 1
        K = Mlp.from_dict(data["networks"]["K"], params=params, name="K")
        cas = CasimirParameterization(basis, betas, K)
        for j, b in enumerate(betas):
            nets[f"beta_{j}"] = b
        nets["K"] = K
    else:
        c_net = Mlp.from_dict(data["networks"]["C_grid"], params=params, name="C_grid")
        cas = GridCasimir(c_net)
        nets["C_grid"] = c_net
    phi = None
    if data.get("networks_phi"):
        phi = Mlp.from_dict(data["networks"]["phi"], params=params, name="phi")
        nets["phi"] = phi
    xi = [float(v) for v in data["xi_star"]]
    params.allocate(XI_SEGMENT, (controller.state_dim,), init=xi)
    lyap = LyapunovComposition(cl, casimir=cas, phi=phi)
    return {
        "plant": plant,
        "controller": controller,
        "closed_loop": cl,
        "casimir": cas,
        "lyapunov": lyap,
        "networks": nets,
        "params": params,
        "x_star": np.asarray(data["x_star"], dtype=float),
        "xi_star": np.asarray(xi, dtype=float),
        "margin_a": float(data["margin_a"]),
        "epsilon": float(data["epsilon"]),
        "loss_kind": data["loss_kind"],
    }
