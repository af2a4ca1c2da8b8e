"""Lyapunov composition, training losses, the Adam loop with a trainable
controller equilibrium, and the equilibrium-assignment error bound."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .autodiff import BoundParams, grad, hessian, param_grad
from .autodiff import functions as fn
from .autodiff.forward import Jet2, pair_index
from .casimir import grad_batch
from .errors import (
    BoundUndefinedError,
    MinimumEscapedError,
    NumericDomainError,
    StructuralError,
    TrainingDivergedError,
)

XI_SEGMENT = "xi_star"


class LyapunovComposition:
    """V = H + H_c + C (fixed sum) or V = Phi(H + H_c, C) with a 2-input net."""

    def __init__(self, closed_loop, casimir=None, phi=None):
        self.closed_loop = closed_loop
        self.casimir = casimir
        self.phi = phi  # None -> fixed sum mode

    @property
    def mode(self):
        return "fixed_sum" if self.phi is None else "neural_phi"

    def value(self, zs, p=None):
        energy = self.closed_loop.hamiltonian_total(zs, p)
        c = 0.0 if self.casimir is None else self.casimir.value(zs, p)
        if self.phi is None:
            return energy + c
        return self.phi.forward([energy, c], p)

    def grad(self, z, p=None):
        return grad(lambda zs: self.value(zs, p), np.asarray(z, dtype=float))

    def hessian(self, z, p=None):
        return hessian(lambda zs: self.value(zs, p), np.asarray(z, dtype=float))


def lyapunov_value(L, z, p=None):
    return float(fn.raw(L.value([float(v) for v in np.asarray(z, dtype=float)], p)))


def lyapunov_grad(L, z, p=None):
    return L.grad(z, p)


def lyapunov_hessian(L, z, p=None):
    return L.hessian(z, p)


@dataclass
class RoaSettings:
    gamma: float
    samples: np.ndarray  # (N, n) sample states

    def __post_init__(self):
        if self.gamma <= 0:
            raise StructuralError("ROA gamma must be positive")
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2 or self.samples.shape[0] < 1:
            raise StructuralError("ROA samples must be a nonempty (N, n) array")


@dataclass
class AdamSettings:
    step_size: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_hat: float = 1e-8
    epochs: int = 2000
    early_stop_loss: float | None = None


@dataclass
class TrainProblem:
    """Loss definition over a closed loop with trainable xi*.

    loss_kind is "parameterized" (margin loss at z*) or "grid" (PDE-residual
    cost over the grid plus the z* terms; the printed cost carries no margin,
    so grid mode defaults to margin 0 unless overridden).
    """

    closed_loop: object
    lyapunov: LyapunovComposition
    params: object  # ParamVector holding all networks plus xi_star
    x_star: np.ndarray
    margin_a: float = 0.5
    loss_kind: str = "parameterized"
    grid: np.ndarray | None = None
    grid_reduction: str = "sum"  # or "mean"
    grid_margin_override: bool = False  # reuse margin_a in grid mode
    roa: RoaSettings | None = None
    optimizer: AdamSettings = field(default_factory=AdamSettings)

    def __post_init__(self):
        self.x_star = np.asarray(self.x_star, dtype=float)
        if self.loss_kind not in ("parameterized", "grid"):
            raise StructuralError(f"unknown loss kind '{self.loss_kind}'")
        if self.margin_a <= 0 and self.loss_kind == "parameterized":
            raise StructuralError("margin a must be positive")
        if self.loss_kind == "grid":
            if self.grid is None or len(self.grid) == 0:
                raise StructuralError("grid mode requires a nonempty grid")
            self.grid = np.asarray(self.grid, dtype=float)
        if XI_SEGMENT not in dict((n, s) for n, *s in self.params.layout):
            raise StructuralError(f"params must carry an '{XI_SEGMENT}' segment")

    @property
    def nc(self):
        return self.closed_loop.controller.state_dim

    def z_star(self):
        xi = np.atleast_1d(self.params.get(XI_SEGMENT))
        return np.concatenate([self.x_star, xi])


@dataclass
class TrainReport:
    epsilon: float
    margin_a: float
    loss_kind: str
    xi_star: list
    z_star: list
    grad_term: float
    hessian_term: float
    grid_term: float = 0.0
    roa_term: float = 0.0
    bound: float | None = None
    degeneracy_warnings: list = field(default_factory=list)
    history: list = field(default_factory=list)  # per-epoch term dicts
    epochs_run: int = 0
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "margin_a": self.margin_a,
            "loss_kind": self.loss_kind,
            "xi_star": list(self.xi_star),
            "z_star": list(self.z_star),
            "grad_term": self.grad_term,
            "hessian_term": self.hessian_term,
            "grid_term": self.grid_term,
            "roa_term": self.roa_term,
            "bound": self.bound,
            "degeneracy_warnings": list(self.degeneracy_warnings),
            "epochs_run": self.epochs_run,
            "seed": self.seed,
            "history": self.history,
            "meta": self.meta,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as f:
                f.write(text)
        return text

    def history_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["epoch", "total", "grad_term", "hessian_term", "grid_term", "roa_term"])
            for i, row in enumerate(self.history):
                w.writerow(
                    [
                        i,
                        repr(row["total"]),
                        repr(row["grad_term"]),
                        repr(row["hessian_term"]),
                        repr(row["grid_term"]),
                        repr(row["roa_term"]),
                    ]
                )


def _z_star_jets(problem, p):
    """Second-order jets at z* = (x*, xi*) with xi* pulled from the params."""
    n = problem.x_star.size
    nc = problem.nc
    dim = n + nc
    zs = []
    for i, v in enumerate(problem.x_star):
        zs.append(Jet2.seed(float(v), i, dim))
    xi = p.get(XI_SEGMENT)
    npairs = dim * (dim + 1) // 2
    for k in range(nc):
        xv = fn.take_last(xi, k)
        zs.append(
            Jet2(
                xv,
                [1.0 if j == n + k else 0.0 for j in range(dim)],
                [0.0] * npairs,
            )
        )
    return zs


def _equilibrium_terms(problem, p, margin, warnings=None):
    """Gradient-norm and Hessian-margin penalty of V at z*."""
    zs = _z_star_jets(problem, p)
    V = problem.lyapunov.value(zs, p)
    dim = len(zs)
    if not isinstance(V, Jet2):  # V constant in z
        return 0.0, 0.0
    grad_term = fn.vecnorm(V.d)
    Hm = [
        [
            V.hess_entry(i, j) - (margin if i == j else 0.0)
            for j in range(dim)
        ]
        for i in range(dim)
    ]
    lam = fn.min_eig_sym(Hm, warnings=warnings)
    hess_term = fn.relu(-1.0 * lam)
    return grad_term, hess_term


def _grid_term(problem, p):
    """Sum (or mean) over the grid of the Casimir defining-equation residual."""
    cl = problem.closed_loop
    C = problem.lyapunov.casimir
    if C is None:
        return 0.0
    Z = problem.grid
    if cl.constant_structure:
        A = cl.J_cl_at(None) - cl.R_cl_at(None)
        d = grad_batch(C.value, Z, p)
        n = len(d)
        rows = []
        for k in range(n):
            w = None
            for i in range(n):
                term = d[i] * float(A[i, k])
                w = term if w is None else w + term
            rows.append(w)
        per_point = fn.vecnorm(rows)  # elementwise over the batch
        total = fn.sum_all(per_point)
    else:
        total = None
        for z in Z:
            A = cl.J_cl_at(z) - cl.R_cl_at(z)
            g = grad_batch(C.value, z[None, :], p)
            rows = []
            for k in range(len(g)):
                w = None
                for i in range(len(g)):
                    term = g[i] * float(A[i, k])
                    w = term if w is None else w + term
                rows.append(w)
            t = fn.sum_all(fn.vecnorm(rows))
            total = t if total is None else total + t
    if problem.grid_reduction == "mean":
        total = total * (1.0 / len(Z))
    return total


def roa_regularizer(L, samples, gamma, p=None):
    """ReLU of mean(||z_i||^2 - gamma * V(z_i)) over the sample states."""
    samples = np.asarray(samples, dtype=float)
    if gamma <= 0:
        raise StructuralError("gamma must be positive")
    N = samples.shape[0]
    zs = [samples[:, i].copy() for i in range(samples.shape[1])]
    V = L.value(zs, p)
    znorm2 = float(np.sum(samples * samples)) / N
    mean_v = fn.sum_all(V) * (1.0 / N)
    return fn.relu(znorm2 - gamma * mean_v)


def _loss_terms(problem, p, warnings=None):
    margin = problem.margin_a if problem.loss_kind == "parameterized" else (
        problem.margin_a if problem.grid_margin_override else 0.0
    )
    grad_term, hess_term = _equilibrium_terms(problem, p, margin, warnings)
    grid_term = _grid_term(problem, p) if problem.loss_kind == "grid" else 0.0
    roa_term = 0.0
    if problem.roa is not None:
        roa_term = roa_regularizer(
            problem.lyapunov, problem.roa.samples, problem.roa.gamma, p
        )
    total = grad_term + hess_term + grid_term + roa_term
    return total, grad_term, hess_term, grid_term, roa_term


def loss_parameterized(problem, p=None, warnings=None):
    """||dV/dz at z*|| + ReLU(-lambda_min(d2V/dz2 at z* - a I))."""
    if problem.loss_kind != "parameterized":
        raise StructuralError("problem is not in parameterized mode")
    if p is None:
        p = BoundParams(problem.params)
    g, h = _equilibrium_terms(problem, p, problem.margin_a, warnings)
    return g + h


def loss_grid(problem, p=None, warnings=None):
    """Grid residual sum plus the z* gradient/Hessian terms (margin 0 by default)."""
    if problem.loss_kind != "grid":
        raise StructuralError("problem is not in grid mode")
    if p is None:
        p = BoundParams(problem.params)
    margin = problem.margin_a if problem.grid_margin_override else 0.0
    g, h = _equilibrium_terms(problem, p, margin, warnings)
    return g + h + _grid_term(problem, p)


def error_bound(epsilon, a):
    """Equilibrium-assignment bound epsilon / (a - epsilon)."""
    if epsilon < 0:
        raise StructuralError("epsilon must be nonnegative")
    if a <= epsilon:
        raise BoundUndefinedError(
            f"bound undefined: margin a={a} must exceed loss epsilon={epsilon}"
        )
    return epsilon / (a - epsilon)


def adam_train(problem, params=None, seed=None, callback=None):
    """Adam on the configured loss; one epoch = one loss evaluation + update.

    Deterministic given the initial parameters.  A NaN loss aborts with the
    epoch index and the last good parameter snapshot.
    """
    if params is None:
        params = problem.params
    opt = problem.optimizer
    theta = params.values
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    history = []
    warnings = []
    snapshot = theta.copy()
    epochs_run = 0

    def loss_with_terms(p):
        total, g, h, grid, roa = _loss_terms(problem, p, warnings)
        loss_with_terms.parts = tuple(
            float(fn.raw(t)) for t in (total, g, h, grid, roa)
        )
        return total

    for epoch in range(opt.epochs):
        try:
            gradient = param_grad(loss_with_terms, params, warnings=None)
        except NumericDomainError as exc:
            raise TrainingDivergedError(epoch, snapshot) from exc
        total, g, h, grid, roa = loss_with_terms.parts
        if not np.isfinite(total):
            raise TrainingDivergedError(epoch, snapshot)
        history.append(
            {
                "total": total,
                "grad_term": g,
                "hessian_term": h,
                "grid_term": grid,
                "roa_term": roa,
            }
        )
        snapshot = theta.copy()
        t = epoch + 1
        m = opt.beta1 * m + (1.0 - opt.beta1) * gradient
        v = opt.beta2 * v + (1.0 - opt.beta2) * gradient * gradient
        m_hat = m / (1.0 - opt.beta1**t)
        v_hat = v / (1.0 - opt.beta2**t)
        theta -= opt.step_size * m_hat / (np.sqrt(v_hat) + opt.epsilon_hat)
        epochs_run = t
        if callback is not None:
            callback(epoch, history[-1])
        if opt.early_stop_loss is not None and total <= opt.early_stop_loss:
            break

    # final loss at the trained parameters
    total, g, h, grid, roa = _loss_terms(problem, BoundParams(params), warnings)
    parts = tuple(float(fn.raw(t)) for t in (total, g, h, grid, roa))
    history.append(
        {
            "total": parts[0],
            "grad_term": parts[1],
            "hessian_term": parts[2],
            "grid_term": parts[3],
            "roa_term": parts[4],
        }
    )
    epsilon = parts[0]
    bound = None
    if problem.loss_kind == "parameterized" and problem.margin_a > epsilon:
        bound = error_bound(epsilon, problem.margin_a)
    xi = np.atleast_1d(params.get(XI_SEGMENT)).tolist()
    # deduplicate degeneracy warnings, preserving order
    seen = set()
    dedup = [w for w in warnings if not (w in seen or seen.add(w))]
    return TrainReport(
        epsilon=epsilon,
        margin_a=problem.margin_a,
        loss_kind=problem.loss_kind,
        xi_star=xi,
        z_star=problem.z_star().tolist(),
        grad_term=parts[1],
        hessian_term=parts[2],
        grid_term=parts[3],
        roa_term=parts[4],
        bound=bound,
        degeneracy_warnings=dedup,
        history=history,
        epochs_run=epochs_run,
        seed=seed,
    )


def find_minimum(L, start, p=None, radius=1.0, grad_tol=1e-10, max_iter=200):
    """Newton descent with backtracking from z*; returns the stationary point.

    Falls back to gradient steps when the Hessian is not positive definite;
    raises MinimumEscapedError if the iterate leaves the trust radius.
    """
    z = np.asarray(start, dtype=float).copy()
    start = z.copy()
    g = L.grad(z, p)
    for _ in range(max_iter):
        if np.linalg.norm(g) <= grad_tol:
            break
        H = L.hessian(z, p)
        spec = linalg.symmetric_eig(0.5 * (H + H.T))
        if spec.eigenvalues[0] > 0:
            step = -np.linalg.solve(H, g)
        else:
            step = -g
        # backtracking on the gradient norm
        alpha = 1.0
        base = np.linalg.norm(g)
        for _bt in range(60):
            z_new = z + alpha * step
            g_new = L.grad(z_new, p)
            if np.linalg.norm(g_new) < base:
                break
            alpha *= 0.5
        else:
            break
        z, g = z_new, g_new
        if np.linalg.norm(z - start) > radius:
            raise MinimumEscapedError(
                f"minimum search left the trust radius {radius} around {start}"
            )
    if np.linalg.norm(g) > grad_tol:
        raise MinimumEscapedError(
            f"stationary point not found: |grad| = {np.linalg.norm(g):.3e}"
        )
    H = L.hessian(z, p)
    spec = linalg.symmetric_eig(0.5 * (H + H.T))
    if spec.eigenvalues[0] <= 0:
        raise MinimumEscapedError("stationary point is not a local minimum")
    return z
