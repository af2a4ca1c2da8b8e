"""End-to-end experiment orchestration shared by the CLI and the HTTP
service: training runs, equilibrium estimation and bound checks, seeded
trajectory batches, Lyapunov surface export, and the margin sweep."""

import csv
import datetime
import json
import os

import numpy as np

from . import bench, phs, sim, train
from .autodiff import functions as fn
from .casimir import CasimirParameterization
from .errors import BoundUndefinedError, ConfigError, MinimumEscapedError

SURFACE_DEFAULT_GRID = (101, 101)
SURFACE_DEFAULT_BOX = ((-2.0, 2.0), (-2.0, 2.0))


def _ensure_dir(path):
    if path:
        os.makedirs(path, exist_ok=True)


def _timestamp():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def run_training(cfg, seed=None, margin_a=None):
    """Build the problem from a config and train; returns (report, parts)."""
    problem, parts = bench.build_problem(cfg, margin_a=margin_a, seed=seed)
    report = train.adam_train(problem, seed=parts["seed"])
    report.meta["timestamp"] = _timestamp()
    return report, parts, problem


def estimate_equilibrium(lyapunov, z_star, radius=1.0):
    """Nearest Lyapunov minimum z-bar to the assigned equilibrium z*."""
    return train.find_minimum(lyapunov, z_star, radius=radius)


def bound_check(report, lyapunov, radius=1.0, slack=1.1):
    """find_minimum from z* then the assignment-error inequality."""
    z_bar = estimate_equilibrium(lyapunov, np.asarray(report.z_star), radius)
    return z_bar, sim.verify_bound(report, z_bar, slack=slack)


def stationarity_check(parts, x_star):
    """Classic energy-shaping residuals for rank-1 kernel pendulum loops."""
    cas = parts["casimir"]
    if not isinstance(cas, CasimirParameterization) or cas.r != 1:
        return None
    K_eff = bench.effective_K(cas)
    hc = parts["networks"]["H_c"]

    def Hc_fn(s):
        return hc.forward([s])

    xi = parts["params"].get(train.XI_SEGMENT)
    r1, r2, min_eig = bench.stationarity_residual(K_eff, Hc_fn, xi, x_star[0])
    return {"r1": float(r1), "r2": float(r2), "min_eig_M": float(min_eig)}


def simulate_batch(cfg, parts, z_bar=None, out_dir=None, fmt="csv"):
    """n_trajectories seeded runs from the config init box; per-run files
    plus stabilization and Lyapunov-decrease verdicts."""
    sc = cfg.simulation
    cl = parts["closed_loop"]
    L = parts["lyapunov"]
    gains = sim.DampingGains(np.asarray(cfg.gains.D), np.asarray(cfg.gains.D_c))
    box = np.asarray(sc.init_box, dtype=float)
    if box.shape[0] != cl.state_dim:
        raise ConfigError(
            f"init_box has {box.shape[0]} rows, state dimension is {cl.state_dim}"
        )
    inits = bench.sample_box(box, sc.n_trajectories, parts["seed"] + 5001)
    results = []
    for i, z0 in enumerate(inits):
        traj = sim.simulate_closed_loop(
            cl, L, gains, z0, dt=sc.dt, T=sc.horizon
        )
        entry = {
            "index": i,
            "initial_state": [float(v) for v in z0],
            "aborted": bool(traj.aborted),
            "final_state": [float(v) for v in traj.states[-1]],
        }
        if z_bar is not None:
            stab = sim.verify_stabilization(
                traj, z_bar, tol=sc.tolerance, tail_fraction=sc.tail_fraction
            )
            entry["stabilized"] = stab.passed
            entry["max_tail_distance"] = stab.max_tail_distance
        dec = sim.verify_lyapunov_decrease(traj)
        entry["lyapunov_nonincreasing"] = dec.passed
        entry["max_lyapunov_increase"] = dec.max_increase
        if out_dir is not None:
            if fmt == "csv":
                path = os.path.join(out_dir, f"trajectory_{i}.csv")
                traj.to_csv(path)
            else:
                path = os.path.join(out_dir, f"trajectory_{i}.json")
                with open(path, "w") as f:
                    json.dump(
                        {
                            "times": traj.times.tolist(),
                            "states": traj.states.tolist(),
                            "lyapunov": traj.lyapunov.tolist(),
                            "hamiltonian": traj.hamiltonian.tolist(),
                            "inputs": traj.inputs.tolist(),
                        },
                        f,
                    )
            entry["file"] = path
        results.append(entry)
    return results


def surface_grid(parts, grid=SURFACE_DEFAULT_GRID, box=SURFACE_DEFAULT_BOX):
    """Lyapunov values over a (q, p) grid at xi = xi*; returns (Q, P, V)."""
    L = parts["lyapunov"]
    cl = parts["closed_loop"]
    n = cl.plant.state_dim
    if n != 2:
        raise ConfigError("surface export requires a two-state plant")
    w, h = int(grid[0]), int(grid[1])
    if w < 2 or h < 2:
        raise ConfigError("surface grid must be at least 2x2 points")
    qs = np.linspace(box[0][0], box[0][1], w)
    ps = np.linspace(box[1][0], box[1][1], h)
    Q, P = np.meshgrid(qs, ps, indexing="ij")
    xi = np.atleast_1d(parts["params"].get(train.XI_SEGMENT))
    batch = [Q.ravel(), P.ravel()] + [
        np.full(Q.size, float(v)) for v in xi
    ]
    V = np.asarray(fn.raw(L.value(batch)), dtype=float).reshape(Q.shape)
    return Q, P, V


def export_surface(parts, path, grid=SURFACE_DEFAULT_GRID, box=SURFACE_DEFAULT_BOX, fmt="csv"):
    """Write the surface as rows (q, p, V); returns the grid-minimum point."""
    Q, P, V = surface_grid(parts, grid, box)
    if fmt == "csv":
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["q", "p", "V"])
            for i in range(Q.shape[0]):
                for j in range(Q.shape[1]):
                    w.writerow(
                        [repr(float(Q[i, j])), repr(float(P[i, j])), repr(float(V[i, j]))]
                    )
    else:
        with open(path, "w") as f:
            json.dump(
                {"q": Q.tolist(), "p": P.tolist(), "V": V.tolist()}, f
            )
    k = int(np.argmin(V))
    i, j = divmod(k, V.shape[1])
    return {
        "min_q": float(Q[i, j]),
        "min_p": float(P[i, j]),
        "min_V": float(V[i, j]),
        "grid": [Q.shape[0], Q.shape[1]],
        "box": [list(box[0]), list(box[1])],
        "file": path,
    }


def sweep_margin(cfg, values=None, out_path=None, seed=None, slack=1.1):
    """Retrain per margin value; rows of (a, epsilon, bound, error, pass)."""
    values = list(cfg.sweep_a if values is None else values)
    rows = []
    for a in values:
        report, parts, problem = run_training(cfg, seed=seed, margin_a=a)
        row = {"a": float(a), "epsilon": report.epsilon}
        try:
            z_bar, bc = bound_check(report, parts["lyapunov"], slack=slack)
            row.update(
                bound=bc.bound, error=bc.distance, passed=bool(bc.passed)
            )
        except (BoundUndefinedError, MinimumEscapedError) as exc:
            row.update(bound=None, error=None, passed=False, reason=str(exc))
        rows.append(row)
    if out_path is not None:
        write_sweep(rows, out_path)
    return rows


def write_sweep(rows, path, fmt="csv"):
    if fmt == "json":
        with open(path, "w") as f:
            json.dump(rows, f, indent=2, sort_keys=True)
        return
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["a", "epsilon", "bound", "error", "pass"])
        for r in rows:
            w.writerow(
                [
                    repr(r["a"]),
                    repr(r["epsilon"]),
                    "" if r["bound"] is None else repr(r["bound"]),
                    "" if r["error"] is None else repr(r["error"]),
                    str(bool(r["passed"])).lower(),
                ]
            )


def validate_config_system(cfg, n_samples=100, seed=None):
    """Structure validation of the configured plant at seeded sample states."""
    plant = bench.build_system(cfg.system)
    box = plant.region
    if box is None:
        box = np.array([[-2.0, 2.0]] * plant.state_dim)
    samples = bench.sample_box(box, n_samples, cfg.seed if seed is None else seed)
    return phs.validate_structure(plant, samples)


def run_full_experiment(cfg, out_dir=None, seed=None, fmt="csv", sweep=True):
    """Full reproduction pipeline: train, save the report/model, estimate
    z-bar, check the error bound and stationarity conditions, simulate the
    seeded trajectory batch, export the Lyapunov surface, and (optionally)
    run the margin sweep.  Returns a summary dict; writes artifacts when
    out_dir is given."""
    out_dir = cfg.out_dir if out_dir is None else out_dir
    _ensure_dir(out_dir)
    report, parts, problem = run_training(cfg, seed=seed)
    summary = {
        "epsilon": report.epsilon,
        "margin_a": report.margin_a,
        "loss_kind": report.loss_kind,
        "xi_star": report.xi_star,
        "z_star": report.z_star,
        "bound": report.bound,
        "epochs_run": report.epochs_run,
        "seed": parts["seed"],
        "verifications": {},
    }
    if out_dir is not None:
        report.to_json(os.path.join(out_dir, "train_report.json"))
        report.history_csv(os.path.join(out_dir, "loss_history.csv"))
        bench.save_bundle(os.path.join(out_dir, "model.json"), cfg, parts, report)
        summary["files"] = {
            "train_report": os.path.join(out_dir, "train_report.json"),
            "loss_history": os.path.join(out_dir, "loss_history.csv"),
            "model": os.path.join(out_dir, "model.json"),
        }

    z_bar = None
    try:
        z_bar, bc = bound_check(report, parts["lyapunov"])
        summary["z_bar"] = [float(v) for v in z_bar]
        summary["verifications"]["bound"] = {
            "passed": bool(bc.passed),
            "distance": bc.distance,
            "bound": bc.bound,
            "slack": bc.slack,
        }
    except (BoundUndefinedError, MinimumEscapedError) as exc:
        summary["verifications"]["bound"] = {"passed": False, "reason": str(exc)}

    stat = stationarity_check(parts, problem.x_star)
    if stat is not None:
        stat["passed"] = (
            abs(stat["r1"]) <= max(report.epsilon, 1e-6) * 10.0
            and abs(stat["r2"]) <= max(report.epsilon, 1e-6) * 10.0
            and stat["min_eig_M"] > 0.0
        )
        summary["verifications"]["stationarity"] = stat

    sims = simulate_batch(cfg, parts, z_bar=z_bar, out_dir=out_dir, fmt=fmt)
    summary["trajectories"] = sims
    summary["verifications"]["stabilization"] = {
        "passed": all(t.get("stabilized", False) for t in sims),
        "n_trajectories": len(sims),
    }
    summary["verifications"]["lyapunov_decrease"] = {
        "passed": all(t["lyapunov_nonincreasing"] for t in sims)
    }

    if parts["plant"].state_dim == 2:
        surf_path = None
        if out_dir is not None:
            ext = "csv" if fmt == "csv" else "json"
            surf_path = os.path.join(out_dir, f"surface.{ext}")
        if surf_path is not None:
            summary["surface"] = export_surface(parts, surf_path, fmt=fmt)

    if sweep:
        sweep_path = (
            os.path.join(out_dir, "sweep_a.csv") if out_dir is not None else None
        )
        rows = sweep_margin(cfg, out_path=sweep_path, seed=seed)
        summary["sweep_a"] = rows
        summary["verifications"]["sweep_a"] = {
            "passed": all(r["passed"] for r in rows)
        }

    summary["passed"] = all(
        v.get("passed", False) for v in summary["verifications"].values()
    )
    if out_dir is not None:
        with open(os.path.join(out_dir, "summary.json"), "w") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
    return summary


def simulate_from_model(model_path, cfg, out_dir=None, fmt="csv", seed=None):
    """Load a trained bundle and run the config's trajectory batch."""
    parts = bench.load_bundle(model_path)
    parts["seed"] = cfg.seed if seed is None else int(seed)
    z_bar = None
    try:
        z_star = np.concatenate([parts["x_star"], parts["xi_star"]])
        z_bar = train.find_minimum(parts["lyapunov"], z_star)
    except MinimumEscapedError:
        pass
    _ensure_dir(out_dir)
    sims = simulate_batch(cfg, parts, z_bar=z_bar, out_dir=out_dir, fmt=fmt)
    return {
        "z_bar": None if z_bar is None else [float(v) for v in z_bar],
        "trajectories": sims,
        "stabilized": all(t.get("stabilized", False) for t in sims)
        if z_bar is not None
        else None,
    }


def verify_bound_from_files(report_path, model_path, slack=1.1):
    """Re-run the bound verification from a saved report and model bundle."""
    with open(report_path) as f:
        rep = json.load(f)
    return verify_bound_from_data(rep, model_path, slack=slack)


def verify_bound_from_data(report_dict, model, slack=1.1):
    """Bound verification from an in-memory report dict and bundle/path."""
    parts = bench.load_bundle(model)

    class _Rep:
        epsilon = float(report_dict["epsilon"])
        margin_a = float(report_dict["margin_a"])
        z_star = np.asarray(report_dict["z_star"], dtype=float)

    z_bar, bc = bound_check(_Rep, parts["lyapunov"], slack=slack)
    return {
        "passed": bool(bc.passed),
        "distance": bc.distance,
        "bound": bc.bound,
        "epsilon": bc.epsilon,
        "margin_a": bc.margin_a,
        "z_bar": [float(v) for v in z_bar],
        "slack": slack,
    }
