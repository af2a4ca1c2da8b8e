"""Damping-injected closed-loop simulation and trajectory verification."""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import StructuralError
from .train import error_bound


@dataclass
class DampingGains:
    """Symmetric positive-definite injection gains for plant and controller."""

    D: np.ndarray
    D_c: np.ndarray

    def __post_init__(self):
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        self.D_c = np.atleast_2d(np.asarray(self.D_c, dtype=float))
        for name, M in (("D", self.D), ("D_c", self.D_c)):
            if M.shape[0] != M.shape[1]:
                raise StructuralError(f"{name} must be square")
            if np.max(np.abs(M - M.T)) > 1e-9:
                raise StructuralError(f"{name} must be symmetric")
            if linalg.symmetric_eig(M).eigenvalues[0] <= 0:
                raise StructuralError(f"{name} must be positive definite")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (T, n)
    lyapunov: np.ndarray
    hamiltonian: np.ndarray
    inputs: np.ndarray  # (T, 2m): v then v_c
    aborted: bool = False

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise StructuralError("times/states length mismatch")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise StructuralError("times must be strictly increasing")

    def to_csv(self, path):
        n = self.states.shape[1]
        m2 = self.inputs.shape[1]
        m = m2 // 2
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            header = (
                ["t"]
                + [f"z_{i + 1}" for i in range(n)]
                + ["V", "H_total"]
                + [f"v_{i + 1}" for i in range(m)]
                + [f"v_c_{i + 1}" for i in range(m)]
            )
            w.writerow(header)
            for k in range(len(self.times)):
                w.writerow(
                    [repr(float(self.times[k]))]
                    + [repr(float(v)) for v in self.states[k]]
                    + [repr(float(self.lyapunov[k])), repr(float(self.hamiltonian[k]))]
                    + [repr(float(v)) for v in self.inputs[k]]
                )


class ControlledLoop:
    """Closed loop with damping injection v = -D G^T dV/dx,
    v_c = -D_c G_c^T dV/dxi."""

    def __init__(self, closed_loop, lyapunov, gains, p=None):
        self.cl = closed_loop
        self.L = lyapunov
        self.gains = gains
        self.p = p

    def inputs_at(self, z):
        z = np.asarray(z, dtype=float)
        n = self.cl.plant.state_dim
        dV = self.L.grad(z, self.p)
        x, xi = z[:n], z[n:]
        G = self.cl.plant.G_at(x)
        Gc = self.cl.controller.G_at(xi)
        v = -self.gains.D @ (G.T @ dV[:n])
        v_c = -self.gains.D_c @ (Gc.T @ dV[n:])
        return v, v_c, dV

    def field(self, z):
        z = np.asarray(z, dtype=float)
        v, v_c, _ = self.inputs_at(z)
        dH = self.cl.hamiltonian_total_grad(z, self.p)
        drift = (self.cl.J_cl_at(z) - self.cl.R_cl_at(z)) @ dH
        return drift + self.cl.input_block(z) @ np.concatenate([v, v_c])

    def lyapunov_at(self, z):
        from .train import lyapunov_value

        return lyapunov_value(self.L, z, self.p)

    def hamiltonian_at(self, z):
        from .autodiff import functions as fn

        return float(
            fn.raw(self.cl.hamiltonian_total([float(q) for q in z], self.p))
        )


def controlled_field(cl, L, gains, z, p=None):
    """State derivative of the damped closed loop at z."""
    return ControlledLoop(cl, L, gains, p).field(z)


def rk4_integrate(field, z0, dt, T, observe=None):
    """Classic fixed-step fourth-order Runge-Kutta.

    ``observe(z) -> (V, H, inputs)`` fills the trajectory columns; without it
    those columns are zero.  A NaN state aborts with the partial trajectory.
    """
    if dt <= 0 or T < dt:
        raise StructuralError("require dt > 0 and T >= dt")
    z = np.asarray(z0, dtype=float).copy()
    steps = int(np.ceil(T / dt))
    times = [0.0]
    states = [z.copy()]
    vs, hs, ins = [], [], []

    def record(z):
        if observe is None:
            vs.append(0.0)
            hs.append(0.0)
            ins.append(np.zeros(0))
        else:
            V, H, u = observe(z)
            vs.append(V)
            hs.append(H)
            ins.append(np.asarray(u, dtype=float))

    record(z)
    aborted = False
    for k in range(steps):
        k1 = field(z)
        k2 = field(z + 0.5 * dt * k1)
        k3 = field(z + 0.5 * dt * k2)
        k4 = field(z + dt * k3)
        z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(z)):
            aborted = True
            break
        times.append((k + 1) * dt)
        states.append(z.copy())
        record(z)
    width = max((len(u) for u in ins), default=0)
    inputs = np.zeros((len(times), width))
    for i, u in enumerate(ins):
        inputs[i, : len(u)] = u
    return Trajectory(
        times=np.asarray(times),
        states=np.asarray(states),
        lyapunov=np.asarray(vs),
        hamiltonian=np.asarray(hs),
        inputs=inputs,
        aborted=aborted,
    )


def simulate_closed_loop(cl, L, gains, z0, dt=0.01, T=50.0, p=None):
    """Integrate the damped loop, recording V, H + H_c, and (v, v_c)."""
    loop = ControlledLoop(cl, L, gains, p)

    def observe(z):
        v, v_c, _ = loop.inputs_at(z)
        return (
            loop.lyapunov_at(z),
            loop.hamiltonian_at(z),
            np.concatenate([v, v_c]),
        )

    return rk4_integrate(loop.field, z0, dt, T, observe=observe)


@dataclass
class StabilizationReport:
    passed: bool
    max_tail_distance: float
    tol: float
    tail_fraction: float


def verify_stabilization(traj, z_bar, tol=0.05, tail_fraction=0.1):
    """Pass iff the last tail_fraction of samples stays within tol of z_bar."""
    if len(traj.times) == 0:
        raise StructuralError("empty trajectory")
    z_bar = np.asarray(z_bar, dtype=float)
    k0 = int(np.floor(len(traj.times) * (1.0 - tail_fraction)))
    k0 = min(max(k0, 0), len(traj.times) - 1)
    tail = traj.states[k0:]
    dists = np.linalg.norm(tail - z_bar[None, :], axis=1)
    worst = float(np.max(dists))
    return StabilizationReport(
        passed=worst <= tol, max_tail_distance=worst, tol=tol, tail_fraction=tail_fraction
    )


@dataclass
class DecreaseReport:
    passed: bool
    max_increase: float
    first_violation_index: int | None = None


def verify_lyapunov_decrease(traj, rel_tol=1e-8):
    """Pass iff V(t_{k+1}) <= V(t_k) + rel_tol * (1 + |V(t_k)|) for all k."""
    V = np.asarray(traj.lyapunov, dtype=float)
    if V.size < 2:
        return DecreaseReport(passed=True, max_increase=0.0)
    allowed = rel_tol * (1.0 + np.abs(V[:-1]))
    inc = V[1:] - V[:-1]
    viol = inc - allowed
    worst = float(np.max(inc))
    bad = np.where(viol > 0)[0]
    return DecreaseReport(
        passed=bad.size == 0,
        max_increase=worst,
        first_violation_index=int(bad[0]) if bad.size else None,
    )


@dataclass
class BoundReport:
    passed: bool
    distance: float
    bound: float
    slack: float = 1.1
    epsilon: float = 0.0
    margin_a: float = 0.0


def verify_bound(report, z_bar, slack=1.1):
    """Check ||z_bar - z*|| <= slack * epsilon/(a - epsilon).

    The slack covers the higher-order terms dropped in the bound derivation.
    """
    z_bar = np.asarray(z_bar, dtype=float)
    z_star = np.asarray(report.z_star, dtype=float)
    bound = error_bound(report.epsilon, report.margin_a)
    dist = float(np.linalg.norm(z_bar - z_star))
    return BoundReport(
        passed=dist <= slack * bound,
        distance=dist,
        bound=bound,
        slack=slack,
        epsilon=report.epsilon,
        margin_a=report.margin_a,
    )
