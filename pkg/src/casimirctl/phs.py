"""Port-Hamiltonian system representation, structure validation, dynamics
evaluation, and the plant-controller feedback interconnection."""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .autodiff import grad
from .errors import StructuralError

SKEW_TOL = 1e-9
DAMPING_EIG_TOL = 1e-9
INPUT_RANK_TOL = 1e-9


def _resolve(mat, x):
    """Structure matrices may be constants or callables of the state."""
    return np.asarray(mat(x), dtype=float) if callable(mat) else np.asarray(mat, dtype=float)


class PortHamiltonianSystem:
    """x' = (J(x) - R(x)) dH/dx + G(x) u,  y = G(x)^T dH/dx.

    ``hamiltonian`` is a differentiable scalar program taking the state as a
    list of autodiff scalars plus a parameter accessor (ignored by analytic
    Hamiltonians, used by neural ones).  Systems are immutable after
    construction and safe for concurrent reads.
    """

    def __init__(self, state_dim, input_dim, J, R, G, hamiltonian, region=None):
        self.state_dim = int(state_dim)
        self.input_dim = int(input_dim)
        self.J = J
        self.R = R
        self.G = G
        self.hamiltonian = hamiltonian
        self.region = None if region is None else np.asarray(region, dtype=float)
        if self.region is not None and self.region.shape != (self.state_dim, 2):
            raise StructuralError("region must be an (n, 2) box")

    @property
    def constant_structure(self):
        return not (callable(self.J) or callable(self.R) or callable(self.G))

    def J_at(self, x):
        return _resolve(self.J, x)

    def R_at(self, x):
        return _resolve(self.R, x)

    def G_at(self, x):
        return _resolve(self.G, x)

    def hamiltonian_grad(self, x, p=None):
        return grad(lambda xs: self.hamiltonian(xs, p), x)


@dataclass
class ValidationReport:
    passed: bool
    max_skewness: float
    min_damping_eigenvalue: float
    min_input_singular_value: float
    findings: list = field(default_factory=list)


def validate_structure(sys, samples, p=None):
    """Check J skewness, R PSD-ness, and G column rank at sample states."""
    max_skew = 0.0
    max_r_asym = 0.0
    min_eig = np.inf
    min_sv = np.inf
    for x in samples:
        x = np.asarray(x, dtype=float)
        J = sys.J_at(x)
        R = sys.R_at(x)
        G = sys.G_at(x)
        if J.shape != (sys.state_dim, sys.state_dim):
            raise StructuralError(f"J has shape {J.shape}")
        if R.shape != (sys.state_dim, sys.state_dim):
            raise StructuralError(f"R has shape {R.shape}")
        if G.shape != (sys.state_dim, sys.input_dim):
            raise StructuralError(f"G has shape {G.shape}")
        max_skew = max(max_skew, float(np.max(np.abs(J + J.T))))
        spec = linalg.symmetric_eig(0.5 * (R + R.T), sym_tol=np.inf)
        min_eig = min(min_eig, float(spec.eigenvalues[0]))
        max_r_asym = max(max_r_asym, float(np.max(np.abs(R - R.T))))
        # smallest singular value of G via eig of G^T G
        gram = linalg.symmetric_eig(G.T @ G)
        min_sv = min(min_sv, float(np.sqrt(max(0.0, gram.eigenvalues[0]))))
    findings = []
    if max_skew > SKEW_TOL:
        findings.append(f"J skewness residual {max_skew:.3e} exceeds {SKEW_TOL:.0e}")
    if min_eig < -DAMPING_EIG_TOL:
        findings.append(
            f"R has negative eigenvalue {min_eig:.3e} (must be PSD)"
        )
    if max_r_asym > SKEW_TOL:
        findings.append(f"R asymmetry residual {max_r_asym:.3e} exceeds {SKEW_TOL:.0e}")
    if min_sv < INPUT_RANK_TOL:
        findings.append(f"G nearly rank-deficient (min sv {min_sv:.3e})")
    return ValidationReport(
        passed=not findings,
        max_skewness=max_skew,
        min_damping_eigenvalue=min_eig,
        min_input_singular_value=min_sv,
        findings=findings,
    )


def vector_field(sys, x, u, p=None):
    """(J(x) - R(x)) dH/dx + G(x) u."""
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if x.size != sys.state_dim:
        raise StructuralError(f"state has size {x.size}, expected {sys.state_dim}")
    if u.size != sys.input_dim:
        raise StructuralError(f"input has size {u.size}, expected {sys.input_dim}")
    dH = sys.hamiltonian_grad(x, p)
    return (sys.J_at(x) - sys.R_at(x)) @ dH + sys.G_at(x) @ u


def output(sys, x, p=None):
    """y = G(x)^T dH/dx."""
    x = np.asarray(x, dtype=float)
    if x.size != sys.state_dim:
        raise StructuralError(f"state has size {x.size}, expected {sys.state_dim}")
    return sys.G_at(x).T @ sys.hamiltonian_grad(x, p)


def passivity_residual(sys, x, u, p=None):
    """dH/dt - y^T u along the dynamics; <= 0 for a valid PHS."""
    x = np.asarray(x, dtype=float)
    dH = sys.hamiltonian_grad(x, p)
    dxdt = vector_field(sys, x, u, p)
    y = sys.G_at(x).T @ dH
    return float(dH @ dxdt - y @ np.atleast_1d(np.asarray(u, dtype=float)))


class ClosedLoopSystem:
    """Plant + PHS controller under negative feedback: u = -y_c + v,
    u_c = y + v_c.  Composite state z = (x, xi); Hamiltonian H(x) + H_c(xi)."""

    def __init__(self, plant, controller):
        if plant.input_dim != controller.input_dim:
            raise StructuralError(
                f"port dimension mismatch: plant m={plant.input_dim}, "
                f"controller m={controller.input_dim}"
            )
        self.plant = plant
        self.controller = controller
        self.state_dim = plant.state_dim + controller.state_dim
        self.input_dim = 2 * plant.input_dim
        if plant.constant_structure and controller.constant_structure:
            self.J_cl = self._assemble_J(None, None)
            self.R_cl = self._assemble_R(None, None)
        else:
            self.J_cl = lambda z: self._assemble_J(*self._split(z))
            self.R_cl = lambda z: self._assemble_R(*self._split(z))

    @property
    def constant_structure(self):
        return not callable(self.J_cl)

    def _split(self, z):
        z = np.asarray(z, dtype=float)
        return z[: self.plant.state_dim], z[self.plant.state_dim :]

    def _assemble_J(self, x, xi):
        J = self.plant.J_at(x)
        Jc = self.controller.J_at(xi)
        G = self.plant.G_at(x)
        Gc = self.controller.G_at(xi)
        top = np.hstack([J, -G @ Gc.T])
        bottom = np.hstack([Gc @ G.T, Jc])
        return np.vstack([top, bottom])

    def _assemble_R(self, x, xi):
        R = self.plant.R_at(x)
        Rc = self.controller.R_at(xi)
        n, nc = self.plant.state_dim, self.controller.state_dim
        out = np.zeros((n + nc, n + nc))
        out[:n, :n] = R
        out[n:, n:] = Rc
        return out

    def J_cl_at(self, z):
        return self.J_cl(z) if callable(self.J_cl) else self.J_cl

    def R_cl_at(self, z):
        return self.R_cl(z) if callable(self.R_cl) else self.R_cl

    def input_block(self, z=None):
        x, xi = (None, None) if z is None else self._split(z)
        G = self.plant.G_at(x)
        Gc = self.controller.G_at(xi)
        n, nc = self.plant.state_dim, self.controller.state_dim
        m = self.plant.input_dim
        out = np.zeros((n + nc, 2 * m))
        out[:n, :m] = G
        out[n:, m:] = Gc
        return out

    def hamiltonian_total(self, zs, p=None):
        """H(x) + H_c(xi) over a list of autodiff scalars."""
        n = self.plant.state_dim
        return self.plant.hamiltonian(zs[:n], p) + self.controller.hamiltonian(
            zs[n:], p
        )

    def hamiltonian_total_grad(self, z, p=None):
        return grad(lambda zs: self.hamiltonian_total(zs, p), z)

    def as_phs(self):
        """View the closed loop as one PHS with inputs (v, v_c)."""
        return PortHamiltonianSystem(
            state_dim=self.state_dim,
            input_dim=self.input_dim,
            J=self.J_cl if not callable(self.J_cl) else (lambda z: self.J_cl_at(z)),
            R=self.R_cl if not callable(self.R_cl) else (lambda z: self.R_cl_at(z)),
            G=self.input_block()
            if self.plant.constant_structure and self.controller.constant_structure
            else (lambda z: self.input_block(z)),
            hamiltonian=self.hamiltonian_total,
        )


def interconnect(plant, controller):
    """Standard negative feedback interconnection of two PHSs."""
    return ClosedLoopSystem(plant, controller)
