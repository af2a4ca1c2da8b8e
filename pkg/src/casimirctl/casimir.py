"""Casimir functions for the closed loop: defining-equation residual, the
kernel-basis parameterization C(z) = K(sum_i beta_i(z . v_i)), and the
separable state-dependent construction via per-coordinate antiderivatives."""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .autodiff import ParamVector, grad
from .autodiff import functions as fn
from .autodiff.forward import Jet
from .errors import (
    NoCasimirError,
    QuadratureError,
    StructuralError,
    UnsupportedStructureError,
)
from .neural import Mlp


class CasimirParameterization:
    """Casimir by construction from an orthonormal kernel-intersection basis.

    For constant J_cl, R_cl the gradient lies in span{v_i} for any network
    parameters, so the defining equation holds identically.
    """

    def __init__(self, basis, betas, K):
        self.basis = np.asarray(basis, dtype=float)  # (r, n)
        self.betas = betas
        self.K = K
        if self.basis.shape[0] != len(betas) or self.basis.shape[0] < 1:
            raise StructuralError("one inner network per basis vector required")

    @property
    def r(self):
        return self.basis.shape[0]

    @property
    def state_dim(self):
        return self.basis.shape[1]

    def value(self, zs, p=None):
        if len(zs) != self.state_dim:
            raise StructuralError(
                f"expected {self.state_dim} state scalars, got {len(zs)}"
            )
        inner = None
        for i in range(self.r):
            s = None
            for j, zj in enumerate(zs):
                term = zj * float(self.basis[i, j])
                s = term if s is None else s + term
            b = self.betas[i].forward([s], p)
            inner = b if inner is None else inner + b
        return self.K.forward([inner], p)

    def grad(self, z, p=None):
        return grad(lambda zs: self.value(zs, p), z)


class GridCasimir:
    """Free-form neural Casimir candidate for the grid (PDE-residual) cost."""

    def __init__(self, net):
        self.net = net

    @property
    def state_dim(self):
        return self.net.widths[0]

    def value(self, zs, p=None):
        return self.net.forward(list(zs), p)

    def grad(self, z, p=None):
        return grad(lambda zs: self.value(zs, p), z)


def build_parameterization(
    cl, widths_K=(1, 64, 1), widths_beta=(1, 16, 1), seed=0, params=None
):
    """Allocate the kernel parameterization for a constant-structure loop."""
    if not cl.constant_structure:
        raise UnsupportedStructureError(
            "J_cl/R_cl depend on the state; use SeparableCasimir or the grid cost"
        )
    basis = linalg.intersect_kernels(cl.J_cl, cl.R_cl)
    if not basis:
        raise NoCasimirError(
            "ker J_cl intersect ker R_cl is trivial; no Casimir exists for this "
            "loop -- train with the grid cost instead"
        )
    if params is None:
        params = ParamVector()
    betas = [
        Mlp(widths_beta, seed=seed + 101 + i, params=params, name=f"beta_{i}")
        for i in range(len(basis))
    ]
    K = Mlp(widths_K, seed=seed, params=params, name="K")
    return CasimirParameterization(np.array(basis), betas, K)


def casimir_eval(C, z, p=None):
    return float(fn.raw(C.value([float(v) for v in np.asarray(z, dtype=float)], p)))


def casimir_grad(C, z, p=None):
    return C.grad(np.asarray(z, dtype=float), p)


def casimir_residual(Cgrad, cl, z):
    """Euclidean norm of (dC/dz)^T (J_cl(z) - R_cl(z))."""
    Cgrad = np.asarray(Cgrad, dtype=float)
    A = cl.J_cl_at(z) - cl.R_cl_at(z)
    if Cgrad.size != A.shape[0]:
        raise StructuralError("gradient/loop dimension mismatch")
    return float(np.linalg.norm(Cgrad @ A))


def grad_batch(value_fn, Z, p=None):
    """Per-point gradient of a scalar program over a batch of states.

    Z is (N, n); returns the n tangent coefficients (arrays of length N, or
    Vars holding such arrays when p carries a tape).
    """
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[1]
    zs = [Jet(Z[:, i].copy(), [1.0 if k == i else 0.0 for k in range(n)]) for i in range(n)]
    out = value_fn(zs, p)
    if not isinstance(out, Jet):
        return [np.zeros(Z.shape[0]) for _ in range(n)]
    return out.d


def residual_norms_batch(C, cl, Z, p=None):
    """Casimir residual norms at each row of Z (constant-structure loops)."""
    if not cl.constant_structure:
        return np.array(
            [casimir_residual(casimir_grad(C, z, p), cl, z) for z in Z]
        )
    A = cl.J_cl_at(None) - cl.R_cl_at(None)
    d = grad_batch(C.value, Z, p)
    n = len(d)
    sq = None
    for k in range(n):
        w = None
        for i in range(n):
            term = d[i] * float(A[i, k])
            w = term if w is None else w + term
        sq = w * w if sq is None else sq + w * w
    vals = np.sqrt(np.maximum(0.0, np.asarray(fn.raw(sq), dtype=float)))
    return vals


@dataclass
class IntegrabilityReport:
    passed: bool
    max_violation: float
    worst_pair: tuple = (0, 0)
    tol: float = 1e-6


def check_integrability(F, samples, tol=1e-6):
    """Max over samples and index pairs of |dF_i/dz_j - dF_j/dz_i|.

    F maps a list of autodiff scalars to a list of scalars (a vector field).
    """
    worst = 0.0
    pair = (0, 0)
    for z in samples:
        z = np.asarray(z, dtype=float)
        n = z.size
        rows = [
            grad(lambda zs, i=i: F(zs)[i], z) for i in range(n)
        ]  # rows[i][j] = dF_i/dz_j
        for i in range(n):
            for j in range(i + 1, n):
                v = abs(rows[i][j] - rows[j][i])
                if v > worst:
                    worst, pair = v, (i, j)
    return IntegrabilityReport(passed=worst <= tol, max_violation=worst, worst_pair=pair, tol=tol)


def _adaptive_simpson(f, a, b, tol, max_depth=40):
    """Classic adaptive Simpson with Richardson correction."""

    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lmid = 0.5 * (lo + mid)
        rmid = 0.5 * (mid + hi)
        fl = f(lmid)
        fr = f(rmid)
        left = simpson(lo, mid, flo, fl, fmid)
        right = simpson(mid, hi, fmid, fr, fhi)
        if depth >= max_depth:
            raise QuadratureError(
                f"adaptive Simpson failed to converge on [{lo:.6g}, {hi:.6g}] "
                f"(depth {depth}, estimate gap {abs(left + right - whole):.3e})"
            )
        if abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return recurse(lo, mid, flo, fl, fmid, left, eps / 2.0, depth + 1) + recurse(
            mid, hi, fmid, fr, fhi, right, eps / 2.0, depth + 1
        )

    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    fm = f(0.5 * (a + b))
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 0)


class SeparableCasimir:
    """C(z) = K(sum_i A_i(z_i)) with A_i the antiderivative of profile F_i.

    Applies when the kernel field is separable per coordinate, in which case
    the integrability condition holds trivially.  The quadrature origin is 0
    per coordinate (any constant offset is absorbed by K).
    """

    def __init__(self, profiles, K, quad_tol=1e-10):
        self.profiles = list(profiles)  # scalar callables, generic over autodiff types
        self.K = K  # Mlp or scalar callable
        self.quad_tol = quad_tol

    @property
    def state_dim(self):
        return len(self.profiles)

    def _antiderivative(self, i, x):
        Fi = self.profiles[i]

        def scalar_fi(s):
            return float(fn.raw(Fi(s)))

        def d2(s):
            return float(grad(lambda xs: Fi(xs[0]), [s])[0])

        value = _adaptive_simpson(scalar_fi, 0.0, float(fn.raw(x)), self.quad_tol)
        # derivative of the antiderivative is the profile itself
        from .autodiff.forward import Jet2

        if isinstance(x, Jet2):
            s = float(fn.raw(x))
            return x.chain(value, scalar_fi(s), d2(s))
        if isinstance(x, Jet):
            s = float(fn.raw(x))
            return x.chain(value, scalar_fi(s))
        return value

    def value(self, zs, p=None):
        inner = None
        for i, zi in enumerate(zs):
            a = self._antiderivative(i, zi)
            inner = a if inner is None else inner + a
        if isinstance(self.K, Mlp):
            return self.K.forward([inner], p)
        return self.K(inner)

    def grad(self, z, p=None):
        return grad(lambda zs: self.value(zs, p), z)


def separable_casimir_eval(S, z, p=None):
    return float(fn.raw(S.value([float(v) for v in np.asarray(z, dtype=float)], p)))
