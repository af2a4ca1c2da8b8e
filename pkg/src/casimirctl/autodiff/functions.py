"""Primitive functions generic over floats, numpy arrays, Vars, and jets.

This is the single supported primitive set for differentiable programs:
+, -, *, /, integer/float powers, tanh, exp, log, sin, cos, sqrt, ReLU,
Euclidean norm, summation, affine maps, and the smallest eigenvalue of a
symmetric matrix.
"""

import numpy as np

from .. import linalg
from ..errors import NumericDomainError, StructuralError
from .forward import Jet, Jet2
from .reverse import Var, _unbroadcast

DEGENERATE_EIG_GAP = 1e-8


def raw(x):
    """Primal float/array value under all differentiation levels."""
    while isinstance(x, (Jet, Jet2, Var)):
        x = x.f if isinstance(x, (Jet, Jet2)) else x.value
    return x


def _check_finite(value, primitive):
    if isinstance(value, np.ndarray):
        if not np.all(np.isfinite(value)):
            raise NumericDomainError(primitive)
    elif not np.isfinite(value):
        raise NumericDomainError(primitive)


# -- elementwise unary primitives ----------------------------------------


def tanh(x):
    if isinstance(x, Jet2):
        t = tanh(x.f)
        d1 = 1.0 - t * t
        return x.chain(t, d1, -2.0 * t * d1)
    if isinstance(x, Jet):
        t = tanh(x.f)
        return x.chain(t, 1.0 - t * t)
    if isinstance(x, Var):
        t = np.tanh(x.value)
        return x._unary(t, lambda g: g * (1.0 - t * t))
    return np.tanh(x)


def exp(x):
    if isinstance(x, Jet2):
        e = exp(x.f)
        return x.chain(e, e, e)
    if isinstance(x, Jet):
        e = exp(x.f)
        return x.chain(e, e)
    if isinstance(x, Var):
        e = np.exp(x.value)
        _check_finite(e, "exp")
        return x._unary(e, lambda g: g * e)
    e = np.exp(x)
    _check_finite(e, "exp")
    return e


def log(x):
    v = raw(x)
    if np.any(np.asarray(v) <= 0.0):
        raise NumericDomainError("log", "log requires positive argument")
    if isinstance(x, Jet2):
        return x.chain(log(x.f), 1.0 / x.f, -1.0 / (x.f * x.f))
    if isinstance(x, Jet):
        return x.chain(log(x.f), 1.0 / x.f)
    if isinstance(x, Var):
        xv = x.value
        return x._unary(np.log(xv), lambda g: g / xv)
    return np.log(x)


def sin(x):
    if isinstance(x, Jet2):
        s, c = sin(x.f), cos(x.f)
        return x.chain(s, c, -1.0 * s)
    if isinstance(x, Jet):
        return x.chain(sin(x.f), cos(x.f))
    if isinstance(x, Var):
        xv = x.value
        return x._unary(np.sin(xv), lambda g: g * np.cos(xv))
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet2):
        s, c = sin(x.f), cos(x.f)
        return x.chain(c, -1.0 * s, -1.0 * c)
    if isinstance(x, Jet):
        return x.chain(cos(x.f), -1.0 * sin(x.f))
    if isinstance(x, Var):
        xv = x.value
        return x._unary(np.cos(xv), lambda g: -g * np.sin(xv))
    return np.cos(x)


def sqrt(x):
    v = raw(x)
    if isinstance(x, (Jet, Jet2, Var)):
        if np.any(np.asarray(v) <= 0.0):
            raise NumericDomainError(
                "sqrt", "differentiable sqrt requires positive argument"
            )
    elif np.any(np.asarray(v) < 0.0):
        raise NumericDomainError("sqrt", "sqrt of negative value")
    if isinstance(x, Jet2):
        s = sqrt(x.f)
        return x.chain(s, 0.5 / s, -0.25 / (s * x.f))
    if isinstance(x, Jet):
        s = sqrt(x.f)
        return x.chain(s, 0.5 / s)
    if isinstance(x, Var):
        s = np.sqrt(x.value)
        return x._unary(s, lambda g: g * 0.5 / s)
    return np.sqrt(x)


def relu(x):
    """max(0, x); the derivative at exactly 0 is defined as 0."""
    mask = np.asarray(raw(x)) > 0.0
    m = mask.astype(float) if mask.ndim else float(mask)
    if isinstance(x, Jet2):
        return Jet2(x.f * m, [a * m for a in x.d], [a * m for a in x.h])
    if isinstance(x, Jet):
        return Jet(x.f * m, [a * m for a in x.d])
    if isinstance(x, Var):
        return x._unary(x.value * m, lambda g: g * m)
    return x * m


# -- reductions and structured ops ---------------------------------------


def sum_all(x):
    """Sum all elements of an array-valued scalar to a plain scalar."""
    if isinstance(x, Jet):
        return Jet(sum_all(x.f), [sum_all(a) for a in x.d])
    if isinstance(x, Jet2):
        return Jet2(
            sum_all(x.f), [sum_all(a) for a in x.d], [sum_all(a) for a in x.h]
        )
    if isinstance(x, Var):
        shape = np.shape(x.value)
        if shape == ():
            return x
        return x._unary(float(np.sum(x.value)), lambda g: g * np.ones(shape))
    return float(np.sum(x)) if isinstance(x, np.ndarray) else x


def sum_last(x):
    """Sum over the trailing axis of an array-valued scalar."""
    if isinstance(x, Jet):
        return Jet(sum_last(x.f), [sum_last(a) for a in x.d])
    if isinstance(x, Jet2):
        return Jet2(
            sum_last(x.f), [sum_last(a) for a in x.d], [sum_last(a) for a in x.h]
        )
    if isinstance(x, Var):
        xv = x.value
        if np.ndim(xv) == 0:
            return x
        n = xv.shape[-1]
        val = np.sum(xv, axis=-1)
        out = float(val) if np.ndim(val) == 0 else val
        return x._unary(
            out, lambda g: np.repeat(np.expand_dims(np.asarray(g), -1), n, axis=-1)
        )
    if np.ndim(x) == 0:
        return x
    v = np.sum(x, axis=-1)
    return float(v) if np.ndim(v) == 0 else v


def vecnorm(xs):
    """Euclidean norm of a sequence of scalars.

    At the origin the subgradient 0 is returned (one-sided penalty intent).
    """
    xs = list(xs)
    if any(isinstance(x, (Jet, Jet2)) for x in xs):
        s = None
        for x in xs:
            sq = x * x
            s = sq if s is None else s + sq
        return sqrt(s)
    vals = [raw(x) for x in xs]
    sq = None
    for v in vals:
        sq = v * v if sq is None else sq + v * v
    nv = np.sqrt(sq)
    vars_ = [(i, x) for i, x in enumerate(xs) if isinstance(x, Var)]
    if not vars_:
        return float(nv) if np.ndim(nv) == 0 else nv
    tape = vars_[0][1].tape
    safe = np.where(np.asarray(nv) > 0.0, nv, 1.0)
    if np.ndim(nv) == 0:
        safe = float(safe)
    parents = []
    for i, x in vars_:
        vi = vals[i]
        shape = np.shape(x.value)
        parents.append(
            (x.index, lambda g, vi=vi, shape=shape: _unbroadcast(g * vi / safe, shape))
        )
    out = float(nv) if np.ndim(nv) == 0 else nv
    return tape.node(out, tuple(parents))


def expand_last(x):
    """Append a trailing axis (floats pass through unchanged)."""
    if isinstance(x, Jet):
        return Jet(expand_last(x.f), [expand_last(a) for a in x.d])
    if isinstance(x, Jet2):
        return Jet2(
            expand_last(x.f),
            [expand_last(a) for a in x.d],
            [expand_last(a) for a in x.h],
        )
    if isinstance(x, Var):
        xv = x.value
        if np.ndim(xv) == 0:
            return x
        return x._unary(xv[..., None], lambda g: np.asarray(g)[..., 0])
    if isinstance(x, np.ndarray):
        return x[..., None]
    return x


def take_last(x, i):
    """Index the trailing axis, dropping it."""
    if isinstance(x, Jet):
        return Jet(take_last(x.f, i), [take_last(a, i) for a in x.d])
    if isinstance(x, Jet2):
        return Jet2(
            take_last(x.f, i),
            [take_last(a, i) for a in x.d],
            [take_last(a, i) for a in x.h],
        )
    if isinstance(x, Var):
        xv = x.value
        if np.ndim(xv) == 0:
            return x
        shape = xv.shape
        val = xv[..., i]
        out = float(val) if np.ndim(val) == 0 else val

        def vjp(g):
            z = np.zeros(shape)
            z[..., i] = g
            return z

        return x._unary(out, vjp)
    if isinstance(x, np.ndarray) and x.ndim > 0:
        v = x[..., i]
        return float(v) if np.ndim(v) == 0 else v
    return x


def col(W, i):
    """Column i of a 2-d parameter matrix."""
    if isinstance(W, Var):
        Wv = W.value
        shape = Wv.shape

        def vjp(g):
            z = np.zeros(shape)
            z[:, i] = g
            return z

        return W._unary(Wv[:, i].copy(), vjp)
    return np.asarray(W)[:, i]


def _mv(Wv, xv):
    if np.ndim(xv) == 0:
        return Wv.sum(axis=1) * xv
    return xv @ Wv.T


def matvec(W, x):
    """Affine-map core: x with trailing axis of size in -> trailing axis out.

    W is constant with respect to the jet seed directions (it is a parameter,
    not a state); a scalar x is treated as x times the all-ones vector.
    """
    if isinstance(W, (Jet, Jet2)):
        raise StructuralError("matvec weight cannot carry jet seeds")
    if isinstance(x, Jet):
        return Jet(matvec(W, x.f), [matvec(W, a) for a in x.d])
    if isinstance(x, Jet2):
        return Jet2(
            matvec(W, x.f),
            [matvec(W, a) for a in x.d],
            [matvec(W, a) for a in x.h],
        )
    Wv = W.value if isinstance(W, Var) else np.asarray(W)
    xv = x.value if isinstance(x, Var) else x
    val = _mv(Wv, xv)
    if not isinstance(W, Var) and not isinstance(x, Var):
        return val
    tape = W.tape if isinstance(W, Var) else x.tape
    parents = []
    if isinstance(x, Var):

        def vjp_x(g):
            if np.ndim(xv) == 0:
                return float(np.sum(np.asarray(g) * Wv.sum(axis=1)))
            return np.asarray(g) @ Wv

        parents.append((x.index, vjp_x))
    if isinstance(W, Var):
        out_dim, in_dim = Wv.shape

        def vjp_w(g):
            g = np.asarray(g)
            if np.ndim(xv) == 0:
                gt = g.reshape(-1, out_dim).sum(axis=0)
                return np.outer(gt, np.ones(in_dim)) * xv
            g2 = g.reshape(-1, out_dim)
            x2 = np.asarray(xv).reshape(-1, in_dim)
            return g2.T @ x2

        parents.append((W.index, vjp_w))
    return tape.node(val, tuple(parents))


def min_eig_sym(entries, warnings=None):
    """Smallest eigenvalue of a symmetric matrix of scalars.

    The derivative uses the selected unit eigenvector v: d(lambda_min) =
    v^T dS v.  A nearly repeated smallest eigenvalue (gap below 1e-8) is
    flagged as degenerate and the rule degrades to a subgradient.
    """
    n = len(entries)
    M = np.array([[float(raw(entries[i][j])) for j in range(n)] for i in range(n)])
    spectrum = linalg.symmetric_eig(0.5 * (M + M.T), sym_tol=1e-6)
    lam = float(spectrum.eigenvalues[0])
    v = spectrum.eigenvectors[:, 0]
    if n > 1 and spectrum.eigenvalues[1] - spectrum.eigenvalues[0] < DEGENERATE_EIG_GAP:
        msg = (
            "min_eig_sym: nearly repeated smallest eigenvalue "
            f"(gap={spectrum.eigenvalues[1] - spectrum.eigenvalues[0]:.3e}); "
            "subgradient returned"
        )
        if warnings is not None:
            warnings.append(msg)
        for row in entries:
            for e in row:
                if isinstance(e, Var):
                    e.tape.warnings.append(msg)
                    break
            else:
                continue
            break
    parents = []
    tape = None
    seen = set()
    for i in range(n):
        for j in range(n):
            e = entries[i][j]
            if isinstance(e, Var):
                tape = e.tape
                key = (id(e), i, j)
                if key in seen:
                    continue
                seen.add(key)
                parents.append((e.index, lambda g, c=v[i] * v[j]: g * c))
    if tape is None:
        return lam
    return tape.node(lam, tuple(parents))
