"""Small dense linear algebra: symmetric eigendecomposition via cyclic Jacobi
rotations, nullspace computation via Gaussian elimination, and kernel
intersection.  Sized for state dimensions up to a few dozen."""

from dataclasses import dataclass

import numpy as np

from .errors import StructuralError

# Convergence threshold for the Jacobi sweep, relative to ||S||_F.
_JACOBI_TOL = 1e-12
_MAX_SWEEPS = 100


def as_matrix(a, name="matrix"):
    """Coerce to a 2-d float64 array, rejecting non-finite entries."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise StructuralError(f"{name} must be 2-dimensional, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise StructuralError(f"{name} contains non-finite entries")
    return m


@dataclass
class SymmetricSpectrum:
    """Full spectrum of a symmetric matrix.

    eigenvalues are sorted ascending; eigenvectors[:, i] pairs with
    eigenvalues[i] and carries a deterministic sign (largest-magnitude
    component positive).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _fix_signs(vectors):
    for i in range(vectors.shape[1]):
        col = vectors[:, i]
        k = int(np.argmax(np.abs(col)))
        if col[k] < 0:
            vectors[:, i] = -col
    return vectors


def symmetric_eig(S, sym_tol=1e-9):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations."""
    S = as_matrix(S, "S")
    n, m = S.shape
    if n != m:
        raise StructuralError(f"symmetric_eig requires a square matrix, got {n}x{m}")
    scale = max(1.0, float(np.linalg.norm(S)))
    if np.linalg.norm(S - S.T) > sym_tol * scale:
        raise StructuralError("matrix is not symmetric within tolerance")

    A = 0.5 * (S + S.T)
    V = np.eye(n)
    fnorm = np.linalg.norm(A)
    if fnorm == 0.0 or n == 1:
        return SymmetricSpectrum(np.diag(A).copy(), V)

    threshold = _JACOBI_TOL * fnorm
    for _ in range(_MAX_SWEEPS):
        off = np.sqrt(max(0.0, fnorm**2 - np.sum(np.diag(A) ** 2)))
        # recompute exactly; the identity above degrades as A diagonalizes
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= threshold / (n * n):
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/columns p and q
                rot = np.eye(2)
                Ap = A[p, :].copy()
                Aq = A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                A[p, q] = 0.0
                A[q, p] = 0.0
                Vp = V[:, p].copy()
                Vq = V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
        fnorm = np.linalg.norm(A)

    eigvals = np.diag(A).copy()
    order = np.argsort(eigvals, kind="stable")
    eigvals = eigvals[order]
    V = V[:, order]
    return SymmetricSpectrum(eigvals, _fix_signs(V))


def _rref(M, tol):
    """Reduced row echelon form with partial pivoting.

    Returns (R, pivot_columns).  ``tol`` is relative to the largest absolute
    entry of M.
    """
    R = M.astype(float).copy()
    rows, cols = R.shape
    scale = np.max(np.abs(R)) if R.size else 0.0
    if scale == 0.0:
        return R, []
    cutoff = tol * scale
    pivots = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        k = r + int(np.argmax(np.abs(R[r:, c])))
        if abs(R[k, c]) <= cutoff:
            continue
        if k != r:
            R[[r, k]] = R[[k, r]]
        R[r] = R[r] / R[r, c]
        for i in range(rows):
            if i != r and R[i, c] != 0.0:
                R[i] = R[i] - R[i, c] * R[r]
        pivots.append(c)
        r += 1
    return R, pivots


def _gram_schmidt(vectors):
    """Orthonormalize columns with re-orthogonalized modified Gram-Schmidt."""
    basis = []
    for v in vectors:
        w = v.astype(float).copy()
        for _ in range(2):  # second pass for numerical orthogonality
            for b in basis:
                w = w - np.dot(b, w) * b
        nrm = np.linalg.norm(w)
        if nrm > 1e-12 * max(1.0, np.linalg.norm(v)):
            basis.append(w / nrm)
    return basis


def kernel_basis(M, tol=1e-9):
    """Orthonormal basis of the nullspace of M.

    Gaussian elimination with partial pivoting followed by Gram-Schmidt;
    ``tol`` is the rank cutoff relative to the largest entry.  Empty list for
    a trivial kernel.
    """
    if tol <= 0:
        raise StructuralError("tol must be positive")
    M = as_matrix(M, "M")
    rows, cols = M.shape
    R, pivots = _rref(M, tol)
    free = [c for c in range(cols) if c not in pivots]
    raw = []
    for f in free:
        v = np.zeros(cols)
        v[f] = 1.0
        for i, p in enumerate(pivots):
            v[p] = -R[i, f]
        raw.append(v)
    return _gram_schmidt(raw)


def intersect_kernels(A, B, tol=1e-9):
    """Orthonormal basis of ker A ∩ ker B via the stacked matrix."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise StructuralError(
            f"column count mismatch: {A.shape[1]} vs {B.shape[1]}"
        )
    return kernel_basis(np.vstack([A, B]), tol)
