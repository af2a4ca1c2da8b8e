import numpy as np
import pytest

from casimirctl import linalg
from casimirctl.errors import StructuralError


def test_identity_spectrum():
    spec = linalg.symmetric_eig(np.eye(3))
    assert np.allclose(spec.eigenvalues, [1.0, 1.0, 1.0])


def test_diagonal_sorted_ascending():
    spec = linalg.symmetric_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(spec.eigenvalues, [1.0, 2.0, 3.0])


def _bisect_root(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if flo * fm <= 0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def test_random_symmetric_vs_bisection_oracle():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(4, 4))
    S = 0.5 * (A + A.T)
    spec = linalg.symmetric_eig(S)

    def charpoly(lam):
        return float(np.linalg.det(S - lam * np.eye(4)))

    # refine each reported eigenvalue independently by bisection on det
    for lam in spec.eigenvalues:
        lo, hi = lam - 1e-3, lam + 1e-3
        assert charpoly(lo) * charpoly(hi) <= 0, "no sign change near eigenvalue"
        root = _bisect_root(charpoly, lo, hi)
        assert abs(root - lam) <= 1e-8


def test_spectrum_invariants_random():
    rng = np.random.default_rng(11)
    for n in (2, 3, 5, 8):
        A = rng.normal(size=(n, n))
        S = 0.5 * (A + A.T)
        spec = linalg.symmetric_eig(S)
        V = spec.eigenvectors
        lam = spec.eigenvalues
        scale = max(1.0, float(np.linalg.norm(S)))
        for i in range(n):
            assert np.linalg.norm(S @ V[:, i] - lam[i] * V[:, i]) <= 1e-10 * scale
        assert np.linalg.norm(V.T @ V - np.eye(n)) <= 1e-10
        # reconstruction
        R = V @ np.diag(lam) @ V.T
        assert np.linalg.norm(R - S) <= 1e-9 * scale


def test_psd_min_eigenvalue_floor():
    rng = np.random.default_rng(3)
    B = rng.normal(size=(5, 5))
    S = B @ B.T
    spec = linalg.symmetric_eig(S)
    assert spec.eigenvalues[0] >= -1e-10 * np.linalg.norm(S)


def test_asymmetric_rejected():
    with pytest.raises(StructuralError):
        linalg.symmetric_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_nonsquare_rejected():
    with pytest.raises(StructuralError):
        linalg.symmetric_eig(np.zeros((2, 3)))


PENDULUM_J_CL = np.array(
    [[0.0, 1.0, 0.0], [-1.0, 0.0, -1.0], [0.0, 1.0, 0.0]]
)


def test_kernel_pendulum_loop():
    vecs = linalg.kernel_basis(PENDULUM_J_CL, tol=1e-9)
    assert len(vecs) == 1
    v = vecs[0]
    target = np.array([1.0, 0.0, -1.0]) / np.sqrt(2.0)
    # proportional up to sign
    assert min(np.linalg.norm(v - target), np.linalg.norm(v + target)) <= 1e-10


def test_kernel_identity_empty():
    assert linalg.kernel_basis(np.eye(4), tol=1e-9) == []


def test_kernel_zero_full():
    vecs = linalg.kernel_basis(np.zeros((3, 3)), tol=1e-9)
    assert len(vecs) == 3
    V = np.array(vecs).T
    assert np.linalg.norm(V.T @ V - np.eye(3)) <= 1e-12


def test_intersect_pendulum_and_zero():
    vecs = linalg.intersect_kernels(PENDULUM_J_CL, np.zeros((3, 3)))
    assert len(vecs) == 1
    target = np.array([1.0, 0.0, -1.0]) / np.sqrt(2.0)
    v = vecs[0]
    assert min(np.linalg.norm(v - target), np.linalg.norm(v + target)) <= 1e-10


def test_intersect_identities_empty():
    assert linalg.intersect_kernels(np.eye(3), np.eye(3)) == []


def test_intersect_constructed_overlap():
    # ker A = span{e1, e2}: rows kill e3
    A = np.array([[0.0, 0.0, 1.0]])
    # ker B = span{e2, e3}: rows kill e1
    B = np.array([[1.0, 0.0, 0.0]])
    vecs = linalg.intersect_kernels(A, B)
    assert len(vecs) == 1
    e2 = np.array([0.0, 1.0, 0.0])
    assert min(np.linalg.norm(vecs[0] - e2), np.linalg.norm(vecs[0] + e2)) <= 1e-12
    # direct multiplication
    assert np.linalg.norm(A @ vecs[0]) <= 1e-12
    assert np.linalg.norm(B @ vecs[0]) <= 1e-12


def test_intersect_column_mismatch():
    with pytest.raises(StructuralError):
        linalg.intersect_kernels(np.zeros((2, 3)), np.zeros((2, 4)))


def test_kernel_residual_bound_random():
    rng = np.random.default_rng(5)
    # random rank-2 4x4 matrix
    U = rng.normal(size=(4, 2))
    W = rng.normal(size=(2, 4))
    M = U @ W
    vecs = linalg.kernel_basis(M, tol=1e-9)
    assert len(vecs) == 2
    scale = max(1.0, float(np.linalg.norm(M)))
    for v in vecs:
        assert np.linalg.norm(M @ v) <= 1e-9 * scale


def test_stacked_rerun_spans_same_subspace():
    rng = np.random.default_rng(9)
    U = rng.normal(size=(5, 2))
    W = rng.normal(size=(2, 5))
    M = U @ W
    first = np.array(linalg.kernel_basis(M, tol=1e-9)).T
    again = np.array(linalg.kernel_basis(np.vstack([M, M]), tol=1e-9)).T
    # mutual projection residual
    P1 = first @ first.T
    P2 = again @ again.T
    assert np.linalg.norm(P1 - P2) <= 1e-9
