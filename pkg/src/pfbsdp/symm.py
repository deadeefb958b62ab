"""Dense symmetric-matrix kernels: vectorization, eigendecomposition, cone projection.

All operations are pure functions on ``float64`` arrays. Symmetric matrices are
plain ``(n, n)`` ndarrays whose symmetry is exact (bitwise); :func:`as_symmetric`
and :func:`mat` produce such arrays from arbitrary square input.
"""

import math

import numpy as np
from numba import njit

from .errors import ConvergenceFailure, DimensionMismatch, NonSquareLength

# Rotation budget of the cyclic Jacobi sweep, as a multiple of n^2.
JACOBI_BUDGET_FACTOR = 30
# Off-diagonal Frobenius norm target, relative to the input Frobenius norm.
JACOBI_OFF_TOL = 1e-12


def as_symmetric(a):
    """Return ``(a + a.T) / 2`` as a float64 array with exact symmetry.

    For already-symmetric input this is a bitwise no-op on the values.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return (a + a.T) / 2.0


def vec(x):
    """Stack the columns of a square matrix into a vector of length n^2."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {x.shape}")
    return x.reshape(-1, order="F").copy()


def mat(v):
    """Inverse of :func:`vec`, symmetrizing the reshaped matrix.

    Raises ``NonSquareLength`` when ``len(v)`` is not a perfect square. The
    symmetrization ``(M + M.T)/2`` absorbs floating-point asymmetry that
    iterate arithmetic may introduce; on ``vec`` output it is exact.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {v.shape}")
    n = math.isqrt(v.size)
    if n * n != v.size:
        raise NonSquareLength(f"length {v.size} is not a perfect square")
    m = v.reshape((n, n), order="F")
    return (m + m.T) / 2.0


def inner(x, y):
    """Trace inner product ``trace(X Y)`` of two symmetric matrices."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionMismatch(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(np.dot(x.ravel(), y.ravel()))


@njit(cache=True)
def _jacobi_kernel(a, v, off_tol, budget):  # pragma: no cover - compiled
    """Cyclic Jacobi sweeps on ``a`` in place, accumulating rotations in ``v``.

    Returns 1 when the off-diagonal Frobenius norm reached ``off_tol`` within
    ``budget`` rotations, else 0.
    """
    n = a.shape[0]
    # Entries below this cannot collectively push the off-norm above target.
    skip = off_tol / n if n > 0 else 0.0
    used = 0
    while True:
        off2 = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off2 += 2.0 * a[i, j] * a[i, j]
        if math.sqrt(off2) <= off_tol:
            return 1
        if used >= budget:
            return 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                if used >= budget:
                    return 0
                used += 1
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                app = a[p, p]
                aqq = a[q, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    if k != p and k != q:
                        akp = a[k, p]
                        akq = a[k, q]
                        a[k, p] = c * akp - s * akq
                        a[p, k] = a[k, p]
                        a[k, q] = s * akp + c * akq
                        a[q, k] = a[k, q]
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq


@njit(cache=True)
def _proj_core(a):  # pragma: no cover - compiled
    """Project symmetric ``a`` (overwritten) onto the PSD cone.

    Returns ``(status, p)`` with status 0 on sweep-budget exhaustion, 1 when
    the input is already PSD (``p`` is the diagonalized scratch, unused), and
    2 when ``p`` holds the projection.
    """
    n = a.shape[0]
    fro2 = 0.0
    for i in range(n):
        for j in range(n):
            fro2 += a[i, j] * a[i, j]
    v = np.eye(n)
    ok = _jacobi_kernel(a, v, JACOBI_OFF_TOL * math.sqrt(fro2), JACOBI_BUDGET_FACTOR * n * n)
    if ok == 0:
        return 0, a
    neg = False
    for i in range(n):
        if a[i, i] < 0.0:
            neg = True
            break
    if not neg:
        return 1, a
    p = np.zeros((n, n))
    for i in range(n):
        w = a[i, i]
        if w > 0.0:
            for r in range(n):
                vw = v[r, i] * w
                for c in range(r, n):
                    p[r, c] += vw * v[c, i]
    for r in range(n):
        for c in range(r + 1, n):
            p[c, r] = p[r, c]
    return 2, p


@njit(cache=True)
def _proj_vec_core(y, n):  # pragma: no cover - compiled
    """Projection of a column-stacked square matrix, staying in vector form."""
    a = np.empty((n, n))
    for j in range(n):
        for i in range(n):
            a[i, j] = 0.5 * (y[j * n + i] + y[i * n + j])
    s = a.copy()
    status, p = _proj_core(a)
    out = np.empty(n * n)
    if status == 1:
        for j in range(n):
            for i in range(n):
                out[j * n + i] = s[i, j]
    elif status == 2:
        for j in range(n):
            for i in range(n):
                out[j * n + i] = p[i, j]
    return status, out


@njit(cache=True)
def _proj_blocks_core(y, offsets, sizes):  # pragma: no cover - compiled
    out = np.empty_like(y)
    for k in range(sizes.size):
        lo = offsets[k]
        n = sizes[k]
        status, res = _proj_vec_core(y[lo:lo + n * n], n)
        if status == 0:
            return k, out
        out[lo:lo + n * n] = res
    return -1, out


def proj_psd_blocks(y, offsets, sizes):
    """Blockwise :func:`proj_psd_vec` over a stacked vector.

    ``offsets[k]`` is the start of block ``k`` and ``sizes[k]`` its matrix
    dimension (the block occupies ``sizes[k]**2`` entries). Bitwise identical
    to projecting each slice separately.
    """
    y = np.ascontiguousarray(y, dtype=float)
    fail, out = _proj_blocks_core(y, offsets, sizes)
    if fail >= 0:
        raise ConvergenceFailure(
            f"Jacobi sweep budget exhausted for block {fail} "
            f"({sizes[fail]}x{sizes[fail]})"
        )
    return out


def eigh(x):
    """Symmetric eigendecomposition via cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues in nondecreasing
    order and orthonormal eigenvector columns, so that
    ``V @ diag(w) @ V.T`` reconstructs the input. Deterministic for fixed
    input. Raises ``ConvergenceFailure`` if the off-diagonal norm does not
    fall below ``1e-12 * ||X||_F`` within ``30 * n**2`` rotations.
    """
    a = as_symmetric(x).copy()
    n = a.shape[0]
    if n == 1:
        return a.reshape(1).copy(), np.ones((1, 1))
    fro = float(np.linalg.norm(a))
    v = np.eye(n)
    ok = _jacobi_kernel(a, v, JACOBI_OFF_TOL * fro, JACOBI_BUDGET_FACTOR * n * n)
    if not ok:
        raise ConvergenceFailure(
            f"Jacobi sweep budget exhausted for a {n}x{n} matrix"
        )
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], np.ascontiguousarray(v[:, order])


def proj_psd(x):
    """Frobenius-norm projection onto the positive semidefinite cone.

    Computed from the Jacobi eigendecomposition with negative eigenvalues
    clipped to exactly zero. PSD input is returned unchanged.
    """
    s = as_symmetric(x)
    status, p = _proj_core(s.copy())
    if status == 0:
        raise ConvergenceFailure(
            f"Jacobi sweep budget exhausted for a {s.shape[0]}x{s.shape[0]} matrix"
        )
    return s if status == 1 else p


def proj_psd_vec(y):
    """``vec(proj_psd(mat(y)))`` without leaving vector form.

    This is the per-agent cone step of both solvers; the result is bitwise
    identical to composing :func:`mat`, :func:`proj_psd` and :func:`vec`.
    """
    y = np.asarray(y, dtype=float)
    n = math.isqrt(y.size)
    if n * n != y.size:
        raise NonSquareLength(f"length {y.size} is not a perfect square")
    status, out = _proj_vec_core(y, n)
    if status == 0:
        raise ConvergenceFailure(f"Jacobi sweep budget exhausted for a {n}x{n} matrix")
    return out
