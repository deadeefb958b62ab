import numpy as np
import pytest

from pfbsdp.errors import ConvergenceFailure, DimensionMismatch, NonSquareLength
from pfbsdp.symm import (
    as_symmetric,
    eigh,
    inner,
    mat,
    proj_psd,
    proj_psd_blocks,
    proj_psd_vec,
    vec,
)

from conftest import random_symmetric


def trace_product(x, y):
    """Independent double-loop evaluation of trace(X Y)."""
    n = x.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += x[i, j] * y[j, i]
    return total


class TestVecMat:
    def test_vec_column_stacking(self):
        x = np.array([[1.0, 2.0], [2.0, 3.0]])
        assert np.array_equal(vec(x), [1.0, 2.0, 2.0, 3.0])

    def test_vec_identity(self):
        assert np.array_equal(vec(np.eye(2)), [1.0, 0.0, 0.0, 1.0])

    def test_mat_inverts_vec(self):
        x = np.array([[1.0, 2.0], [2.0, 3.0]])
        assert np.array_equal(mat([1.0, 2.0, 2.0, 3.0]), x)

    def test_mat_symmetrizes(self):
        assert np.array_equal(
            mat([0.0, 1.0, 0.0, 0.0]), [[0.0, 0.5], [0.5, 0.0]]
        )

    def test_mat_rejects_non_square_length(self):
        with pytest.raises(NonSquareLength):
            mat([1.0, 2.0, 3.0])

    def test_bijective_on_symmetric(self):
        rng = np.random.default_rng(0)
        for n in (1, 2, 5, 9):
            x = random_symmetric(rng, n)
            assert np.array_equal(mat(vec(x)), x)

    def test_vec_requires_square(self):
        with pytest.raises(DimensionMismatch):
            vec(np.zeros((2, 3)))


class TestInner:
    def test_identity(self):
        assert inner(np.eye(2), np.eye(2)) == 2.0

    def test_zero(self):
        rng = np.random.default_rng(1)
        x = random_symmetric(rng, 3)
        assert inner(x, np.zeros((3, 3))) == 0.0

    def test_two_by_two(self):
        x = np.diag([1.0, 2.0])
        y = np.array([[3.0, 1.0], [1.0, 4.0]])
        assert inner(x, y) == pytest.approx(trace_product(x, y))
        assert inner(x, y) == pytest.approx(11.0)

    def test_matches_vec_dot(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = random_symmetric(rng, 6)
            y = random_symmetric(rng, 6)
            ref = trace_product(x, y)
            assert inner(x, y) == pytest.approx(ref, rel=1e-12, abs=1e-12)
            assert np.dot(vec(x), vec(y)) == pytest.approx(ref, rel=1e-12, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            inner(np.eye(2), np.eye(3))


class TestEigh:
    def test_diagonal(self):
        w, v = eigh(np.diag([3.0, 1.0]))
        assert np.allclose(w, [1.0, 3.0])
        assert np.allclose(np.abs(v), [[0.0, 1.0], [1.0, 0.0]])

    def test_known_spectrum(self):
        w, _ = eigh(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(w, [-1.0, 1.0])

    def test_trace_invariance(self):
        rng = np.random.default_rng(3)
        x = random_symmetric(rng, 5)
        w, _ = eigh(x)
        assert np.sum(w) == pytest.approx(np.trace(x), rel=1e-10)

    def test_reconstruction_and_orthonormality(self):
        rng = np.random.default_rng(4)
        for n in (1, 2, 3, 8, 20):
            x = random_symmetric(rng, n, scale=3.0)
            w, v = eigh(x)
            assert np.all(np.diff(w) >= 0.0)
            tol = 1e-10 * (1.0 + np.abs(w).max())
            assert np.abs((v * w) @ v.T - x).max() <= tol
            assert np.abs(v.T @ v - np.eye(n)).max() <= 1e-10

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        x = random_symmetric(rng, 7)
        w1, v1 = eigh(x)
        w2, v2 = eigh(x)
        assert np.array_equal(w1, w2)
        assert np.array_equal(v1, v2)

    def test_zero_matrix(self):
        w, v = eigh(np.zeros((3, 3)))
        assert np.array_equal(w, np.zeros(3))
        assert np.array_equal(v, np.eye(3))


class TestProjPsd:
    def test_clips_diagonal(self):
        assert np.array_equal(proj_psd(np.diag([1.0, -2.0])), np.diag([1.0, 0.0]))

    def test_psd_fixed_point_exact(self):
        x = np.array([[2.0, 1.0], [1.0, 2.0]])
        assert np.array_equal(proj_psd(x), x)

    def test_analytic_two_by_two(self):
        # spectrum (-1, 1); keeping the +1 eigenpair gives the all-half matrix
        x = np.array([[0.0, 1.0], [1.0, 0.0]])
        expected = 0.5 * np.ones((2, 2))
        assert np.abs(proj_psd(x) - expected).max() <= 1e-12

    def test_result_is_psd(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            x = random_symmetric(rng, 6, scale=2.0)
            p = proj_psd(x)
            w, _ = eigh(p)
            assert w[0] >= -1e-10 * (1.0 + np.linalg.norm(x))

    def test_idempotent(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            x = random_symmetric(rng, 5, scale=2.0)
            p = proj_psd(x)
            assert np.abs(proj_psd(p) - p).max() <= 1e-9

    def test_nonexpansive(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            x = random_symmetric(rng, 5)
            y = random_symmetric(rng, 5)
            lhs = np.linalg.norm(proj_psd(x) - proj_psd(y))
            assert lhs <= np.linalg.norm(x - y) + 1e-12

    def test_projection_optimality(self):
        rng = np.random.default_rng(9)
        x = random_symmetric(rng, 4, scale=2.0)
        p = proj_psd(x)
        best = np.linalg.norm(x - p)
        for _ in range(100):
            g = rng.standard_normal((4, 4))
            candidate = g @ g.T
            assert best <= np.linalg.norm(x - candidate) + 1e-12

    def test_all_negative_projects_to_zero(self):
        assert np.array_equal(proj_psd(-np.eye(3) - 1.0), np.zeros((3, 3)))


class TestVectorizedProjection:
    def test_matches_matrix_path_bitwise(self):
        rng = np.random.default_rng(10)
        for n in (1, 2, 5, 8):
            x = random_symmetric(rng, n)
            assert np.array_equal(proj_psd_vec(vec(x)), vec(proj_psd(x)))

    def test_blocks_match_per_slice(self):
        rng = np.random.default_rng(11)
        sizes = np.array([2, 3, 1], dtype=np.int64)
        offsets = np.array([0, 4, 13], dtype=np.int64)
        y = rng.standard_normal(14)
        out = proj_psd_blocks(y, offsets, sizes)
        for lo, n in zip(offsets, sizes):
            seg = slice(int(lo), int(lo) + int(n) ** 2)
            assert np.array_equal(out[seg], proj_psd_vec(y[seg]))

    def test_rejects_non_square_length(self):
        with pytest.raises(NonSquareLength):
            proj_psd_vec(np.zeros(3))


def test_as_symmetric_exact_noop_on_symmetric():
    rng = np.random.default_rng(12)
    x = random_symmetric(rng, 4)
    assert np.array_equal(as_symmetric(x), x)
