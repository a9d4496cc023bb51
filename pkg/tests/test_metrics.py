import math

import numpy as np
import pytest

from phasegrid import (MetricError, Network, circular_variance,
                       condensation_index, cosine, cosine_matrix,
                       relative_change, top_rows_by_norm)
from phasegrid.metrics import scatter_w1


class TestRelativeChange:
    def test_no_change_is_zero(self):
        W = np.arange(6.0).reshape(2, 3) + 1
        assert relative_change(W, W) == 0.0

    def test_from_zero_init_is_one(self):
        assert relative_change(np.zeros(3), np.array([1.0, 2.0, 2.0])) == 1.0

    def test_known_value(self):
        # init (1,0) -> final (0,1): ||diff|| = sqrt(2), ||final|| = 1
        got = relative_change(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        assert got == pytest.approx(math.sqrt(2.0), rel=1e-15)

    def test_zero_final_rejected(self):
        with pytest.raises(MetricError):
            relative_change(np.ones(3), np.zeros(3))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(MetricError):
            relative_change(np.ones(3), np.ones(4))

    def test_orthogonal_invariance(self):
        rng = np.random.default_rng(0)
        v0, v1 = rng.standard_normal(20), rng.standard_normal(20)
        Q, _ = np.linalg.qr(rng.standard_normal((20, 20)))
        assert relative_change(Q @ v0, Q @ v1) == pytest.approx(
            relative_change(v0, v1), rel=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(1)
        v0, v1 = rng.standard_normal(9), rng.standard_normal(9)
        assert relative_change(7.5 * v0, 7.5 * v1) == pytest.approx(
            relative_change(v0, v1), rel=1e-12)


class TestCosine:
    def test_parallel(self):
        u = np.array([1.0, 2.0, -1.0])
        assert cosine(u, 3.0 * u) == pytest.approx(1.0, abs=1e-15)

    def test_antiparallel(self):
        u = np.array([1.0, 2.0, -1.0])
        assert cosine(u, -u) == pytest.approx(-1.0, abs=1e-15)

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 5.0])) == 0.0

    def test_zero_vector_rejected(self):
        with pytest.raises(MetricError):
            cosine(np.zeros(2), np.ones(2))

    def test_bounds_random(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            c = cosine(rng.standard_normal(5), rng.standard_normal(5))
            assert -1.0 <= c <= 1.0


class TestTopRows:
    def test_selects_largest_half(self):
        W = np.diag([1.0, 4.0, 2.0, 3.0])
        idx = top_rows_by_norm(W, 0.5)
        assert list(idx) == [1, 3]

    def test_ceil_on_odd_count(self):
        W = np.eye(5)
        assert len(top_rows_by_norm(W, 0.5)) == 3

    def test_tie_break_deterministic(self):
        W = np.ones((4, 2))
        assert list(top_rows_by_norm(W, 0.5)) == [0, 1]

    def test_bad_fraction(self):
        with pytest.raises(MetricError):
            top_rows_by_norm(np.eye(2), 0.0)


class TestCosineMatrix:
    def test_identical_rows_all_ones(self):
        W = np.tile(np.array([1.0, -2.0, 0.5]), (6, 1))
        mat = cosine_matrix(W)
        np.testing.assert_allclose(mat, np.ones((3, 3)), atol=1e-15)

    def test_orthogonal_rows(self):
        W = np.vstack([10 * np.eye(2), 0.01 * np.ones((2, 2))])
        mat = cosine_matrix(W, fraction=0.5)
        np.testing.assert_allclose(mat, np.eye(2), atol=1e-15)

    def test_symmetric_unit_diagonal_bounded(self):
        W = np.random.default_rng(3).standard_normal((20, 7))
        mat = cosine_matrix(W)
        np.testing.assert_allclose(mat, mat.T, atol=1e-14)
        np.testing.assert_allclose(np.diag(mat), 1.0, atol=1e-14)
        assert np.all(mat >= -1.0) and np.all(mat <= 1.0)

    def test_zero_selected_row_rejected(self):
        with pytest.raises(MetricError):
            cosine_matrix(np.zeros((4, 3)))


class TestCondensationIndex:
    def test_parallel_rows_give_one(self):
        base = np.array([0.3, -1.0, 2.0])
        W = np.vstack([2 * base, -base, 0.5 * base, base])
        assert condensation_index(W) == pytest.approx(1.0, abs=1e-14)

    def test_two_orthogonal_top_rows_give_half(self):
        W = np.vstack([10 * np.eye(2), 0.01 * np.ones((2, 2))])
        assert condensation_index(W) == pytest.approx(0.5, abs=1e-14)

    def test_random_gaussian_is_small(self):
        W = np.random.default_rng(4).standard_normal((1000, 1001))
        assert condensation_index(W) < 0.1

    def test_bounds(self):
        W = np.random.default_rng(5).standard_normal((30, 8))
        assert 0.0 < condensation_index(W) <= 1.0

    def test_needs_two_rows(self):
        with pytest.raises(MetricError):
            condensation_index(np.ones((1, 4)))

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(6)
        W = rng.standard_normal((40, 9))
        perm = rng.permutation(40)
        assert condensation_index(W[perm]) == pytest.approx(
            condensation_index(W), rel=1e-12)

    def test_row_sign_invariance(self):
        rng = np.random.default_rng(7)
        W = rng.standard_normal((12, 5))
        signs = np.where(rng.random(12) < 0.5, -1.0, 1.0)
        assert condensation_index(signs[:, None] * W) == pytest.approx(
            condensation_index(W), rel=1e-12)

    def test_global_scale_invariance(self):
        W = np.random.default_rng(8).standard_normal((16, 4))
        assert condensation_index(3.7 * W) == pytest.approx(
            condensation_index(W), rel=1e-12)


class TestCircularVariance:
    def test_concentrated_near_zero(self):
        pts = np.tile(np.array([2.0, 1.0]), (50, 1))
        assert circular_variance(pts) == pytest.approx(0.0, abs=1e-14)

    def test_uniform_angles_near_one(self):
        ang = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        pts = np.column_stack([np.cos(ang), np.sin(ang)])
        assert circular_variance(pts) == pytest.approx(1.0, abs=1e-12)

    def test_radius_independent(self):
        rng = np.random.default_rng(9)
        ang = rng.uniform(0, 2 * np.pi, 30)
        unit = np.column_stack([np.cos(ang), np.sin(ang)])
        scaled = unit * rng.uniform(0.1, 10.0, 30)[:, None]
        assert circular_variance(scaled) == pytest.approx(
            circular_variance(unit), rel=1e-12)

    def test_ignores_origin_points(self):
        pts = np.array([[1.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
        assert circular_variance(pts) == pytest.approx(0.0, abs=1e-14)

    def test_all_origin_rejected(self):
        with pytest.raises(MetricError):
            circular_variance(np.zeros((3, 2)))

    def test_bounds(self):
        pts = np.random.default_rng(10).standard_normal((200, 2))
        assert 0.0 <= circular_variance(pts) <= 1.0 + 1e-12

    def test_axial_identifies_sign_flips(self):
        pts = np.array([[2.0, 1.0], [-2.0, -1.0], [4.0, 2.0]])
        assert circular_variance(pts, axial=True) == pytest.approx(0.0, abs=1e-14)
        assert circular_variance(pts) > 0.5

    def test_axial_orthogonal_pair_maximal(self):
        pts = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert circular_variance(pts, axial=True) == pytest.approx(1.0, abs=1e-12)

    def test_axial_requires_2d(self):
        with pytest.raises(MetricError):
            circular_variance(np.eye(3), axial=True)


def test_scatter_w1_returns_copy():
    net = Network(np.ones((3, 2)), np.zeros((3, 4)), np.ones((1, 3)), 1.0)
    pts = scatter_w1(net)
    assert pts.shape == (3, 2)
    pts[0, 0] = 99.0
    assert net.W1[0, 0] == 1.0
