import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp

from mvlandmark.errors import EmptyTrajectoryError, GapError, InvalidSpecError
from mvlandmark.smoothing import (
    LandmarkTrajectory,
    fill_gaps,
    sg_coefficients,
    smooth_positions,
    smooth_trajectory,
    smoothing_matrix,
)


def oracle_coefficients(M, P):
    """Centre row of pinv(V) from the Vandermonde normal equations, in 50-digit arithmetic."""
    mp.dps = 50
    V = mp.matrix([[mp.mpf(j) ** n for n in range(P + 1)] for j in range(-M, M + 1)])
    G = V.T * V
    coeffs = mp.lu_solve(G, mp.matrix([1] + [0] * P))
    return np.array([float(x) for x in (V * coeffs)])


def traj(positions, valid=None):
    positions = np.asarray(positions, dtype=float)
    return LandmarkTrajectory(0, positions, np.ones(len(positions), bool) if valid is None else valid)


def test_moving_average():
    np.testing.assert_allclose(sg_coefficients(1, 0).coefficients, [1 / 3] * 3, atol=1e-15)


def test_classic_five_point_quadratic():
    expected = np.array([-3, 12, 17, 12, -3]) / 35
    np.testing.assert_allclose(oracle_coefficients(2, 2), expected, atol=1e-15)
    np.testing.assert_allclose(sg_coefficients(2, 2).coefficients, expected, atol=1e-12)


@pytest.mark.parametrize("M", range(1, 11))
def test_filter_invariants_and_oracle(M):
    j = np.arange(-M, M + 1)
    for P in range(0, 2 * M + 1):
        beta = sg_coefficients(M, P).coefficients
        assert len(beta) == 2 * M + 1
        assert abs(beta.sum() - 1) < 1e-12
        if P >= 1:
            assert abs((j * beta).sum()) < 1e-12
        np.testing.assert_allclose(beta, oracle_coefficients(M, P), atol=1e-12)


def test_invalid_spec():
    with pytest.raises(InvalidSpecError):
        sg_coefficients(2, 5)
    with pytest.raises(InvalidSpecError):
        sg_coefficients(0, 0)


@pytest.mark.parametrize("M,P", [(1, 0), (2, 1), (3, 2), (5, 3), (4, 6)])
def test_constant_unchanged(M, P):
    x = np.tile([1.5, -2.0, 0.25], (30, 1))
    np.testing.assert_allclose(smooth_trajectory(traj(x), sg_coefficients(M, P)).positions, x, atol=1e-12)


@pytest.mark.parametrize("M,P,n", [(5, 3, 40), (2, 1, 7), (3, 2, 5), (5, 3, 3), (4, 4, 12), (2, 4, 20)])
def test_polynomial_reproduction_including_boundaries(M, P, n):
    rng = np.random.default_rng(M * 100 + P)
    t = np.arange(n) / n
    coeffs = rng.uniform(-2, 2, size=(P + 1, 3))
    x = sum(np.outer(t ** k, coeffs[k]) for k in range(P + 1))
    out = smooth_trajectory(traj(x), sg_coefficients(M, P)).positions
    np.testing.assert_allclose(out, x, atol=1e-10)


def test_linear_reproduction():
    t = np.arange(25)[:, None]
    x = np.array([1.0, 2.0, -1.0]) + 0.1 * t * np.array([0.5, -1.0, 2.0])
    np.testing.assert_allclose(smooth_trajectory(traj(x), sg_coefficients(5, 1)).positions, x, atol=1e-10)


def test_interior_matches_per_frame_polyfit():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((30, 3))
    out = smooth_positions(x, sg_coefficients(2, 2))
    for t in range(2, 28):
        for axis in range(3):
            fit = np.polyfit(np.arange(-2, 3), x[t - 2 : t + 3, axis], 2)
            assert out[t, axis] == pytest.approx(np.polyval(fit, 0.0), abs=1e-12)


def test_boundary_matches_polyfit_on_nearest_window():
    rng = np.random.default_rng(12)
    x = rng.standard_normal(20)
    out = smooth_positions(x[:, None], sg_coefficients(3, 2))[:, 0]
    for t in (0, 1, 2, 17, 18, 19):
        start = min(max(t - 3, 0), 20 - 7)
        frames = np.arange(start, start + 7)
        fit = np.polyfit(frames - t, x[frames], 2)
        assert out[t] == pytest.approx(np.polyval(fit, 0.0), abs=1e-12)


def test_coordinates_filtered_independently():
    rng = np.random.default_rng(13)
    x = rng.standard_normal((20, 3))
    spec = sg_coefficients(3, 2)
    joint = smooth_positions(x, spec)
    for axis in range(3):
        np.testing.assert_allclose(joint[:, axis], smooth_positions(x[:, axis], spec), atol=1e-14)


@settings(max_examples=50)
@given(st.integers(0, 10**6), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, 25, 3))
    spec = sg_coefficients(4, 3)
    lhs = smooth_positions(a * x + b * y, spec)
    rhs = a * smooth_positions(x, spec) + b * smooth_positions(y, spec)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_shift_equivariance_interior():
    rng = np.random.default_rng(14)
    x = rng.standard_normal((40, 3))
    spec = sg_coefficients(5, 3)
    a = smooth_positions(x, spec)
    b = smooth_positions(x[3:], spec)
    np.testing.assert_allclose(b[5:-5], a[8:-5], atol=1e-12)


def test_smoothing_matrix_matches_filter():
    rng = np.random.default_rng(15)
    x = rng.standard_normal((17, 3))
    spec = sg_coefficients(4, 3)
    np.testing.assert_allclose(smoothing_matrix(17, spec) @ x, smooth_positions(x, spec), atol=1e-12)


def test_jitter_reduction_over_seeds():
    t = np.linspace(0, 2 * np.pi, 80)
    truth = np.stack([np.sin(t), np.cos(t), 0.3 * t], axis=1)
    spec = sg_coefficients(5, 3)
    for seed in range(100):
        noisy = truth + np.random.default_rng(seed).normal(0, 0.05, truth.shape)
        before = np.linalg.norm(np.diff(noisy, axis=0), axis=1).mean()
        after = np.linalg.norm(np.diff(smooth_positions(noisy, spec), axis=0), axis=1).mean()
        assert after < before


def test_smooth_requires_filled_gaps():
    x = np.zeros((5, 3))
    with pytest.raises(GapError):
        smooth_trajectory(traj(x, np.array([1, 1, 0, 1, 1], bool)), sg_coefficients(1, 1))


def test_fill_midpoint():
    x = np.array([[0, 0, 0], [np.nan] * 3, [2, 2, 2]], dtype=float)
    out = fill_gaps(traj(x, np.array([True, False, True])))
    np.testing.assert_array_equal(out.positions[1], [1, 1, 1])
    assert out.valid.all()
    np.testing.assert_array_equal(out.synthesized, [False, True, False])


def test_fill_no_gaps_identity():
    x = np.random.default_rng(0).standard_normal((6, 3))
    out = fill_gaps(traj(x))
    np.testing.assert_array_equal(out.positions, x)
    assert not out.synthesized.any()


def test_fill_leading_and_trailing_replication():
    x = np.full((7, 3), np.nan)
    x[3] = [1, 2, 3]
    x[4] = [3, 2, 1]
    valid = np.array([0, 0, 0, 1, 1, 0, 0], bool)
    out = fill_gaps(traj(x, valid))
    np.testing.assert_array_equal(out.positions[:3], [[1, 2, 3]] * 3)
    np.testing.assert_array_equal(out.positions[5:], [[3, 2, 1]] * 2)
    np.testing.assert_array_equal(out.synthesized, ~valid)


def test_fill_empty():
    with pytest.raises(EmptyTrajectoryError):
        fill_gaps(traj(np.full((3, 3), np.nan), np.zeros(3, bool)))


def test_single_frame():
    x = np.array([[1.0, 2.0, 3.0]])
    np.testing.assert_array_equal(smooth_trajectory(traj(x), sg_coefficients(5, 3)).positions, x)
