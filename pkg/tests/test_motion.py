"""
Tests for motion propagation and the constrained local polynomial smoother.
"""

import math

import numpy as np
import pytest

from xraim.config import FilterConfig
from xraim.models import EnuPoint, Infrastructure, MotionSample
from xraim.motion import (
    KinematicState,
    SubsetTrackStore,
    backfill_track,
    fit_constrained_poly,
    kernel_weights,
    poly_objective,
    propagate_state,
    rotation_matrix,
)

from .conftest import make_estimate

pytestmark = pytest.mark.motion

DELTAS = np.arange(-6.0, 1.0)


def quadratic_track(deltas=DELTAS):
    east = 1.0 + 2.0 * deltas + 0.5 * deltas ** 2
    north = 3.0 - deltas
    return np.column_stack([east, north, np.zeros_like(deltas)])


class TestPropagation:
    """Body-frame motion mapped into ENU."""

    def test_rotation_is_orthonormal(self):
        rotation = rotation_matrix((0.1, -0.2, 2.0))
        np.testing.assert_allclose(rotation @ rotation.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(rotation) == pytest.approx(1.0)

    def test_heading_north_keeps_forward_north(self):
        np.testing.assert_allclose(rotation_matrix((0.0, 0.0, 0.0)) @ [0.0, 1.0, 0.0], [0.0, 1.0, 0.0])

    def test_heading_east_maps_forward_to_east(self):
        forward = rotation_matrix((0.0, 0.0, math.pi / 2.0)) @ [0.0, 1.0, 0.0]
        np.testing.assert_allclose(forward, [1.0, 0.0, 0.0], atol=1e-12)

    def test_constant_acceleration(self):
        state = KinematicState(position=EnuPoint(east=0.0, north=0.0), velocity=(0.0, 2.0, 0.0),
                               acceleration=(0.0, 1.0, 0.0))
        position, velocity = propagate_state(state, dt=2.0)
        assert position.north == pytest.approx(6.0)
        assert position.east == pytest.approx(0.0)
        np.testing.assert_allclose(velocity, [0.0, 4.0, 0.0])

    def test_from_motion(self):
        sample = MotionSample(time=0, velocity=(0.0, 1.4, 0.0), orientation=(0.0, 0.0, math.pi / 2.0))
        position, _ = propagate_state(KinematicState.from_motion(EnuPoint(east=10.0, north=0.0), sample))
        assert position.east == pytest.approx(11.4)
        assert position.north == pytest.approx(0.0, abs=1e-12)


class TestConstrainedFit:
    """Kernel-weighted polynomial fit with the motion ball constraint."""

    def test_exact_polynomial_is_reproduced(self):
        fit = fit_constrained_poly(DELTAS, quadratic_track(), order=2)
        np.testing.assert_allclose(fit.smoothed.as_array(), [1.0, 3.0, 0.0], atol=1e-9)
        assert fit.objective == pytest.approx(0.0, abs=1e-12)
        assert not fit.constrained

    def test_satisfied_constraint_is_inactive(self):
        free = fit_constrained_poly(DELTAS, quadratic_track(), order=2)
        fit = fit_constrained_poly(DELTAS, quadratic_track(), constraint=EnuPoint(east=1.5, north=3.0), epsilon=1.0)
        assert not fit.constrained
        np.testing.assert_allclose(fit.coefficients, free.coefficients)

    def test_active_constraint_lands_on_the_ball(self):
        target = EnuPoint(east=100.0, north=0.0)
        fit = fit_constrained_poly(DELTAS, quadratic_track(), constraint=target, epsilon=1.0)
        assert fit.constrained
        assert fit.smoothed.distance_to(target) == pytest.approx(1.0, abs=1e-9)

    def test_constrained_fit_is_optimal(self):
        rng = np.random.default_rng(0)
        positions = quadratic_track() + rng.normal(0.0, 0.5, size=(len(DELTAS), 3))
        target = EnuPoint(east=6.0, north=1.0)
        epsilon = 2.0
        fit = fit_constrained_poly(DELTAS, positions, constraint=target, epsilon=epsilon, kernel_decay=0.3)
        assert fit.constrained
        assert np.linalg.norm(fit.coefficients[0] - target.as_array()) <= epsilon + 1e-9
        assert poly_objective(fit.coefficients, DELTAS, positions, 0.3) == pytest.approx(fit.objective)

        feasible = 0
        for _ in range(300):
            candidate = fit.coefficients + rng.normal(0.0, 0.3, size=fit.coefficients.shape)
            if np.linalg.norm(candidate[0] - target.as_array()) > epsilon:
                continue
            feasible += 1
            assert poly_objective(candidate, DELTAS, positions, 0.3) >= fit.objective - 1e-9
        assert feasible > 0

    @pytest.mark.parametrize("seed", range(5))
    def test_objective_hessian_is_positive_definite(self, seed):
        rng = np.random.default_rng(seed)
        window = int(rng.integers(4, 16))
        order = int(rng.integers(1, 3))
        deltas = np.arange(-(window - 1), 1, dtype=float)
        design = np.column_stack([deltas ** k for k in range(order + 1)])
        weights = kernel_weights(deltas, float(rng.uniform(0.05, 0.5)))
        hessian = design.T @ (weights[:, None] * design)
        assert np.all(np.linalg.eigvalsh(hessian) > 0.0)
        np.linalg.cholesky(hessian)

    def test_zero_tolerance_pins_the_intercept(self):
        target = EnuPoint(east=4.0, north=4.0)
        fit = fit_constrained_poly(DELTAS, quadratic_track(), constraint=target, epsilon=0.0)
        np.testing.assert_allclose(fit.smoothed.as_array(), target.as_array(), atol=1e-12)

    def test_too_few_points_fall_back(self):
        positions = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        fit = fit_constrained_poly([-1.0, 0.0], positions, order=2)
        assert fit.fallback
        assert fit.coefficients is None
        assert fit.smoothed.as_array() == pytest.approx([1.0, 0.0, 0.0])


class TestTrackStore:
    """Per-subset histories and smoothing of new estimates."""

    def test_backfill_uses_verified_positions(self):
        track = {0: np.array([0.0, 0.0, 0.0]), 2000: np.array([2.0, 0.0, 0.0])}
        verified = {1000: EnuPoint(east=1.0, north=0.0)}
        points = backfill_track(track, verified, window_times=[0, 1000, 2000, 3000])
        assert [point.time for point in points] == [0, 1000, 2000]
        assert [point.filled for point in points] == [False, True, False]

    def test_first_estimate_falls_back(self):
        store = SubsetTrackStore(FilterConfig(window=5, order=2))
        estimate = make_estimate([1.0, 2.0, 0.0], sigma=1.5)
        smoothed = store.update(estimate, window_times=[0], verified={})
        assert not smoothed.filtered
        assert smoothed.diagnostics["filter"] == "fallback"
        assert smoothed.uncertainty == pytest.approx((3.0, 3.0, 3.0))

    def test_linear_track_is_smoothed_exactly(self):
        store = SubsetTrackStore(FilterConfig(window=5, order=2), sigma_min=0.5)
        times = [0, 1000, 2000, 3000, 4000]
        smoothed = None
        for k, time in enumerate(times):
            estimate = make_estimate([float(k), 0.0, 0.0], sigma=0.2)
            smoothed = store.update(estimate, window_times=times[: k + 1], verified={})
        assert smoothed.filtered
        np.testing.assert_allclose(smoothed.position.as_array(), [4.0, 0.0, 0.0], atol=1e-9)
        assert smoothed.uncertainty == pytest.approx((0.5, 0.5, 0.5))
        assert len(store) == 1

    def test_solver_uncertainty_survives_an_exact_fit(self):
        store = SubsetTrackStore(FilterConfig(window=5, order=2), sigma_min=0.5)
        times = [0, 1000, 2000, 3000, 4000]
        smoothed = None
        for k, time in enumerate(times):
            estimate = make_estimate([float(k), 0.0, 0.0], sigma=12.0, infrastructure=Infrastructure.GNSS)
            smoothed = store.update(estimate, window_times=times[: k + 1], verified={})
        assert smoothed.filtered
        assert smoothed.uncertainty == pytest.approx((12.0, 12.0, 12.0))

    def test_noisy_fit_raises_a_small_solver_uncertainty(self):
        store = SubsetTrackStore(FilterConfig(window=7, order=1), sigma_min=0.1)
        times = [1000 * k for k in range(7)]
        smoothed = None
        for k, time in enumerate(times):
            estimate = make_estimate([float(k) + 5.0 * (-1) ** k, 0.0, 0.0], sigma=0.2)
            smoothed = store.update(estimate, window_times=times[: k + 1], verified={})
        assert smoothed.filtered
        assert smoothed.uncertainty[0] > 0.2
        assert smoothed.uncertainty[1] == pytest.approx(0.2)

    def test_prune_drops_stale_tracks(self):
        store = SubsetTrackStore(FilterConfig(window=3, order=1))
        estimate = make_estimate([0.0, 0.0, 0.0])
        store.record(estimate.spec.key, 0, estimate.position)
        store.prune([5000, 6000, 7000])
        assert len(store) == 0
