"""
Tests for the per-subset positioning solvers.
"""

import itertools
import math

import numpy as np
import pytest

from xraim.config import PathLossModel
from xraim.exceptions import InsufficientDataError, InvalidArgumentError, SingularGeometryError
from xraim.models import EnuPoint, FingerprintDb, FingerprintEntry
from xraim.solvers import (
    bancroft_fix,
    compute_dop,
    fingerprint_position,
    fingerprint_scores,
    gnss_design_matrix,
    planar_position_sigma,
    range_ls_objective,
    residual_consistent,
    rssi_to_range,
    rtt_to_range,
    solve_geoip,
    solve_gnss_ls,
    solve_range_ls,
    solve_weighted_ls,
    weighted_ls_objective,
)

pytestmark = pytest.mark.solvers

SKY = [(80.0, 0.0), (35.0, 40.0), (25.0, 130.0), (50.0, 200.0), (20.0, 290.0), (60.0, 320.0)]


def satellites(sky=SKY, distance=2.0e7) -> np.ndarray:
    rows = []
    for elevation, azimuth in sky:
        el, az = math.radians(elevation), math.radians(azimuth)
        rows.append([math.cos(el) * math.sin(az), math.cos(el) * math.cos(az), math.sin(el)])
    return distance * np.array(rows)


def pseudoranges(anchors, receiver, bias):
    receiver = np.asarray(receiver, dtype=float)
    return [(anchor, float(np.linalg.norm(anchor - receiver) + bias)) for anchor in anchors]


def ranges_to(anchors, receiver):
    receiver = np.asarray(receiver, dtype=float)
    return [(np.asarray(a, dtype=float), float(np.linalg.norm(np.asarray(a, dtype=float) - receiver)))
            for a in anchors]


class TestConversions:
    def test_rssi_to_range_at_reference(self):
        model = PathLossModel(reference_power_dbm=-40.0, exponent=2.0)
        assert rssi_to_range(-40.0, model) == pytest.approx(1.0)
        assert rssi_to_range(-60.0, model) == pytest.approx(10.0)

    def test_rtt_gamma_bounds(self):
        assert rtt_to_range(1000.0, 0.5) == 500.0
        with pytest.raises(InvalidArgumentError):
            rtt_to_range(1000.0, 0.0)


class TestGnss:
    """Pseudorange trilateration with a clock term."""

    def test_exact_pseudoranges(self):
        truth = [12.0, -7.0, 3.0]
        solution = solve_gnss_ls(pseudoranges(satellites(), truth, bias=35.0))
        np.testing.assert_allclose(solution.position.as_array(), truth, atol=1e-3)
        assert solution.clock_bias == pytest.approx(35.0, abs=1e-3)
        assert np.max(np.abs(solution.residuals)) < 1e-3

    def test_minimum_subset(self):
        truth = [0.0, 0.0, 0.0]
        solution = solve_gnss_ls(pseudoranges(satellites()[:4], truth, bias=0.0))
        np.testing.assert_allclose(solution.position.as_array(), truth, atol=1e-3)

    def test_too_few_pseudoranges(self):
        with pytest.raises(InsufficientDataError):
            solve_gnss_ls(pseudoranges(satellites()[:3], [0.0, 0.0, 0.0], 0.0))

    def test_coincident_satellites_are_singular(self):
        anchor = satellites()[0]
        with pytest.raises(SingularGeometryError):
            solve_gnss_ls([(anchor, 2.0e7)] * 4)

    def test_large_common_bias(self):
        truth = [250.0, -120.0, 15.0]
        solution = solve_gnss_ls(pseudoranges(satellites(), truth, bias=300.0))
        np.testing.assert_allclose(solution.position.as_array(), truth, atol=1e-3)
        assert solution.clock_bias == pytest.approx(300.0, abs=1e-3)

    @pytest.mark.parametrize("count", [4, 5, 6])
    def test_closed_form_fix_matches_truth(self, count):
        truth = np.array([40.0, 25.0, -8.0])
        measurements = pseudoranges(satellites()[:count], truth, bias=300.0)
        anchors = np.array([anchor for anchor, _ in measurements])
        ranges = np.array([value for _, value in measurements])
        state = bancroft_fix(anchors, ranges)
        assert state is not None
        np.testing.assert_allclose(state[:3], truth, atol=0.5)
        assert state[3] == pytest.approx(300.0, abs=0.5)

    def test_refinement_takes_over_when_gauss_newton_stalls(self):
        truth = [12.0, -7.0, 3.0]
        solution = solve_gnss_ls(
            pseudoranges(satellites(), truth, bias=35.0), max_iterations=1, initial=[3.0e5, -2.0e5, 1.0e4]
        )
        np.testing.assert_allclose(solution.position.as_array(), truth, atol=1e-3)
        assert solution.clock_bias == pytest.approx(35.0, abs=1e-3)
        assert solution.iterations > 1

    def test_dop_components(self):
        design, _ = gnss_design_matrix(satellites(), np.zeros(3))
        dop = compute_dop(design)
        assert dop.sigma_t > 0.0
        assert dop.spatial == pytest.approx(math.sqrt(dop.sigma_x ** 2 + dop.sigma_y ** 2 + dop.sigma_z ** 2))

    def test_more_satellites_never_increase_dop(self):
        design, _ = gnss_design_matrix(satellites(), np.zeros(3))
        assert compute_dop(design).spatial <= compute_dop(design[:5]).spatial + 1e-12

    def test_dop_rejects_bad_shape(self):
        with pytest.raises(InvalidArgumentError):
            compute_dop(np.ones((5, 2)))

    def test_dop_rejects_rank_deficiency(self):
        with pytest.raises(SingularGeometryError):
            compute_dop(np.ones((5, 4)))


class TestTerrestrialLeastSquares:
    """Range residual and inverse-square weighted least squares."""

    SQUARE = [[0.0, 0.0, 0.0], [100.0, 0.0, 0.0], [0.0, 100.0, 0.0], [100.0, 100.0, 0.0]]

    def test_range_ls_recovers_exact_position(self):
        solution = solve_range_ls(ranges_to(self.SQUARE, [30.0, 40.0, 0.0]))
        assert solution.position.east == pytest.approx(30.0, abs=1e-4)
        assert solution.position.north == pytest.approx(40.0, abs=1e-4)
        assert solution.residual < 1e-8
        assert not solution.degenerate

    def test_range_ls_is_local_minimum(self):
        measurements = [(a, r * 1.1) for a, r in ranges_to(self.SQUARE, [30.0, 40.0, 0.0])]
        solution = solve_range_ls(measurements)
        best = range_ls_objective(solution.position, measurements)
        for delta in ([0.5, 0.0], [0.0, 0.5], [-0.5, 0.3]):
            moved = solution.position.as_array() + np.array([*delta, 0.0])
            assert range_ls_objective(moved, measurements) >= best - 1e-12

    def test_weighted_ls_beats_a_grid(self):
        measurements = [(a, r) for a, r in zip(self.SQUARE, [30.0, 60.0, 45.0, 80.0])]
        solution = solve_weighted_ls(measurements)
        best = weighted_ls_objective(solution.position, measurements)
        center = solution.position.as_array()
        for de, dn in itertools.product(np.linspace(-20.0, 20.0, 21), repeat=2):
            assert weighted_ls_objective(center + np.array([de, dn, 0.0]), measurements) >= best - 1e-12

    def test_range_ls_beats_random_perturbations(self):
        rng = np.random.default_rng(11)
        exact = ranges_to(self.SQUARE, [35.0, 60.0, 0.0])
        measurements = [(a, r * f) for (a, r), f in zip(exact, [1.1, 0.9, 1.05, 1.0])]
        solution = solve_range_ls(measurements)
        best = range_ls_objective(solution.position, measurements)
        assert solution.residual == pytest.approx(best, rel=1e-9, abs=1e-15)
        for _ in range(500):
            moved = solution.position.as_array() + np.array([*rng.normal(0.0, 2.0, size=2), 0.0])
            assert range_ls_objective(moved, measurements) >= best - 1e-12

    def test_weighted_ls_is_inverse_square_centroid(self):
        measurements = [(a, r) for a, r in zip(self.SQUARE, [10.0, 50.0, 70.0, 90.0])]
        solution = solve_weighted_ls(measurements)
        weights = 1.0 / np.array([10.0, 50.0, 70.0, 90.0]) ** 2
        expected = (weights[:, None] * np.array(self.SQUARE)[:, :2]).sum(axis=0) / weights.sum()
        np.testing.assert_allclose(solution.position.as_array()[:2], expected, atol=1e-9)
        assert solution.residual == pytest.approx(weighted_ls_objective(solution.position, measurements))

    def test_collinear_anchors_are_degenerate(self):
        line = [[0.0, 0.0, 0.0], [50.0, 0.0, 0.0], [100.0, 0.0, 0.0]]
        solution = solve_weighted_ls(ranges_to(line, [40.0, 20.0, 0.0]))
        assert solution.degenerate

    def test_fixed_height(self):
        solution = solve_range_ls(ranges_to(self.SQUARE, [30.0, 40.0, 0.0]), fixed_up=0.0)
        assert solution.position.up == 0.0

    def test_too_few_ranges(self):
        with pytest.raises(InsufficientDataError):
            solve_range_ls(ranges_to(self.SQUARE[:2], [0.0, 0.0, 0.0]))

    def test_negative_range_rejected(self):
        with pytest.raises(InvalidArgumentError):
            solve_weighted_ls([(a, -1.0) for a in self.SQUARE])


class TestGeoip:
    """Circle intersection centroid."""

    def test_symmetric_circles(self):
        centers = [[1000.0, 0.0, 0.0], [-1000.0, 0.0, 0.0], [0.0, 1000.0, 0.0], [0.0, -1000.0, 0.0]]
        solution = solve_geoip([(c, 1100.0) for c in centers])
        assert solution.method == "geoip"
        assert abs(solution.position.east) < 1e-3
        assert abs(solution.position.north) < 1e-3
        assert solution.spread > 0.0

    def test_disjoint_circles_fall_back(self):
        centers = [[0.0, 0.0, 0.0], [1000.0, 0.0, 0.0], [0.0, 1000.0, 0.0]]
        solution = solve_geoip([(c, 10.0) for c in centers])
        assert solution.degenerate
        assert solution.method == "geoip_fallback"


class TestFingerprint:
    """RSSI pattern matching."""

    @pytest.fixture
    def survey(self):
        return FingerprintDb(
            entries=[
                FingerprintEntry(rssi={"ap01": -50.0, "ap02": -70.0}, position=EnuPoint(east=0.0, north=0.0)),
                FingerprintEntry(rssi={"ap01": -70.0, "ap02": -50.0}, position=EnuPoint(east=10.0, north=0.0)),
                FingerprintEntry(rssi={"ap01": -60.0, "ap02": -60.0}, position=EnuPoint(east=5.0, north=5.0)),
            ]
        )

    def test_nearest_neighbour(self, survey):
        result = fingerprint_position({"ap01": -50.0, "ap02": -70.0}, survey, k=1)
        assert result.entry_indices == [0]
        assert result.position.as_array() == pytest.approx([0.0, 0.0, 0.0])

    def test_weighted_average(self, survey):
        result = fingerprint_position({"ap01": -50.0, "ap02": -70.0}, survey, k=2, d_min=1.0)
        # entry 0 scores 2.0 and entry 2 scores 0.2
        assert result.scores == pytest.approx([2.0, 0.2])
        expected = (2.0 * np.array([0.0, 0.0, 0.0]) + 0.2 * np.array([5.0, 5.0, 0.0])) / 2.2
        np.testing.assert_allclose(result.position.as_array(), expected)

    def test_no_shared_anchor(self, survey):
        with pytest.raises(InsufficientDataError):
            fingerprint_position({"other": -50.0}, survey)

    def test_empty_database(self):
        with pytest.raises(InsufficientDataError):
            fingerprint_position({"ap01": -50.0}, FingerprintDb())

    def test_invalid_k(self, survey):
        with pytest.raises(InvalidArgumentError):
            fingerprint_position({"ap01": -50.0}, survey, k=0)


class TestRangeGeometry:
    """Propagated range noise and the residual consistency test."""

    SQUARE = np.array([[0.0, 0.0, 0.0], [100.0, 0.0, 0.0], [0.0, 100.0, 0.0], [100.0, 100.0, 0.0]])

    def test_symmetric_square(self):
        sigma = planar_position_sigma(self.SQUARE, [50.0, 50.0, 0.0], np.full(4, 2.0))
        assert sigma == pytest.approx(2.0 / math.sqrt(2.0))

    def test_sigma_scales_with_range_noise(self):
        low = planar_position_sigma(self.SQUARE, [30.0, 70.0, 0.0], np.full(4, 1.0))
        high = planar_position_sigma(self.SQUARE, [30.0, 70.0, 0.0], np.full(4, 3.0))
        assert high == pytest.approx(3.0 * low)

    def test_non_positive_sigma_rejected(self):
        with pytest.raises(InvalidArgumentError):
            planar_position_sigma(self.SQUARE, [50.0, 50.0, 0.0], np.array([1.0, 0.0, 1.0, 1.0]))

    def test_receiver_on_anchor_is_singular(self):
        with pytest.raises(SingularGeometryError):
            planar_position_sigma(self.SQUARE, [0.0, 0.0, 0.0], np.ones(4))

    def test_receiver_on_anchor_line_is_singular(self):
        line = np.array([[0.0, 0.0, 0.0], [50.0, 0.0, 0.0], [100.0, 0.0, 0.0]])
        with pytest.raises(SingularGeometryError):
            planar_position_sigma(line, [200.0, 0.0, 0.0], np.ones(3))

    def test_consistency_bounds(self):
        assert residual_consistent(1.0, 1, 1e-3)
        assert not residual_consistent(20.0, 1, 1e-3)
        assert residual_consistent(1e9, 0, 1e-3)
        assert residual_consistent(10.0, 4, 1e-3)
        assert not residual_consistent(10.0, 4, 0.5)

    @pytest.mark.parametrize("false_alarm", [0.0, 1.0, -0.1])
    def test_false_alarm_must_be_a_probability(self, false_alarm):
        with pytest.raises(InvalidArgumentError):
            residual_consistent(1.0, 2, false_alarm)


class TestFingerprintExhaustive:
    """The K chosen fingerprints are the most similar ones."""

    @pytest.mark.parametrize("seed", range(4))
    def test_top_k_matches_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        anchors = ["ap01", "ap02", "ap03", "ap04"]
        entries = [
            FingerprintEntry(
                rssi={a: float(rng.uniform(-90.0, -40.0)) for a in anchors if a == "ap01" or rng.random() < 0.7},
                position=EnuPoint(east=float(rng.uniform(0.0, 50.0)), north=float(rng.uniform(0.0, 50.0))),
            )
            for _ in range(10)
        ]
        survey = FingerprintDb(entries=entries)
        query = {a: float(rng.uniform(-90.0, -40.0)) for a in anchors}
        k = 3
        result = fingerprint_position(query, survey, k=k, d_min=0.5)

        scores = fingerprint_scores(query, survey, 0.5)
        best = max(itertools.combinations(range(len(entries)), k), key=lambda chosen: scores[list(chosen)].sum())
        assert sorted(result.entry_indices) == sorted(best)
        weights = scores[list(best)]
        positions = np.array([entries[i].position.as_array() for i in best])
        np.testing.assert_allclose(result.position.as_array(), weights @ positions / weights.sum())
