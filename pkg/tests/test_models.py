"""
Tests for the domain models and configuration objects.
"""

import math

import pytest
from pydantic import ValidationError

from xraim.config import (
    AttackSchedule,
    DefaultPathLoss,
    DetectorConfig,
    FilterConfig,
    PathLossModel,
    PositioningConfig,
    ScenarioConfig,
)
from xraim.models import (
    AttackKind,
    DetectionReport,
    EnuPoint,
    Epoch,
    GeoPoint,
    Infrastructure,
    MotionSample,
    RangingMeasurement,
    SubsetSpec,
    ValueKind,
    wrap_angle,
)

pytestmark = pytest.mark.models


def _rssi(time=1000, value=-60.0, anchor_id="ap01"):
    return RangingMeasurement(
        time=time,
        anchor_id=anchor_id,
        infrastructure=Infrastructure.WIFI,
        value=value,
        value_kind=ValueKind.RSSI,
    )


class TestMeasurementModels:
    """Validation of points and measurements."""

    def test_geopoint_rejects_out_of_range_latitude(self):
        with pytest.raises(ValidationError):
            GeoPoint(latitude=91.0, longitude=0.0)

    def test_enu_point_rejects_nan(self):
        with pytest.raises(ValidationError):
            EnuPoint(east=float("nan"), north=0.0)

    def test_enu_distance(self):
        assert EnuPoint(east=3.0, north=4.0).distance_to(EnuPoint(east=0.0, north=0.0)) == pytest.approx(5.0)

    def test_positive_rssi_rejected(self):
        with pytest.raises(ValidationError) as exc_info:
            _rssi(value=3.0)
        assert "RSSI" in str(exc_info.value)

    def test_value_kind_must_match_infrastructure(self):
        with pytest.raises(ValidationError):
            RangingMeasurement(
                time=0,
                anchor_id="G01",
                infrastructure=Infrastructure.GNSS,
                value=-50.0,
                value_kind=ValueKind.RSSI,
            )

    def test_non_positive_pseudorange_rejected(self):
        with pytest.raises(ValidationError):
            RangingMeasurement(
                time=0,
                anchor_id="G01",
                infrastructure=Infrastructure.GNSS,
                value=0.0,
                value_kind=ValueKind.PSEUDORANGE,
            )

    def test_orientation_is_wrapped(self):
        sample = MotionSample(time=0, orientation=(0.0, 0.0, 3.0 * math.pi))
        assert sample.orientation[2] == pytest.approx(math.pi)

    def test_wrap_angle_range(self):
        for angle in (-7.0, -math.pi, 0.0, math.pi, 10.0):
            wrapped = wrap_angle(angle)
            assert -math.pi < wrapped <= math.pi
            assert math.isclose(math.cos(wrapped), math.cos(angle), abs_tol=1e-12)

    def test_minimum_subset_sizes(self):
        assert Infrastructure.GNSS.min_subset_size == 4
        assert Infrastructure.WIFI.min_subset_size == 3
        assert Infrastructure.GEOIP.min_subset_size == 3


class TestEpoch:
    """Alignment invariants of epochs."""

    def test_measurement_outside_window_rejected(self):
        with pytest.raises(ValidationError):
            Epoch(time=1000, measurements={Infrastructure.WIFI: [_rssi(time=2000)]}, alignment_window_ms=500)

    def test_measurement_in_wrong_group_rejected(self):
        with pytest.raises(ValidationError):
            Epoch(time=1000, measurements={Infrastructure.CELL: [_rssi()]})

    def test_infrastructures_and_count(self):
        epoch = Epoch(time=1000, measurements={Infrastructure.WIFI: [_rssi(), _rssi(anchor_id="ap02")]})
        assert epoch.infrastructures() == [Infrastructure.WIFI]
        assert epoch.measurement_count() == 2


class TestSubsetSpec:
    def test_too_few_members(self):
        with pytest.raises(ValidationError):
            SubsetSpec(infrastructure=Infrastructure.GNSS, members=("G01", "G02", "G03"), index=0)

    def test_duplicate_members(self):
        with pytest.raises(ValidationError):
            SubsetSpec(infrastructure=Infrastructure.WIFI, members=("a", "a", "b"), index=0)

    def test_key_ignores_index(self):
        first = SubsetSpec(infrastructure=Infrastructure.WIFI, members=("a", "b", "c"), index=0)
        second = SubsetSpec(infrastructure=Infrastructure.WIFI, members=("a", "b", "c"), index=5)
        assert first.key == second.key


class TestDetectionReport:
    """Partition invariant between benign and excluded subsets."""

    def test_excluded_and_benign_must_be_disjoint(self):
        spec = SubsetSpec(infrastructure=Infrastructure.WIFI, members=("a", "b", "c"), index=1)
        with pytest.raises(ValidationError):
            DetectionReport(
                time=0,
                lambda_f=0.5,
                excluded=[spec],
                benign_index_sets={Infrastructure.WIFI: [1]},
                recovered=EnuPoint(east=0.0, north=0.0),
            )

    def test_recovered_requires_benign_subsets(self):
        with pytest.raises(ValidationError):
            DetectionReport(time=0, lambda_f=0.5, recovered=EnuPoint(east=0.0, north=0.0))

    def test_csv_row(self):
        report = DetectionReport(
            time=5,
            score=0.25,
            alarm=False,
            lambda_f=0.5,
            benign_index_sets={Infrastructure.WIFI: [0]},
            recovered=EnuPoint(east=1.0, north=2.0, up=3.0),
        )
        row = report.to_csv_row()
        assert row["time_ms"] == 5
        assert row["alarm"] == 0
        assert (row["recovered_e"], row["recovered_n"], row["recovered_u"]) == (1.0, 2.0, 3.0)


class TestConfiguration:
    """Validated configuration objects."""

    def test_path_loss_inverse(self):
        model = PathLossModel()
        for distance in (1.0, 12.5, 80.0):
            assert model.range_for(model.rssi_for(distance)) == pytest.approx(distance, rel=1e-12)

    def test_default_path_loss_per_infrastructure(self):
        assert DefaultPathLoss.for_infrastructure(Infrastructure.BLUETOOTH).reference_power_dbm == -59.0
        assert set(DefaultPathLoss.get_defaults()) == {
            Infrastructure.WIFI, Infrastructure.CELL, Infrastructure.BLUETOOTH
        }

    def test_partial_path_loss_is_completed(self):
        config = PositioningConfig(path_loss={Infrastructure.WIFI: PathLossModel(exponent=3.0)})
        assert config.path_loss[Infrastructure.WIFI].exponent == 3.0
        assert Infrastructure.CELL in config.path_loss

    def test_filter_window_must_fit_polynomial(self):
        with pytest.raises(ValidationError):
            FilterConfig(window=2, order=2)

    def test_filter_tolerance_defaults_to_three_sigma(self):
        assert FilterConfig(motion_sigma_m=1.5).tolerance == pytest.approx(4.5)
        assert FilterConfig(epsilon_m=2.0).tolerance == 2.0

    def test_detector_defaults(self):
        config = DetectorConfig()
        assert config.filter.window == 15
        assert config.filter.kernel_decay == 0.3
        assert config.filter.order == 2
        assert config.sampling.rate == 1.0
        assert config.n_lambda == 3.0

    def test_lambda_f_bounds(self):
        with pytest.raises(ValidationError):
            DetectorConfig(lambda_f=1.5)

    @pytest.mark.parametrize("lambda_f", [0.0, 1.0])
    def test_lambda_f_is_an_open_interval(self, lambda_f):
        with pytest.raises(ValidationError):
            DetectorConfig(lambda_f=lambda_f)
        with pytest.raises(ValidationError):
            DetectionReport(time=0, lambda_f=lambda_f, status="no_data")

    def test_attack_window_inside_scenario(self):
        with pytest.raises(ValidationError):
            ScenarioConfig(
                epochs=10,
                attacks=[AttackSchedule(kind=AttackKind.COORDINATED, start_epoch=5, end_epoch=20)],
            )

    def test_attack_start_precedes_end(self):
        with pytest.raises(ValidationError):
            AttackSchedule(kind=AttackKind.JAMMING, start_epoch=5, end_epoch=5)

    def test_linear_ramp(self):
        schedule = AttackSchedule(kind=AttackKind.GRADUAL_DRIFT, start_epoch=0, end_epoch=11)
        assert schedule.ramp_fraction(0) == 0.0
        assert schedule.ramp_fraction(5) == pytest.approx(0.5)
        assert schedule.ramp_fraction(10) == pytest.approx(1.0)

    def test_quadratic_ramp(self):
        schedule = AttackSchedule(
            kind=AttackKind.GRADUAL_DRIFT, start_epoch=0, end_epoch=11, drift_profile="quadratic"
        )
        assert schedule.ramp_fraction(5) == pytest.approx(0.25)

    def test_scenario_json_round_trip(self):
        config = ScenarioConfig(
            epochs=30,
            attacks=[AttackSchedule(kind=AttackKind.UNCOORDINATED, start_epoch=3, end_epoch=9,
                                    affected_counts={Infrastructure.WIFI: 2})],
        )
        restored = ScenarioConfig.model_validate_json(config.model_dump_json())
        assert restored == config
