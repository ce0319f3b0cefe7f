"""
End-to-end tests of the extended RAIM detector on simulated scenarios.
"""

import numpy as np
import pytest

from xraim.config import AttackSchedule, DetectorConfig, FilterConfig, NoiseConfig, PositioningConfig, SamplingConfig
from xraim.exceptions import InvalidArgumentError
from xraim.models import AttackKind, Infrastructure
from xraim.pipeline import ExtendedRaimDetector
from xraim.simulator import ScenarioGenerator

from .test_simulator import with_attacks

pytestmark = pytest.mark.integration

GNSS_ONLY = [Infrastructure.GNSS]
GNSS_WIFI = [Infrastructure.GNSS, Infrastructure.WIFI]


def detect(simulated, config=None, epochs=None):
    detector = ExtendedRaimDetector(simulated.registry(), simulated.origin, config or DetectorConfig())
    return detector.run(epochs if epochs is not None else simulated.detection_epochs())


class TestBenignRuns:
    """Clean scenarios raise no alarms and recover the truth."""

    def test_noiseless_gnss_scores_near_zero(self, benign_run):
        reports = detect(benign_run, DetectorConfig(infrastructures=GNSS_ONLY))
        assert len(reports) == len(benign_run.times)
        assert not any(report.alarm for report in reports)
        assert max(report.score for report in reports) < 0.05
        for report, truth in zip(reports, benign_run.truth):
            assert report.score_reference == "lbs"
            assert report.recovered.distance_to(truth) < 1e-2

    def test_all_infrastructures(self, benign_run):
        reports = detect(benign_run)
        for report in reports:
            assert report.status == "ok"
            assert 0.0 <= report.score <= 1.0
            assert report.recovered is not None
            assert report.n_estimates > 0

    def test_fused_reference_without_reported_position(self, benign_run):
        reports = detect(benign_run, DetectorConfig(infrastructures=GNSS_ONLY), epochs=benign_run.epochs)
        assert all(report.score_reference == "fused" for report in reports)
        assert max(report.score for report in reports) < 0.05

    def test_progress_callback(self, benign_run):
        calls = []
        detector = ExtendedRaimDetector(benign_run.registry(), benign_run.origin,
                                        DetectorConfig(infrastructures=GNSS_ONLY))
        detector.run(benign_run.detection_epochs(), progress_callback=calls.append)
        assert calls == [1] * len(benign_run.times)

    def test_lower_rates_plan_fewer_subsets(self, benign_run):
        planned = []
        for rate in (0.25, 0.5, 1.0):
            config = DetectorConfig(seed=5, sampling=SamplingConfig(rate=rate), infrastructures=GNSS_WIFI)
            planned.append([report.n_estimates + report.n_failures for report in detect(benign_run, config)])
        for low, high in zip(planned, planned[1:]):
            assert all(a <= b for a, b in zip(low, high))
        assert sum(planned[0]) < sum(planned[-1])

    def test_sampling_is_reproducible(self, benign_run):
        config = DetectorConfig(seed=11, sampling=SamplingConfig(rate=0.5), infrastructures=GNSS_WIFI)
        first = detect(benign_run, config)
        second = detect(benign_run, config)
        assert first == second


class TestAttackedRuns:
    """Detection of spoofing and handling of jamming."""

    def test_coordinated_gnss_spoofing_alarms(self, straight_scenario):
        schedule = AttackSchedule(
            kind=AttackKind.COORDINATED, start_epoch=4, end_epoch=10, offset_m=(150.0, 0.0),
            affected_counts={Infrastructure.GNSS: 6},
        )
        simulated = ScenarioGenerator(with_attacks(straight_scenario, schedule)).run()
        reports = detect(simulated, DetectorConfig(infrastructures=GNSS_WIFI))
        before = reports[:4]
        during = reports[4:10]
        assert not any(report.alarm for report in before)
        assert sum(report.alarm for report in during) >= 0.9 * len(during)

    def test_uncoordinated_satellite_raises_score(self, straight_scenario):
        schedule = AttackSchedule(
            kind=AttackKind.UNCOORDINATED, start_epoch=6, end_epoch=12, affected_ids={Infrastructure.GNSS: ["G01"]},
            spoof_clock_offset_m=1000.0,
        )
        simulated = ScenarioGenerator(with_attacks(straight_scenario, schedule)).run()
        config = DetectorConfig(infrastructures=GNSS_ONLY, filter=FilterConfig(enabled=False))
        reports = detect(simulated, config)
        clean = np.array([report.score for report in reports[:6]])
        attacked = np.array([report.score for report in reports[6:]])
        assert np.all(clean < 0.05)
        assert np.all(attacked > 0.5)
        assert all(report.alarm for report in reports[6:])
        assert all(report.preliminary_fused is not None for report in reports)

    def test_jammed_epochs_have_no_data(self, straight_scenario):
        schedule = AttackSchedule(kind=AttackKind.JAMMING, start_epoch=3, end_epoch=5)
        simulated = ScenarioGenerator(with_attacks(straight_scenario, schedule)).run()
        reports = detect(simulated, DetectorConfig(infrastructures=GNSS_ONLY))
        for report in reports[3:5]:
            assert report.status == "no_data"
            assert report.score is None
            assert not report.alarm
            assert report.recovered is None
        assert reports[5].status == "ok"


class TestDetectorContract:
    """Input validation and state handling."""

    def test_epochs_must_increase(self, benign_run):
        detector = ExtendedRaimDetector(benign_run.registry(), benign_run.origin,
                                        DetectorConfig(infrastructures=GNSS_ONLY))
        epoch = benign_run.detection_epochs()[0]
        detector.process(epoch)
        with pytest.raises(InvalidArgumentError):
            detector.process(epoch)
        detector.reset()
        assert detector.process(epoch).time == epoch.time

    def test_fingerprint_method_needs_survey(self, benign_run):
        config = DetectorConfig(positioning=PositioningConfig(terrestrial_method="fingerprint"))
        with pytest.raises(InvalidArgumentError):
            ExtendedRaimDetector(benign_run.registry(), benign_run.origin, config)

    def test_fingerprint_positioning(self, straight_scenario):
        simulated = ScenarioGenerator(straight_scenario.model_copy(update={"fingerprint_spacing_m": 5.0})).run()
        config = DetectorConfig(
            infrastructures=[Infrastructure.WIFI],
            positioning=PositioningConfig(terrestrial_method="fingerprint"),
        )
        detector = ExtendedRaimDetector(simulated.registry(), simulated.origin, config, simulated.fingerprints)
        reports = detector.run(simulated.detection_epochs())
        assert all(report.recovered is not None for report in reports)
        assert all(report.n_estimates == 16 for report in reports)
        assert all(report.n_failures == 0 for report in reports)


@pytest.mark.slow
class TestScoreSeparation:
    """Benign epochs score well below spoofed ones on noisy data."""

    def test_benign_scores_sit_well_below_attacked(self, straight_scenario):
        schedule = AttackSchedule(
            kind=AttackKind.COORDINATED, start_epoch=4, end_epoch=10, offset_m=(150.0, 0.0),
            affected_counts={Infrastructure.GNSS: 6},
        )
        noisy = straight_scenario.model_copy(update={"noise": NoiseConfig()})
        simulated = ScenarioGenerator(with_attacks(noisy, schedule)).run()
        reports = detect(simulated, DetectorConfig(infrastructures=GNSS_WIFI))
        benign = np.array([report.score for report in reports[:4]])
        attacked = np.array([report.score for report in reports[4:10]])
        assert np.median(attacked) > 0.99
        assert np.median(benign) < 0.9
        assert np.median(attacked) - np.median(benign) > 0.09
