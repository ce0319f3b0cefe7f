"""
Detection and recovery metrics, ROC sweeps and seeded comparison ensembles.

Rates are computed per position fix: an epoch is attacked when any label
row at its time says so. Detection delays are measured per attack window,
a maximal run of consecutive attacked epochs.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from sklearn.metrics import roc_auc_score

from .baselines import baseline_distance_detector, baseline_kalman_detector
from .config import BaselineConfig, DetectorConfig, ScenarioConfig
from .exceptions import InvalidArgumentError, NoDataError
from .fusion import DEFAULT_LAMBDA_GRID
from .models import AttackLabel, DetectionReport, EnuPoint, MetricsSummary, RocPoint
from .pipeline import ExtendedRaimDetector
from .simulator import ScenarioGenerator, SimulatedRun

DEFAULT_FP_TARGETS = (0.05, 0.10, 0.15, 0.20, 0.25)
SWEEP_PARAMETERS = ("sampling-rate", "window")

Scores = Mapping[int, Optional[float]]
Labels = Mapping[int, bool]


def epoch_labels(labels: Sequence[AttackLabel]) -> Dict[int, bool]:
    """Collapse label rows to one attacked flag per epoch time."""
    flags: Dict[int, bool] = {}
    for label in labels:
        flags[label.time] = flags.get(label.time, False) or label.attacked
    return flags


def attack_windows(labels: Labels) -> List[Tuple[int, int]]:
    """(first, last) times of each run of consecutive attacked epochs."""
    windows = []
    start = previous = None
    for time in sorted(labels):
        if labels[time]:
            if start is None:
                start = time
            previous = time
        elif start is not None:
            windows.append((start, previous))
            start = None
    if start is not None:
        windows.append((start, previous))
    return windows


def _cadence_ms(times: Sequence[int]) -> float:
    steps = np.diff(sorted(times))
    return float(np.median(steps)) if steps.size else 1000.0


def _split(scores: Scores, labels: Labels) -> Tuple[np.ndarray, np.ndarray]:
    """Attacked and benign scores of labeled epochs; missing scores become -inf (never alarm)."""
    attacked, benign = [], []
    for time, flag in labels.items():
        score = scores.get(time)
        value = float(score) if score is not None else -np.inf
        (attacked if flag else benign).append(value)
    return np.array(attacked, dtype=float), np.array(benign, dtype=float)


def _rate(values: np.ndarray, threshold: float) -> Optional[float]:
    return float(np.mean(values > threshold)) if values.size else None


def rates_at(scores: Scores, labels: Labels, threshold: float) -> Tuple[Optional[float], Optional[float]]:
    """(P_tp, P_fp) of alarming when the score strictly exceeds threshold."""
    attacked, benign = _split(scores, labels)
    return _rate(attacked, threshold), _rate(benign, threshold)


def confusion_counts(alarms: Mapping[int, bool], labels: Labels) -> Dict[str, int]:
    counts = {"tp": 0, "fn": 0, "fp": 0, "tn": 0}
    for time, flag in labels.items():
        alarm = bool(alarms.get(time, False))
        key = ("tp" if alarm else "fn") if flag else ("fp" if alarm else "tn")
        counts[key] += 1
    return counts


def detection_delays(
    alarms: Mapping[int, bool], labels: Labels, cadence_ms: Optional[float] = None
) -> List[Optional[float]]:
    """Seconds from each window's onset to the end of its first alarmed epoch; None when missed.

    An alarm at the onset epoch therefore counts as one epoch of delay.
    """
    cadence = cadence_ms if cadence_ms is not None else _cadence_ms(list(labels))
    delays: List[Optional[float]] = []
    for start, end in attack_windows(labels):
        hits = [time for time in sorted(alarms) if start <= time <= end and alarms[time] and labels.get(time)]
        delays.append((hits[0] - start + cadence) / 1000.0 if hits else None)
    return delays


def roc_curve(scores: Scores, labels: Labels, grid: Optional[Sequence[float]] = None) -> List[RocPoint]:
    """(P_fp, P_tp) for each distinct threshold of the grid, sorted by threshold."""
    attacked, benign = _split(scores, labels)
    if attacked.size == 0 or benign.size == 0:
        raise NoDataError("ROC needs both attacked and benign epochs")
    thresholds = np.unique(np.asarray(grid if grid is not None else DEFAULT_LAMBDA_GRID, dtype=float))
    if thresholds.size and (thresholds[0] < 0.0 or thresholds[-1] > 1.0):
        raise InvalidArgumentError("ROC thresholds must lie in [0, 1]")
    return [
        RocPoint(lambda_f=float(t), p_fp=_rate(benign, t), p_tp=_rate(attacked, t)) for t in thresholds
    ]


def auc(scores: Scores, labels: Labels) -> Optional[float]:
    """Area under the ROC curve; None unless both classes are present."""
    attacked, benign = _split(scores, labels)
    if attacked.size == 0 or benign.size == 0:
        return None
    values = np.concatenate([attacked, benign])
    finite = values[np.isfinite(values)]
    floor = float(finite.min()) - 1.0 if finite.size else 0.0
    values = np.where(np.isfinite(values), values, floor)
    truth = np.concatenate([np.ones(attacked.size), np.zeros(benign.size)])
    return float(roc_auc_score(truth, values))


def tp_at_fp(scores: Scores, labels: Labels, target_fp: float) -> Tuple[float, Optional[float]]:
    """Smallest observed threshold with P_fp <= target_fp and the P_tp it yields.

    Works for any score scale, so baselines in meters compare with the
    extended RAIM likelihood.
    """
    if not 0.0 <= target_fp <= 1.0:
        raise InvalidArgumentError(f"Target false-positive rate must lie in [0, 1], got {target_fp}")
    attacked, benign = _split(scores, labels)
    if benign.size == 0:
        raise NoDataError("Calibration needs benign epochs")
    values = np.concatenate([attacked, benign])
    candidates = np.unique(np.concatenate([[-np.inf], values[np.isfinite(values)]]))
    # the largest candidate has no benign score above it, so a threshold always exists
    threshold = next(float(c) for c in candidates if float(np.mean(benign > c)) <= target_fp)
    return threshold, _rate(attacked, threshold)


def horizontal_errors(positions: Mapping[int, Optional[EnuPoint]], truth: Mapping[int, EnuPoint]) -> Dict[int, float]:
    return {
        time: float(np.hypot(point.east - truth[time].east, point.north - truth[time].north))
        for time, point in positions.items()
        if point is not None and time in truth
    }


def _mae(errors: Mapping[int, float], times: Sequence[int]) -> Optional[float]:
    values = [errors[t] for t in times if t in errors]
    return float(np.mean(values)) if values else None


def summarize(
    reports: Sequence[DetectionReport],
    labels: Sequence[AttackLabel] = (),
    truth: Optional[Mapping[int, EnuPoint]] = None,
    lbs: Optional[Mapping[int, EnuPoint]] = None,
    lambda_f: Optional[float] = None,
    grid: Optional[Sequence[float]] = None,
) -> MetricsSummary:
    """Detection and recovery metrics of one report stream.

    Without labels only the score distribution is summarized. Recovery
    errors are horizontal and taken over attacked epochs.
    """
    if not reports:
        raise NoDataError("No reports to evaluate")
    lambda_f = lambda_f if lambda_f is not None else reports[0].lambda_f
    scores = {report.time: report.score for report in reports}
    present = np.array([s for s in scores.values() if s is not None], dtype=float)
    score_mean = float(present.mean()) if present.size else None
    score_std = float(present.std()) if present.size else None

    flags = {time: flag for time, flag in epoch_labels(labels).items() if time in scores}
    if not flags:
        if labels:
            logger.warning("No label times match the reports")
        return MetricsSummary(lambda_f=lambda_f, score_mean=score_mean, score_std=score_std)

    alarms = {time: score is not None and score > lambda_f for time, score in scores.items()}
    p_tp, p_fp = rates_at(scores, flags, lambda_f)
    delays = detection_delays(alarms, flags)
    detected = [d for d in delays if d is not None]
    attacked_times = sorted(time for time, flag in flags.items() if flag)
    n_attacked = len(attacked_times)

    roc: List[RocPoint] = []
    if 0 < n_attacked < len(flags):
        roc = roc_curve(scores, flags, grid)

    recovery = {}
    if truth:
        errors = horizontal_errors({r.time: r.recovered for r in reports}, truth)
        attacked_errors = np.array([errors[t] for t in attacked_times if t in errors])
        if attacked_errors.size:
            recovery = {
                "recovery_mae": float(attacked_errors.mean()),
                "recovery_median": float(np.median(attacked_errors)),
                "recovery_p20": float(np.percentile(attacked_errors, 20)),
                "recovery_p80": float(np.percentile(attacked_errors, 80)),
            }
        recovery["fused_mae"] = _mae(
            horizontal_errors({r.time: r.preliminary_fused for r in reports}, truth), attacked_times
        )
        if lbs:
            recovery["lbs_mae"] = _mae(horizontal_errors(dict(lbs), truth), attacked_times)

    return MetricsSummary(
        lambda_f=lambda_f,
        n_attacked=n_attacked,
        n_benign=len(flags) - n_attacked,
        p_tp=p_tp,
        p_fp=p_fp,
        delta_t_d=float(np.mean(detected)) if detected else None,
        window_delays=delays,
        roc=roc,
        auc=auc(scores, flags),
        score_mean=score_mean,
        score_std=score_std,
        **recovery,
    )


@dataclass
class RunRecord:
    """Detector outputs of one simulated run."""

    seed: int
    simulated: SimulatedRun
    reports: List[DetectionReport]
    distance: List = field(default_factory=list)
    kalman: List = field(default_factory=list)

    def frame(self) -> pd.DataFrame:
        truth = self.simulated.truth_by_time()
        flags = epoch_labels(self.simulated.labels())
        lbs = dict(zip(self.simulated.times, self.simulated.lbs))
        recovered = horizontal_errors({r.time: r.recovered for r in self.reports}, truth)
        fused = horizontal_errors({r.time: r.preliminary_fused for r in self.reports}, truth)
        followed = horizontal_errors(lbs, truth)
        distance = {d.time: d.score for d in self.distance}
        kalman = {d.time: d.score for d in self.kalman}
        rows = []
        for report in self.reports:
            rows.append(
                {
                    "seed": self.seed,
                    "time_ms": report.time,
                    "attacked": flags.get(report.time, False),
                    "xraim": report.score,
                    "distance": distance.get(report.time),
                    "kalman": kalman.get(report.time),
                    "recovered_error_m": recovered.get(report.time),
                    "fused_error_m": fused.get(report.time),
                    "lbs_error_m": followed.get(report.time),
                }
            )
        return pd.DataFrame(rows)


def run_detectors(
    simulated: SimulatedRun,
    detector_config: Optional[DetectorConfig] = None,
    baseline_config: Optional[BaselineConfig] = None,
    with_baselines: bool = True,
) -> RunRecord:
    """Run extended RAIM (and optionally both baselines) on a simulated run."""
    detector_config = detector_config or DetectorConfig()
    if detector_config.positioning.receiver_up is None:
        positioning = detector_config.positioning.model_copy(
            update={"receiver_up": simulated.config.trajectory.up_m}
        )
        detector_config = detector_config.model_copy(update={"positioning": positioning})
    epochs = simulated.detection_epochs()
    registry = simulated.registry()
    detector = ExtendedRaimDetector(registry, simulated.origin, detector_config, simulated.fingerprints)
    record = RunRecord(seed=simulated.config.seed, simulated=simulated, reports=detector.run(epochs))
    if with_baselines:
        record.distance = baseline_distance_detector(
            epochs, registry, simulated.origin, config=baseline_config, positioning=detector_config.positioning
        )
        record.kalman = baseline_kalman_detector(
            epochs, registry, simulated.origin, config=baseline_config, positioning=detector_config.positioning
        )
    return record


def _frame_scores(frame: pd.DataFrame, column: str) -> Tuple[Dict[int, Optional[float]], Dict[int, bool]]:
    """Scores and labels of an ensemble frame keyed by row position."""
    scores = {i: (None if pd.isna(v) else float(v)) for i, v in enumerate(frame[column].tolist())}
    labels = {i: bool(v) for i, v in enumerate(frame["attacked"].tolist())}
    return scores, labels


@dataclass
class ComparisonResult:
    per_epoch: pd.DataFrame
    detection: pd.DataFrame
    recovery: Dict[str, Optional[float]]


def _simulate(config: ScenarioConfig, seed: int) -> SimulatedRun:
    return ScenarioGenerator(config.model_copy(update={"seed": seed})).run()


def compare_detectors(
    config: ScenarioConfig,
    seeds: Sequence[int],
    detector_config: Optional[DetectorConfig] = None,
    baseline_config: Optional[BaselineConfig] = None,
    fp_targets: Sequence[float] = DEFAULT_FP_TARGETS,
    progress_callback: Optional[Callable[[int], None]] = None,
) -> ComparisonResult:
    """Seeded ensemble: P_tp at fixed P_fp per detector and recovery MAE per strategy.

    Recovery compares the extended RAIM position with following the
    reported position and with fusing every subset without exclusion.
    """
    if not seeds:
        raise InvalidArgumentError("At least one seed is required")
    frames = []
    for seed in seeds:
        frames.append(run_detectors(_simulate(config, seed), detector_config, baseline_config).frame())
        if progress_callback:
            progress_callback(1)
    per_epoch = pd.concat(frames, ignore_index=True)

    rows = []
    for target in fp_targets:
        row: Dict[str, object] = {"p_fp_target": target}
        for detector in ("xraim", "distance", "kalman"):
            scores, labels = _frame_scores(per_epoch, detector)
            threshold, p_tp = tp_at_fp(scores, labels, target)
            row[f"{detector}_p_tp"] = p_tp
            row[f"{detector}_threshold"] = threshold
        rows.append(row)

    attacked = per_epoch[per_epoch["attacked"]]
    recovery = {
        name: (float(attacked[column].mean()) if attacked[column].notna().any() else None)
        for name, column in (
            ("xraim", "recovered_error_m"), ("fused", "fused_error_m"), ("lbs", "lbs_error_m")
        )
    }
    logger.debug("Compared detectors over {} seeds", len(seeds))
    return ComparisonResult(per_epoch=per_epoch, detection=pd.DataFrame(rows), recovery=recovery)


def _with_parameter(config: DetectorConfig, parameter: str, value: float) -> DetectorConfig:
    if parameter == "sampling-rate":
        return config.model_copy(update={"sampling": config.sampling.model_copy(update={"rate": float(value)})})
    if parameter == "window":
        window = int(value)
        if window < config.filter.order + 1:
            raise InvalidArgumentError(f"Window {window} is shorter than polynomial order + 1")
        return config.model_copy(update={"filter": config.filter.model_copy(update={"window": window})})
    raise InvalidArgumentError(f"Unknown sweep parameter '{parameter}', choose from {SWEEP_PARAMETERS}")


def sweep_parameter(
    config: ScenarioConfig,
    seeds: Sequence[int],
    parameter: str,
    values: Sequence[float],
    detector_config: Optional[DetectorConfig] = None,
    fp_targets: Sequence[float] = DEFAULT_FP_TARGETS,
    progress_callback: Optional[Callable[[int], None]] = None,
) -> pd.DataFrame:
    """P_tp at fixed P_fp for each value of a detector parameter on the same scenarios."""
    detector_config = detector_config or DetectorConfig()
    configs = [(value, _with_parameter(detector_config, parameter, value)) for value in values]
    runs = [_simulate(config, seed) for seed in seeds]

    rows = []
    for value, swept in configs:
        frame = pd.concat(
            [run_detectors(simulated, swept, with_baselines=False).frame() for simulated in runs],
            ignore_index=True,
        )
        scores, labels = _frame_scores(frame, "xraim")
        for target in fp_targets:
            threshold, p_tp = tp_at_fp(scores, labels, target)
            rows.append({parameter: value, "p_fp_target": target, "threshold": threshold, "p_tp": p_tp})
        if progress_callback:
            progress_callback(1)
    return pd.DataFrame(rows)
