"""
Per-epoch extended RAIM detection pipeline.

resolve -> plan subsets -> solve -> smooth -> score -> alarm -> exclude -> recover
"""

from collections import deque
from typing import Callable, Deque, Dict, Iterable, List, Optional, Tuple

import numpy as np
from loguru import logger

from .config import DetectorConfig
from .exceptions import InsufficientDataError, InvalidArgumentError
from .fusion import attack_likelihood, decide_alarm, density_of, exclude_inconsistent, recover_position
from .ingest import AnchorRegistry
from .models import (
    DetectionReport,
    EnuPoint,
    Epoch,
    FingerprintDb,
    GeoPoint,
    Infrastructure,
    MotionSample,
    SubsetDensity,
    SubsetEstimate,
    SubsetFailure,
    SubsetSpec,
)
from .motion import SubsetTrackStore
from .subsets import ResolvedEpoch, epoch_seed, evaluate_subsets, plan_subsets, resolve_epoch

INFRASTRUCTURE_STREAMS = {infra: index for index, infra in enumerate(Infrastructure)}


class ExtendedRaimDetector:
    """Stateful detector; keeps smoothing windows and verified positions across epochs.

    Feed epochs in time order through process() or run().
    """

    def __init__(
        self,
        registry: AnchorRegistry,
        origin: GeoPoint,
        config: Optional[DetectorConfig] = None,
        fingerprints: Optional[FingerprintDb] = None,
    ):
        self.config = config or DetectorConfig()
        if self.config.positioning.terrestrial_method == "fingerprint" and not fingerprints:
            logger.error("Fingerprint positioning selected without a fingerprint survey")
            raise InvalidArgumentError("terrestrial_method 'fingerprint' needs a fingerprint survey")
        self.registry = registry
        self.origin = origin
        self.fingerprints = fingerprints
        self._tracks = SubsetTrackStore(self.config.filter, self.config.sigma_min)
        self._window_times: Deque[int] = deque(maxlen=self.config.filter.window)
        self._verified: Dict[int, EnuPoint] = {}
        self._previous_motion: Optional[MotionSample] = None
        self._last_time: Optional[int] = None
        logger.debug("Initialized extended RAIM detector with seed {}", self.config.seed)

    def reset(self):
        self._tracks = SubsetTrackStore(self.config.filter, self.config.sigma_min)
        self._window_times.clear()
        self._verified.clear()
        self._previous_motion = None
        self._last_time = None

    def plan(self, resolved: ResolvedEpoch) -> List[SubsetSpec]:
        """Subsets to solve for every infrastructure of a resolved epoch."""
        specs: List[SubsetSpec] = []
        reference = resolved.lbs_position.as_array() if resolved.lbs_position is not None else np.zeros(3)
        for infrastructure, group in resolved.groups.items():
            try:
                plan = plan_subsets(
                    group.ids,
                    infrastructure,
                    self.config.sampling,
                    epoch_seed(self.config.seed, resolved.time, INFRASTRUCTURE_STREAMS[infrastructure]),
                    positions=dict(zip(group.ids, group.positions)),
                    reference=reference,
                )
            except InsufficientDataError as e:
                logger.debug("Skipping {} at {}: {}", infrastructure.value, resolved.time, e)
                continue
            if plan.best_effort:
                logger.debug("Greedy DOP plan at {} is best effort", resolved.time)
            specs.extend(plan.specs)
        return specs

    def resolve(self, epoch: Epoch) -> ResolvedEpoch:
        return resolve_epoch(
            epoch,
            self.registry,
            self.origin,
            infrastructures=self.config.infrastructures,
            receiver_up=self.config.positioning.receiver_up,
        )

    def estimate(self, resolved: ResolvedEpoch) -> Tuple[List[SubsetEstimate], List[SubsetFailure]]:
        """Plan, solve and smooth one resolved epoch."""
        specs = self.plan(resolved)
        estimates, failures = evaluate_subsets(
            resolved, specs, self.config.positioning, self.config.sigma_min, self.fingerprints
        )
        if self.config.filter.enabled:
            self._window_times.append(resolved.time)
            window = list(self._window_times)
            estimates = [
                self._tracks.update(estimate, window, self._verified, self._previous_motion)
                for estimate in estimates
            ]
            self._tracks.prune(window)
        return estimates, failures

    def process(self, epoch: Epoch) -> DetectionReport:
        """Run detection and recovery for one epoch."""
        return self.process_resolved(self.resolve(epoch))

    def process_resolved(self, resolved: ResolvedEpoch) -> DetectionReport:
        """Run detection and recovery on an epoch whose anchors are already in ENU."""
        if self._last_time is not None and resolved.time <= self._last_time:
            raise InvalidArgumentError(
                f"Epochs must be strictly increasing, got {resolved.time} after {self._last_time}"
            )
        self._last_time = resolved.time

        estimates, failures = self.estimate(resolved)
        self._previous_motion = resolved.motion
        lambda_f = self.config.lambda_f

        if not estimates:
            logger.debug("No subset estimates at {}", resolved.time)
            return DetectionReport(
                time=resolved.time,
                lambda_f=lambda_f,
                n_failures=len(failures),
                status="no_data",
            )

        exclusion = exclude_inconsistent(
            estimates,
            n_lambda=self.config.n_lambda,
            max_iterations=self.config.max_exclusion_iterations,
            uniform=self.config.uniform_weights,
        )
        if resolved.lbs_position is not None:
            reference, reference_kind = resolved.lbs_position, "lbs"
        else:
            reference, reference_kind = exclusion.preliminary, "fused"

        densities: Dict[Infrastructure, List[SubsetDensity]] = {}
        for estimate in estimates:
            densities.setdefault(estimate.spec.infrastructure, []).append(density_of(estimate))
        score = attack_likelihood(densities, reference)

        recovered = recover_position(estimates, exclusion.benign, self.config.uniform_weights)
        if recovered is not None:
            self._verified[resolved.time] = recovered
            if len(self._verified) > self.config.filter.window:
                recent = sorted(self._verified)[-self.config.filter.window :]
                self._verified = {t: self._verified[t] for t in recent}

        return DetectionReport(
            time=resolved.time,
            score=score,
            alarm=decide_alarm(score, lambda_f),
            lambda_f=lambda_f,
            score_reference=reference_kind,
            preliminary_fused=exclusion.preliminary,
            deviations=exclusion.deviations,
            excluded=exclusion.excluded,
            benign_index_sets=exclusion.benign,
            recovered=recovered,
            iterations=exclusion.iterations,
            n_estimates=len(estimates),
            n_failures=len(failures),
            status="trivial" if exclusion.trivial else "ok",
        )

    def run(
        self, epochs: Iterable[Epoch], progress_callback: Optional[Callable[[int], None]] = None
    ) -> List[DetectionReport]:
        reports = []
        for epoch in epochs:
            reports.append(self.process(epoch))
            if progress_callback:
                progress_callback(1)
        alarms = sum(report.alarm for report in reports)
        logger.debug("Processed {} epochs, {} alarms", len(reports), alarms)
        return reports
