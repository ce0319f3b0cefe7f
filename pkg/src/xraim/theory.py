"""
Counting conditions for detecting and recovering from spoofing, and an
idealized zero-noise oracle to check them against.

All binomial sums use exact integers, so anchor counts up to 64 and beyond
do not overflow.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import comb

from .config import DetectorConfig, FilterConfig, PathLossModel, PositioningConfig, SamplingConfig
from .exceptions import InvalidArgumentError
from .ingest import AnchorRegistry
from .models import AttackKind, GeoPoint, Infrastructure
from .pipeline import ExtendedRaimDetector
from .subsets import ResolvedEpoch, ResolvedGroup, count_subsets

GNSS_ORBIT_DISTANCE_M = 20_200_000.0
TERRESTRIAL_DISTANCE_M = (20.0, 200.0)
SPOOF_OFFSET_M = (100.0, 300.0)
COORDINATED_OFFSET_M = 150.0
RECOVERY_TOLERANCE_M = 1e-6
ORACLE_RANGE_SIGMA_M = 1e-4
ORACLE_SHADOWING_DB = 1e-6
ORACLE_ORIGIN = GeoPoint(latitude=0.0, longitude=0.0)


class InfraCounts(BaseModel):
    """Anchor counts of one infrastructure: minimum subset size, anchors, attacked anchors."""

    n_min: int = Field(..., ge=1)
    n_anc: int = Field(..., ge=0)
    n_adv: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def validate_counts(self):
        if self.n_adv > self.n_anc:
            raise ValueError(f"N_adv ({self.n_adv}) cannot exceed N_anc ({self.n_anc})")
        return self

    @property
    def n_benign(self) -> int:
        return self.n_anc - self.n_adv

    @property
    def slack(self) -> int:
        return self.n_anc - self.n_adv - self.n_min

    model_config = ConfigDict(frozen=True)


def benign_subset_count(c: InfraCounts) -> int:
    """Subsets made only of benign anchors: sum_{i=N_min}^{N_anc-N_adv} C(N_anc-N_adv, i)."""
    benign = c.n_benign
    return sum(comb(benign, i, exact=True) for i in range(c.n_min, benign + 1))


def adversarial_subset_count(c: InfraCounts) -> int:
    """Subsets with i >= 1 attacked anchors and 1 <= j <= N_min - 1 benign ones, j >= N_min - i."""
    benign = c.n_benign
    total = 0
    for i in range(1, c.n_adv + 1):
        lower = max(c.n_min - i, 1)
        upper = min(c.n_min - 1, benign)
        partners = sum(comb(benign, j, exact=True) for j in range(lower, upper + 1))
        total += comb(c.n_adv, i, exact=True) * partners
    return total


def check_lemma1(c: InfraCounts) -> bool:
    """Recoverable from uncoordinated spoofing: N_anc - N_adv > N_min."""
    return c.n_benign > c.n_min


def check_detectable(c: InfraCounts) -> bool:
    """Uncoordinated spoofing is detectable: N_anc - N_adv >= N_min."""
    return c.n_benign >= c.n_min


def max_benign_in_adversarial(c: InfraCounts) -> int:
    """Most benign anchors a spoofed subset can contain without being detected."""
    return c.n_min - 1


def check_lemma2(c: InfraCounts) -> bool:
    """Recoverable from coordinated spoofing: more benign than spoofed subsets."""
    return benign_subset_count(c) > adversarial_subset_count(c)


def check_theorem1(counts: Iterable[InfraCounts]) -> bool:
    """Multi-infrastructure uncoordinated recovery: two tight infrastructures or one with slack."""
    slacks = [c.slack for c in counts]
    return sum(1 for s in slacks if s == 0) > 1 or any(s > 0 for s in slacks)


def check_theorem2(counts: Iterable[InfraCounts]) -> bool:
    """Multi-infrastructure coordinated recovery: benign subsets outnumber spoofed ones overall."""
    counts = list(counts)
    return sum(benign_subset_count(c) for c in counts) > sum(adversarial_subset_count(c) for c in counts)


@dataclass
class RecoveryTrial:
    success: bool
    error_m: Optional[float]
    n_estimates: int
    n_survivors: int
    iterations: int
    n_failures: int = 0


def oracle_unknowns(infrastructure: Infrastructure) -> int:
    """Free coordinates of an oracle solve: position and clock for GNSS, the horizontal plane otherwise."""
    return 4 if infrastructure == Infrastructure.GNSS else 2


def surviving_adversarial_count(c: InfraCounts, kind: AttackKind, n_unknowns: int) -> int:
    """Spoofed subsets a zero-noise residual test cannot reject.

    Exactly determined subsets always fit their ranges, so with
    n_unknowns >= N_min every mixed subset of that size survives, as does an
    exactly determined attacked-only subset. Coordinated spoofing adds every
    attacked-only subset of at least N_min anchors.
    """
    if kind not in (AttackKind.UNCOORDINATED, AttackKind.COORDINATED):
        raise InvalidArgumentError(f"Counting supports uncoordinated or coordinated attacks, got {kind.value}")
    exact = n_unknowns if n_unknowns >= c.n_min else None
    total = 0
    if exact is not None and exact <= c.n_anc:
        total += (
            comb(c.n_anc, exact, exact=True)
            - comb(c.n_benign, exact, exact=True)
            - comb(c.n_adv, exact, exact=True)
        )
    if kind == AttackKind.COORDINATED:
        total += sum(comb(c.n_adv, size, exact=True) for size in range(c.n_min, c.n_adv + 1))
    elif exact is not None:
        total += comb(c.n_adv, exact, exact=True)
    return total


def check_residual_majority(c: InfraCounts, kind: AttackKind, n_unknowns: int) -> bool:
    """Benign subsets outnumber the spoofed subsets that pass a zero-noise residual test."""
    return benign_subset_count(c) > surviving_adversarial_count(c, kind, n_unknowns)


def _unit(azimuth: float, elevation: float) -> np.ndarray:
    return np.array([
        np.cos(elevation) * np.sin(azimuth),
        np.cos(elevation) * np.cos(azimuth),
        np.sin(elevation),
    ])


def _horizontal_offset(rng: np.random.Generator, low: float, high: float) -> np.ndarray:
    heading = rng.uniform(0.0, 2.0 * np.pi)
    return rng.uniform(low, high) * np.array([np.sin(heading), np.cos(heading), 0.0])


def _anchor_layout(infrastructure: Infrastructure, count: int, rng: np.random.Generator) -> np.ndarray:
    if infrastructure == Infrastructure.GNSS:
        return np.vstack([
            GNSS_ORBIT_DISTANCE_M * _unit(rng.uniform(0.0, 2.0 * np.pi), np.radians(rng.uniform(10.0, 90.0)))
            for _ in range(count)
        ])
    return np.vstack([_horizontal_offset(rng, *TERRESTRIAL_DISTANCE_M) for _ in range(count)])


def _oracle_group(
    infrastructure: Infrastructure, positions: np.ndarray, ranges: np.ndarray, path_loss: PathLossModel
) -> ResolvedGroup:
    ids = [f"{infrastructure.value.lower()}{j:02d}" for j in range(len(ranges))]
    if infrastructure == Infrastructure.GNSS:
        return ResolvedGroup(ids, positions, ranges, np.full(len(ranges), ORACLE_RANGE_SIGMA_M))
    values = np.array([path_loss.rssi_for(r) for r in ranges])
    return ResolvedGroup(ids, positions, values, np.zeros(len(ranges)))


def idealized_recovery_trial(
    counts: Mapping[Infrastructure, InfraCounts],
    kind: AttackKind,
    seed: int,
) -> RecoveryTrial:
    """Zero-noise instance: random geometry around the origin, spoofed anchors, full enumeration.

    The epoch goes through the detector with every subset enumerated, no
    smoothing, uniform weights and n_lambda = 0, so overdetermined subsets
    that mix spoofed and benign ranges fail the residual test and the rest
    are excluded iteratively. The recovered position is compared to the
    truth. Uncoordinated spoofing gives each attacked anchor its own spoof
    point; coordinated spoofing makes every attacked anchor consistent with one.
    """
    if kind not in (AttackKind.UNCOORDINATED, AttackKind.COORDINATED):
        raise InvalidArgumentError(f"Oracle supports uncoordinated or coordinated attacks, got {kind.value}")
    rng = np.random.default_rng(seed)
    truth = np.zeros(3)
    common_spoof = truth + _horizontal_offset(rng, COORDINATED_OFFSET_M, COORDINATED_OFFSET_M)
    path_loss = PathLossModel(shadowing_db=ORACLE_SHADOWING_DB)

    groups: Dict[Infrastructure, ResolvedGroup] = {}
    for infrastructure, c in counts.items():
        if infrastructure.min_subset_size != c.n_min:
            raise InvalidArgumentError(
                f"{infrastructure.value} subsets need {infrastructure.min_subset_size} anchors, counts say {c.n_min}"
            )
        if c.n_anc < c.n_min:
            continue
        positions = _anchor_layout(infrastructure, c.n_anc, rng)
        attacked = set(rng.choice(c.n_anc, size=c.n_adv, replace=False).tolist()) if c.n_adv else set()
        ranges = np.empty(c.n_anc)
        for j in range(c.n_anc):
            if j not in attacked:
                target = truth
            elif kind == AttackKind.COORDINATED:
                target = common_spoof
            else:
                target = truth + _horizontal_offset(rng, *SPOOF_OFFSET_M)
            ranges[j] = float(np.linalg.norm(positions[j] - target))
        groups[infrastructure] = _oracle_group(infrastructure, positions, ranges, path_loss)

    if not groups:
        return RecoveryTrial(success=False, error_m=None, n_estimates=0, n_survivors=0, iterations=0)

    totals = [count_subsets(len(group.ids), infra.min_subset_size) for infra, group in groups.items()]
    config = DetectorConfig(
        seed=seed,
        sampling=SamplingConfig(max_subsets=max(max(totals), 512)),
        positioning=PositioningConfig(path_loss={infra: path_loss for infra in groups if infra.is_terrestrial}),
        filter=FilterConfig(enabled=False),
        n_lambda=0.0,
        max_exclusion_iterations=sum(totals) + 1,
        uniform_weights=True,
    )
    detector = ExtendedRaimDetector(AnchorRegistry(), ORACLE_ORIGIN, config)
    report = detector.process_resolved(ResolvedEpoch(time=0, groups=groups))
    logger.debug(
        "Oracle seed {}: {} estimates, {} failures, {} excluded",
        seed, report.n_estimates, report.n_failures, len(report.excluded),
    )

    recovered = report.recovered
    error = float(np.linalg.norm(recovered.as_array() - truth)) if recovered is not None else None
    return RecoveryTrial(
        success=error is not None and error < RECOVERY_TOLERANCE_M,
        error_m=error,
        n_estimates=report.n_estimates,
        n_survivors=report.n_estimates - len(report.excluded),
        iterations=report.iterations,
        n_failures=report.n_failures,
    )


def idealized_recovery_oracle(
    counts: Mapping[Infrastructure, InfraCounts], kind: AttackKind, seed: int
) -> bool:
    """Whether the idealized pipeline recovers the truth within 1e-6 m."""
    return idealized_recovery_trial(counts, kind, seed).success


def oracle_success_rate(
    counts: Mapping[Infrastructure, InfraCounts], kind: AttackKind, trials: int, seed: int = 0
) -> float:
    outcomes = [idealized_recovery_oracle(counts, kind, seed + trial) for trial in range(trials)]
    return float(np.mean(outcomes)) if outcomes else float("nan")


def _oracle_infrastructure(n_min: int) -> Optional[Infrastructure]:
    return {4: Infrastructure.GNSS, 3: Infrastructure.WIFI}.get(n_min)


def condition_table(
    n_min_values: Sequence[int] = (3, 4),
    n_anc_max: int = 10,
    oracle_trials: int = 0,
    oracle_max_anchors: int = 8,
    seed: int = 0,
) -> pd.DataFrame:
    """Tabulate the counting conditions for every (N_min, N_anc, N_adv).

    Rows whose N_min matches an oracle infrastructure report whether benign
    subsets outnumber the spoofed ones a zero-noise residual test keeps.
    With oracle_trials > 0, rows with N_anc <= oracle_max_anchors also get
    the idealized oracle's success rates for both attack kinds.
    """
    if n_anc_max < 1:
        raise InvalidArgumentError("n_anc_max must be positive")
    rows: List[Dict[str, object]] = []
    for n_min in n_min_values:
        for n_anc in range(n_min, n_anc_max + 1):
            for n_adv in range(0, n_anc + 1):
                c = InfraCounts(n_min=n_min, n_anc=n_anc, n_adv=n_adv)
                row: Dict[str, object] = {
                    "Nmin": n_min,
                    "Nanc": n_anc,
                    "Nadv": n_adv,
                    "lemma1": check_lemma1(c),
                    "detectable": check_detectable(c),
                    "lemma2": check_lemma2(c),
                    "benign_count": benign_subset_count(c),
                    "adv_count": adversarial_subset_count(c),
                }
                infrastructure = _oracle_infrastructure(n_min)
                for kind, column in (
                    (AttackKind.UNCOORDINATED, "majority_uncoordinated"),
                    (AttackKind.COORDINATED, "majority_coordinated"),
                ):
                    row[column] = (
                        check_residual_majority(c, kind, oracle_unknowns(infrastructure))
                        if infrastructure is not None
                        else None
                    )
                if oracle_trials > 0:
                    run = infrastructure is not None and n_anc <= oracle_max_anchors
                    for kind, column in (
                        (AttackKind.UNCOORDINATED, "oracle_uncoordinated"),
                        (AttackKind.COORDINATED, "oracle_coordinated"),
                    ):
                        row[column] = (
                            oracle_success_rate({infrastructure: c}, kind, oracle_trials, seed) if run else np.nan
                        )
                rows.append(row)
    return pd.DataFrame(rows)
