"""
Subset enumeration, sampling and per-subset evaluation.

An epoch's anchors are grouped by infrastructure; every subset of at least
the minimum size yields one temporary position estimate. Enumeration grows
as 2^J, so plans are capped and sampled before anything is solved.
"""

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import ValidationError
from scipy.special import comb

from .config import PositioningConfig, SamplingConfig
from .exceptions import (
    ConvergenceError,
    InconsistentSubsetError,
    InsufficientDataError,
    InvalidArgumentError,
    SingularGeometryError,
    XraimError,
)
from .fusion import subset_uncertainty
from .geodesy import ecef_to_enu, wgs84_to_enu
from .ingest import AnchorRegistry
from .models import (
    EnuPoint,
    Epoch,
    FingerprintDb,
    GeoPoint,
    Infrastructure,
    MotionSample,
    SubsetEstimate,
    SubsetFailure,
    SubsetSpec,
)
from .solvers import (
    compute_dop,
    fingerprint_position,
    gnss_design_matrix,
    planar_position_sigma,
    residual_consistent,
    rssi_to_range,
    rtt_to_range,
    solve_geoip,
    solve_gnss_ls,
    solve_range_ls,
    solve_weighted_ls,
)

SeedLike = Union[int, np.random.SeedSequence]


@dataclass
class ResolvedGroup:
    """Measurements of one infrastructure with anchors resolved to ENU, sorted by anchor id."""

    ids: List[str]
    positions: np.ndarray
    values: np.ndarray
    sigmas: np.ndarray

    def index_of(self) -> Dict[str, int]:
        return {anchor_id: i for i, anchor_id in enumerate(self.ids)}


@dataclass
class ResolvedEpoch:
    time: int
    groups: Dict[Infrastructure, ResolvedGroup] = field(default_factory=dict)
    motion: Optional[MotionSample] = None
    lbs_position: Optional[EnuPoint] = None
    fixed_up: float = 0.0
    dropped: int = 0


@dataclass
class SubsetPlan:
    """Subsets selected for one infrastructure of one epoch."""

    specs: List[SubsetSpec]
    total: int
    sampled: bool = False
    best_effort: bool = False


def resolve_epoch(
    epoch: Epoch,
    registry: AnchorRegistry,
    origin: GeoPoint,
    infrastructures: Optional[Iterable[Infrastructure]] = None,
    receiver_up: Optional[float] = None,
) -> ResolvedEpoch:
    """Attach ENU anchor positions to every measurement of an epoch.

    GNSS satellites come from the epoch's inline anchors (ECEF when
    available), everything else from the registry. Measurements whose
    anchor cannot be resolved are dropped with a warning.
    """
    allowed = set(infrastructures) if infrastructures is not None else set(Infrastructure)
    registry_positions = registry.enu_positions(origin)
    lbs = wgs84_to_enu(epoch.lbs_position, origin) if epoch.lbs_position is not None else None
    if receiver_up is None:
        receiver_up = lbs.up if lbs is not None else 0.0

    resolved = ResolvedEpoch(time=epoch.time, motion=epoch.motion, lbs_position=lbs, fixed_up=receiver_up)
    for infrastructure in epoch.infrastructures():
        if infrastructure not in allowed:
            continue
        rows = []
        for measurement in epoch.measurements[infrastructure]:
            position = None
            inline = epoch.anchors.get(measurement.anchor_id) if infrastructure == Infrastructure.GNSS else None
            if inline is not None:
                if inline.ecef is not None:
                    position = ecef_to_enu(inline.ecef, origin)
                else:
                    position = wgs84_to_enu(inline.position, origin)
            else:
                position = registry_positions.get((infrastructure, measurement.anchor_id))
            if position is None:
                logger.warning(
                    "Dropping {} measurement of unknown anchor {} at {}",
                    infrastructure.value, measurement.anchor_id, epoch.time,
                )
                resolved.dropped += 1
                continue
            rows.append((measurement.anchor_id, position.as_array(), measurement.value, measurement.sigma))
        if not rows:
            continue
        rows.sort(key=lambda row: row[0])
        resolved.groups[infrastructure] = ResolvedGroup(
            ids=[row[0] for row in rows],
            positions=np.vstack([row[1] for row in rows]),
            values=np.array([row[2] for row in rows], dtype=float),
            sigmas=np.array([row[3] for row in rows], dtype=float),
        )
    return resolved


def min_subset_size(infrastructure: Infrastructure) -> int:
    """4 for GNSS (position plus clock), 3 for every other infrastructure."""
    return infrastructure.min_subset_size


def count_subsets(n_anchors: int, n_min: int) -> int:
    """Number of subsets of sizes n_min..n_anchors."""
    return sum(comb(n_anchors, size, exact=True) for size in range(n_min, n_anchors + 1))


def _combinations(ids: Sequence[str], n_min: int) -> Iterator[Tuple[str, ...]]:
    return itertools.chain.from_iterable(
        itertools.combinations(ids, size) for size in range(n_min, len(ids) + 1)
    )


def enumerate_subsets(anchor_ids: Iterable[str], infrastructure: Infrastructure) -> List[SubsetSpec]:
    """All subsets of size >= the minimum, by size then lexicographic member order."""
    ids = sorted(set(anchor_ids))
    n_min = min_subset_size(infrastructure)
    if len(ids) < n_min:
        raise InsufficientDataError(
            f"{infrastructure.value} needs {n_min} anchors for a subset, got {len(ids)}"
        )
    return [
        SubsetSpec(infrastructure=infrastructure, members=members, index=index)
        for index, members in enumerate(_combinations(ids, n_min))
    ]


def epoch_seed(seed: int, time: int, stream: int) -> np.random.SeedSequence:
    """Independent reproducible stream per (run seed, epoch time, infrastructure)."""
    return np.random.SeedSequence([seed, time % 2**32, stream])


def sample_uniform(subsets: Sequence[SubsetSpec], rate: float, seed: SeedLike) -> List[SubsetSpec]:
    """Keep each subset independently with probability rate; never returns an empty list."""
    if not 0.0 < rate <= 1.0:
        raise InvalidArgumentError(f"Sampling rate must lie in (0, 1], got {rate}")
    if rate == 1.0 or not subsets:
        return list(subsets)
    rng = np.random.default_rng(seed)
    keep = rng.random(len(subsets)) < rate
    kept = [spec for spec, selected in zip(subsets, keep) if selected]
    if not kept:
        kept = [min(subsets, key=lambda spec: spec.index)]
    return kept


def combination_rank(members: Sequence[int], n: int) -> int:
    """Lexicographic rank of a sorted combination of range(n) among those of its size."""
    k = len(members)
    rank = 0
    previous = -1
    for position, member in enumerate(members):
        for skipped in range(previous + 1, int(member)):
            rank += comb(n - skipped - 1, k - position - 1, exact=True)
        previous = int(member)
    return rank


def _stream_sample(
    ids: Sequence[str], infrastructure: Infrastructure, rate: float, cap: int, seed: SeedLike
) -> List[SubsetSpec]:
    """Uniform sample of about rate * total subsets, at most cap, without walking the enumeration.

    Each draw picks a size with weight C(J, size) and then a uniform
    combination of that size; its enumeration index is the size offset plus
    the combination's rank. Cost grows with the kept subsets, not with 2^J.
    """
    rng = np.random.default_rng(seed)
    n_ids = len(ids)
    sizes = list(range(infrastructure.min_subset_size, n_ids + 1))
    counts = [comb(n_ids, size, exact=True) for size in sizes]
    total = sum(counts)
    offsets = dict(zip(sizes, itertools.accumulate([0] + counts[:-1])))
    weights = np.array([count / total for count in counts])
    weights /= weights.sum()

    wanted = int(rng.binomial(total, rate)) if total < 2**62 else cap
    wanted = min(max(wanted, 1), cap)
    chosen: Dict[int, Tuple[str, ...]] = {}
    attempts = 0
    while len(chosen) < wanted and attempts < 50 * wanted:
        attempts += 1
        size = sizes[int(rng.choice(len(sizes), p=weights))]
        members = np.sort(rng.choice(n_ids, size=size, replace=False))
        index = offsets[size] + combination_rank(members, n_ids)
        chosen.setdefault(index, tuple(ids[m] for m in members))
    if len(chosen) < wanted:
        logger.debug(
            "Kept {} of {} wanted {} subsets after {} draws", len(chosen), wanted, infrastructure.value, attempts
        )
    return [
        SubsetSpec(infrastructure=infrastructure, members=chosen[index], index=index) for index in sorted(chosen)
    ]


def plan_subsets(
    anchor_ids: Iterable[str],
    infrastructure: Infrastructure,
    sampling: SamplingConfig,
    seed: SeedLike,
    positions: Optional[Mapping[str, np.ndarray]] = None,
    reference: Optional[np.ndarray] = None,
) -> SubsetPlan:
    """Choose the subsets to solve for one infrastructure.

    Greedy DOP expansion applies to GNSS when configured and satellite
    positions are given. Otherwise subsets are sampled uniformly; when the
    full enumeration exceeds max_subsets the rate drops to max_subsets/total
    and subsets are drawn by rank instead of materialized. Spec indices
    are positions in the full enumeration.
    """
    ids = sorted(set(anchor_ids))
    n_min = min_subset_size(infrastructure)
    if len(ids) < n_min:
        raise InsufficientDataError(
            f"{infrastructure.value} needs {n_min} anchors for a subset, got {len(ids)}"
        )
    total = count_subsets(len(ids), n_min)

    if sampling.strategy == "greedy_dop" and infrastructure == Infrastructure.GNSS and positions is not None:
        specs, best_effort = greedy_dop_expansion(
            {anchor_id: positions[anchor_id] for anchor_id in ids},
            sampling.dop_threshold,
            max_size=sampling.greedy_max_size,
            reference=reference,
        )
        return SubsetPlan(specs=specs, total=total, sampled=True, best_effort=best_effort)

    if total <= sampling.max_subsets:
        full = enumerate_subsets(ids, infrastructure)
        if sampling.rate >= 1.0:
            return SubsetPlan(specs=full, total=total)
        return SubsetPlan(specs=sample_uniform(full, sampling.rate, seed), total=total, sampled=True)

    rate = min(sampling.rate, sampling.max_subsets / total)
    logger.debug(
        "{} subsets of {} {} anchors exceed the cap of {}; sampling at rate {:.4g}",
        total, len(ids), infrastructure.value, sampling.max_subsets, rate,
    )
    specs = _stream_sample(ids, infrastructure, rate, sampling.max_subsets, seed)
    return SubsetPlan(specs=specs, total=total, sampled=True)


def _spatial_dop(positions: np.ndarray, reference: np.ndarray) -> float:
    design, _ = gnss_design_matrix(positions, reference)
    return compute_dop(design).spatial


def greedy_dop_expansion(
    satellites: Mapping[str, np.ndarray],
    dop_threshold: float,
    max_size: Optional[int] = None,
    reference: Optional[np.ndarray] = None,
) -> Tuple[List[SubsetSpec], bool]:
    """Grow subsets greedily from the best 4-satellite geometry.

    Each round starts from the minimum-DOP 4-subset of the remaining
    satellites (ties broken by member order), then adds the satellite that
    lowers DOP most while DOP stays within the threshold and the subset is
    below max_size. Rounds repeat on the leftover satellites until fewer
    than four remain. Returns (specs, best_effort); best_effort is set when
    no 4-subset meets the threshold and the single best one is returned.
    """
    ids = sorted(satellites)
    if len(ids) < 4:
        raise InsufficientDataError(f"Greedy DOP expansion needs 4 satellites, got {len(ids)}")
    if max_size is not None and max_size < 4:
        raise InvalidArgumentError(f"max_size must be at least 4, got {max_size}")
    reference = np.zeros(3) if reference is None else np.asarray(reference, dtype=float)

    def dop_of(members: Sequence[str]) -> float:
        try:
            return _spatial_dop(np.vstack([satellites[m] for m in members]), reference)
        except SingularGeometryError:
            return float("inf")

    remaining = list(ids)
    specs: List[SubsetSpec] = []
    while len(remaining) >= 4:
        scored = [(dop_of(members), members) for members in itertools.combinations(remaining, 4)]
        best_dop, best = min(scored, key=lambda item: (item[0], item[1]))
        if not np.isfinite(best_dop):
            break
        if best_dop > dop_threshold:
            if not specs:
                logger.debug("No 4-satellite subset reaches DOP {}; best is {:.3f}", dop_threshold, best_dop)
                return [SubsetSpec(infrastructure=Infrastructure.GNSS, members=best, index=0)], True
            break

        members = list(best)
        while max_size is None or len(members) < max_size:
            candidates = [(dop_of(sorted(members + [extra])), extra) for extra in remaining if extra not in members]
            if not candidates:
                break
            candidate_dop, extra = min(candidates)
            if candidate_dop > dop_threshold:
                break
            members.append(extra)

        members.sort()
        specs.append(SubsetSpec(infrastructure=Infrastructure.GNSS, members=tuple(members), index=len(specs)))
        remaining = [anchor_id for anchor_id in remaining if anchor_id not in members]
    return specs, False


def _failure_reason(error: Exception) -> str:
    if isinstance(error, SingularGeometryError):
        return "singular"
    if isinstance(error, InconsistentSubsetError):
        return "inconsistent"
    if isinstance(error, ConvergenceError):
        return "convergence"
    if isinstance(error, InsufficientDataError):
        return "insufficient"
    return str(error) or type(error).__name__


def _geometry_sigma(anchors: np.ndarray, position: EnuPoint, range_sigmas: np.ndarray) -> Optional[float]:
    try:
        return planar_position_sigma(anchors, position, range_sigmas)
    except (SingularGeometryError, InvalidArgumentError):
        return None


def _solve_subset(
    spec: SubsetSpec,
    group: ResolvedGroup,
    rows: List[int],
    config: PositioningConfig,
    fixed_up: float,
    fingerprints: Optional[FingerprintDb],
) -> Tuple[EnuPoint, Dict[str, object]]:
    infrastructure = spec.infrastructure
    positions = group.positions[rows]
    values = group.values[rows]

    if infrastructure == Infrastructure.GNSS:
        solution = solve_gnss_ls(
            list(zip(positions, values)),
            max_iterations=config.gnss_max_iterations,
            step_tolerance=config.gnss_step_tolerance,
        )
        sigmas = group.sigmas[rows]
        range_sigmas = np.where(sigmas > 0.0, sigmas, config.gnss_uere_m)
        return solution.position, {
            "method": "gnss_ls",
            "dop": solution.dop.as_tuple(),
            "dop_spatial": solution.dop.spatial,
            "clock_bias": solution.clock_bias,
            "residual_rms": float(np.sqrt(np.mean(solution.residuals ** 2))),
            "iterations": solution.iterations,
            "mean_sigma": float(np.mean(sigmas)),
            "subset_size": len(rows),
            "chi2": float(np.sum((solution.residuals / range_sigmas) ** 2)),
            "dof": len(rows) - 4,
        }

    if infrastructure == Infrastructure.GEOIP:
        ranges = np.array([rtt_to_range(value, config.geoip_gamma) for value in values])
        range_sigmas = np.full(len(ranges), config.geoip_range_sigma_m)
        solution = solve_geoip(
            list(zip(positions, ranges)), grid_points=config.geoip_grid_points, fixed_up=fixed_up
        )
    elif config.terrestrial_method == "fingerprint":
        if fingerprints is None or len(fingerprints) == 0:
            raise InsufficientDataError("Fingerprint positioning needs a fingerprint survey")
        query = {group.ids[i]: float(group.values[i]) for i in rows}
        result = fingerprint_position(
            query, fingerprints, k=config.fingerprint_k, d_min=config.fingerprint_d_min
        )
        position = EnuPoint(east=result.position.east, north=result.position.north, up=fixed_up)
        return position, {
            "method": "fingerprint",
            "scores": result.scores,
            "subset_size": len(rows),
            "d_min": config.fingerprint_d_min,
        }
    else:
        model = config.path_loss[infrastructure]
        ranges = np.array([rssi_to_range(value, model) for value in values])
        range_sigmas = ranges * model.relative_range_sigma
        measurements = list(zip(positions, ranges))
        if config.terrestrial_method == "weighted_centroid":
            solution = solve_weighted_ls(measurements, fixed_up=fixed_up)
        else:
            solution = solve_range_ls(measurements, fixed_up=fixed_up)

    diagnostics: Dict[str, object] = {
        "method": solution.method,
        "residual": solution.residual,
        "degenerate": solution.degenerate,
        "spread": solution.spread,
        "mean_range": float(np.mean(ranges)),
        "subset_size": len(rows),
        "geometry_sigma": _geometry_sigma(positions, solution.position, range_sigmas),
    }
    if solution.method == "range_ls":
        relative = config.path_loss[infrastructure].relative_range_sigma
        diagnostics["chi2"] = solution.residual / relative ** 2
        diagnostics["dof"] = len(rows) - 2
    return solution.position, diagnostics


def _check_consistency(diagnostics: Mapping[str, object], config: PositioningConfig):
    if config.consistency_false_alarm is None or "chi2" not in diagnostics:
        return
    statistic, dof = float(diagnostics["chi2"]), int(diagnostics["dof"])
    if not residual_consistent(statistic, dof, config.consistency_false_alarm):
        raise InconsistentSubsetError(f"residual statistic {statistic:.4g} exceeds the bound for {dof} dof")


def evaluate_subsets(
    resolved: ResolvedEpoch,
    specs: Sequence[SubsetSpec],
    config: PositioningConfig,
    sigma_min: float = 1.0,
    fingerprints: Optional[FingerprintDb] = None,
) -> Tuple[List[SubsetEstimate], List[SubsetFailure]]:
    """Solve every subset; failed or inconsistent solves are logged and recorded, never raised.

    With a configured false-alarm probability, overdetermined GNSS and
    range least squares subsets must pass a chi-square test on their
    residuals weighted by the measurement noise model.
    """
    estimates: List[SubsetEstimate] = []
    failures: List[SubsetFailure] = []
    indices = {infra: group.index_of() for infra, group in resolved.groups.items()}
    fixed_up = config.receiver_up if config.receiver_up is not None else resolved.fixed_up

    for spec in specs:
        group = resolved.groups.get(spec.infrastructure)
        try:
            if group is None or any(member not in indices[spec.infrastructure] for member in spec.members):
                raise InsufficientDataError("subset member has no measurement")
            rows = [indices[spec.infrastructure][member] for member in spec.members]
            position, diagnostics = _solve_subset(spec, group, rows, config, fixed_up, fingerprints)
            _check_consistency(diagnostics, config)
            uncertainty = subset_uncertainty(
                diagnostics, spec.infrastructure, sigma_min=sigma_min, unit_range_error=config.gnss_uere_m
            )
            estimates.append(
                SubsetEstimate(
                    spec=spec,
                    position=position,
                    raw_position=position,
                    uncertainty=uncertainty,
                    diagnostics=diagnostics,
                )
            )
        except (XraimError, ValidationError, np.linalg.LinAlgError) as e:
            reason = _failure_reason(e) if not isinstance(e, ValidationError) else "non-finite solution"
            logger.debug(
                "Subset {}#{} at {} failed: {}", spec.infrastructure.value, spec.index, resolved.time, reason
            )
            failures.append(SubsetFailure(spec=spec, reason=reason))
    return estimates, failures
