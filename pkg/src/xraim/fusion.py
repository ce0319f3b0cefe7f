"""
Attack scoring, exclusion and recovery over subset estimates.

Each subset estimate is an axis-aligned Gaussian. The attack likelihood is
one minus the geometric mean (per infrastructure, then across
infrastructures) of the peak-normalized densities at the reported position.
Exclusion repeatedly drops estimates far from the fused position until the
surviving set stops changing.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
from loguru import logger

from .exceptions import InsufficientDataError, InvalidArgumentError, NoDataError
from .models import (
    EnuPoint,
    Infrastructure,
    SubsetDensity,
    SubsetDeviation,
    SubsetEstimate,
    SubsetSpec,
    Vector3,
)

LS_METHODS = ("range_ls", "weighted_centroid", "geoip", "geoip_fallback")
DEGENERATE_INFLATION = 10.0
DEFAULT_LAMBDA_GRID = np.linspace(0.0, 1.0, 101)


def subset_uncertainty(
    diagnostics: Mapping[str, Any],
    infrastructure: Infrastructure,
    sigma_min: float = 1.0,
    unit_range_error: float = 1.0,
) -> Vector3:
    """Per-axis standard deviation of a subset estimate, floored at sigma_min.

    GNSS uses spatial DOP times the range error: the reported sigma (else the
    configured unit range error), raised to the redundancy-corrected residual
    RMS of overdetermined subsets. Least squares maps the dimensionless
    residual to meters via sqrt(residual / |S|) * mean range and never goes
    below the geometry-propagated range noise or the GeoIP spread. Fingerprinting
    inverts the mean similarity so an exact match maps to sigma_min.
    Anything else uses the polynomial residual when present.
    """
    method = diagnostics.get("method")
    if method == "gnss_ls":
        range_error = diagnostics.get("mean_sigma") or unit_range_error
        size = int(diagnostics.get("subset_size", 4))
        if size > 4 and diagnostics.get("residual_rms") is not None:
            range_error = max(range_error, float(diagnostics["residual_rms"]) * np.sqrt(size / (size - 4)))
        sigma = float(diagnostics["dop_spatial"]) * range_error
        return (max(sigma, sigma_min),) * 3

    if method in LS_METHODS:
        size = max(int(diagnostics.get("subset_size", 1)), 1)
        sigma = np.sqrt(max(float(diagnostics["residual"]), 0.0) / size) * float(diagnostics["mean_range"])
        for floor in ("spread", "geometry_sigma"):
            if diagnostics.get(floor) is not None:
                sigma = max(sigma, float(diagnostics[floor]))
        sigma = max(sigma, sigma_min)
        if diagnostics.get("degenerate"):
            sigma *= DEGENERATE_INFLATION
        return (sigma,) * 3

    if method == "fingerprint":
        scores = np.asarray(diagnostics["scores"], dtype=float)
        scale = sigma_min * int(diagnostics["subset_size"]) / float(diagnostics["d_min"])
        mean_score = float(scores.mean()) if scores.size else 0.0
        sigma = scale / mean_score if mean_score > 0.0 else float("inf")
        if not np.isfinite(sigma):
            raise InvalidArgumentError("Fingerprint scores must be positive")
        return (max(sigma, sigma_min),) * 3

    residual = diagnostics.get("poly_residual")
    if residual is not None:
        return tuple(max(float(r), sigma_min) for r in residual)
    logger.debug("No uncertainty model for {} diagnostics, using the floor", infrastructure.value)
    return (sigma_min,) * 3


def density_of(estimate: SubsetEstimate) -> SubsetDensity:
    return SubsetDensity(mean=estimate.position, sigma=estimate.uncertainty)


def log_normalized_density(density: SubsetDensity, point: EnuPoint) -> float:
    z = (point.as_array() - density.mean.as_array()) / np.asarray(density.sigma, dtype=float)
    return float(-0.5 * np.dot(z, z))


def normalized_density(density: SubsetDensity, point: EnuPoint) -> float:
    """Gaussian density at point divided by its peak value, in (0, 1]."""
    return float(np.exp(log_normalized_density(density, point)))


def attack_likelihood(
    densities: Mapping[Infrastructure, Sequence[SubsetDensity]], point: EnuPoint
) -> float:
    """f_t = 1 - geometric mean over infrastructures of the geometric mean over subsets.

    Infrastructures without subsets do not count towards M.
    """
    per_infrastructure = [
        np.mean([log_normalized_density(density, point) for density in group])
        for group in densities.values()
        if len(group) > 0
    ]
    if not per_infrastructure:
        raise NoDataError("No subset densities to score")
    score = 1.0 - float(np.exp(np.mean(per_infrastructure)))
    return min(max(score, 0.0), 1.0)


def decide_alarm(score: float, lambda_f: float) -> bool:
    """Alarm when the score strictly exceeds a threshold inside the open interval (0, 1).

    Threshold sweeps that need the endpoints compare scores directly.
    """
    if not 0.0 < lambda_f < 1.0:
        raise InvalidArgumentError(f"lambda_f must lie in (0, 1), got {lambda_f}")
    return score > lambda_f


def _weights(estimates: Sequence[SubsetEstimate], uniform: bool) -> np.ndarray:
    if uniform:
        return np.ones((len(estimates), 3))
    return 1.0 / np.array([estimate.uncertainty for estimate in estimates], dtype=float)


def preliminary_fuse(estimates: Sequence[SubsetEstimate], uniform: bool = False) -> EnuPoint:
    """Per-axis inverse-uncertainty weighted average of estimate positions."""
    if not estimates:
        raise NoDataError("No estimates to fuse")
    positions = np.array([estimate.position.as_array() for estimate in estimates])
    weights = _weights(estimates, uniform)
    return EnuPoint.from_array(np.sum(weights * positions, axis=0) / np.sum(weights, axis=0))


@dataclass
class ExclusionResult:
    preliminary: EnuPoint
    deviations: List[SubsetDeviation]
    benign: Dict[Infrastructure, List[int]]
    excluded: List[SubsetSpec]
    iterations: int
    trivial: bool = False
    survivors: List[SubsetEstimate] = field(default_factory=list)


def _benign_sets(estimates: Sequence[SubsetEstimate]) -> Dict[Infrastructure, List[int]]:
    sets: Dict[Infrastructure, List[int]] = {}
    for estimate in estimates:
        sets.setdefault(estimate.spec.infrastructure, []).append(estimate.spec.index)
    return {infra: sorted(indices) for infra, indices in sets.items()}


def exclude_inconsistent(
    estimates: Sequence[SubsetEstimate],
    n_lambda: float = 3.0,
    max_iterations: int = 20,
    uniform: bool = False,
) -> ExclusionResult:
    """Drop estimates farther than mean + n_lambda * std of the deviations, until nothing changes.

    Deviations use the population standard deviation; estimates exactly at
    the threshold survive. The survivor set is never emptied.
    """
    if not estimates:
        raise NoDataError("No estimates to check")
    if n_lambda < 0.0:
        raise InvalidArgumentError(f"n_lambda must be non-negative, got {n_lambda}")

    preliminary = preliminary_fuse(estimates, uniform)
    deviations = [
        SubsetDeviation(
            infrastructure=estimate.spec.infrastructure,
            index=estimate.spec.index,
            deviation_m=estimate.position.distance_to(preliminary),
        )
        for estimate in estimates
    ]
    if len(estimates) == 1:
        return ExclusionResult(
            preliminary=preliminary,
            deviations=deviations,
            benign=_benign_sets(estimates),
            excluded=[],
            iterations=0,
            trivial=True,
            survivors=list(estimates),
        )

    survivors = list(estimates)
    iterations = 0
    while iterations < max_iterations:
        iterations += 1
        fused = preliminary_fuse(survivors, uniform)
        distances = np.array([estimate.position.distance_to(fused) for estimate in survivors])
        threshold = distances.mean() + n_lambda * distances.std()
        kept = [estimate for estimate, distance in zip(survivors, distances) if distance <= threshold]
        if not kept:
            kept = [survivors[int(np.argmin(distances))]]
        if len(kept) == len(survivors):
            break
        survivors = kept

    surviving_keys = {(e.spec.infrastructure, e.spec.index) for e in survivors}
    excluded = [e.spec for e in estimates if (e.spec.infrastructure, e.spec.index) not in surviving_keys]
    return ExclusionResult(
        preliminary=preliminary,
        deviations=deviations,
        benign=_benign_sets(survivors),
        excluded=excluded,
        iterations=iterations,
        survivors=survivors,
    )


def recover_position(
    estimates: Sequence[SubsetEstimate],
    benign: Mapping[Infrastructure, Sequence[int]],
    uniform: bool = False,
) -> Optional[EnuPoint]:
    """Fuse only the benign subsets; None when no benign subset remains."""
    chosen = [
        estimate
        for estimate in estimates
        if estimate.spec.index in set(benign.get(estimate.spec.infrastructure, ()))
    ]
    if not chosen:
        return None
    return preliminary_fuse(chosen, uniform)


def false_positive_rate(benign_scores: Sequence[float], lambda_f: float) -> float:
    scores = np.asarray(benign_scores, dtype=float)
    return float(np.mean(scores > lambda_f)) if scores.size else 0.0


def calibrate_threshold(
    benign_scores: Sequence[float],
    target_fp: float,
    grid: Optional[Sequence[float]] = None,
) -> float:
    """Smallest grid threshold whose false-positive rate on benign scores is at most target_fp.

    Returns 1.0 with a warning when no grid value reaches the target.
    """
    if not 0.0 <= target_fp <= 1.0:
        raise InvalidArgumentError(f"Target false-positive rate must lie in [0, 1], got {target_fp}")
    scores = np.asarray(benign_scores, dtype=float)
    if scores.size == 0:
        raise InsufficientDataError("Threshold calibration needs benign scores")
    candidates = np.unique(np.asarray(grid if grid is not None else DEFAULT_LAMBDA_GRID, dtype=float))
    for lambda_f in candidates:
        if float(np.mean(scores > lambda_f)) <= target_fp:
            return float(lambda_f)
    logger.warning("No threshold in the grid reaches P_fp <= {}; using 1.0", target_fp)
    return 1.0
