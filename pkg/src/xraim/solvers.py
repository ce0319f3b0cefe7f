"""
Positioning solvers for a single anchor subset.

Every solver works in local ENU meters and is a pure function of its inputs:
GNSS trilateration with a receiver clock term, the weighted least squares of
inverse squared ranges, a range-residual least squares for terrestrial anchors,
the GeoIP circle-intersection centroid and RSSI fingerprint matching.
"""

from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.optimize import least_squares
from scipy.stats import chi2

from .config import PathLossModel, PhysicalConstants
from .exceptions import (
    ConvergenceError,
    InsufficientDataError,
    InvalidArgumentError,
    SingularGeometryError,
)
from .models import EnuPoint, FingerprintDb

PositionLike = Union[EnuPoint, Sequence[float], np.ndarray]
RangePair = Tuple[PositionLike, float]

# Ranges at or below this are treated as "at the anchor".
RANGE_FLOOR_M = 1e-6


@dataclass(frozen=True)
class Dop:
    """Dilution of precision components taken from the diagonal of (A^T A)^-1."""

    sigma_x: float
    sigma_y: float
    sigma_z: float
    sigma_t: float = 0.0

    @property
    def spatial(self) -> float:
        return float(np.sqrt(self.sigma_x ** 2 + self.sigma_y ** 2 + self.sigma_z ** 2))

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return self.sigma_x, self.sigma_y, self.sigma_z, self.sigma_t


@dataclass(frozen=True)
class GnssSolution:
    position: EnuPoint
    clock_bias: float
    residuals: np.ndarray
    dop: Dop
    iterations: int


@dataclass(frozen=True)
class LsSolution:
    position: EnuPoint
    residual: float
    degenerate: bool = False
    method: str = "weighted_centroid"
    spread: Optional[float] = None
    iterations: int = 0


@dataclass(frozen=True)
class FingerprintResult:
    position: EnuPoint
    scores: List[float]
    entry_indices: List[int] = field(default_factory=list)


def _as_vector(position: PositionLike) -> np.ndarray:
    if isinstance(position, EnuPoint):
        return position.as_array()
    vector = np.asarray(position, dtype=float)
    if vector.shape == (2,):
        vector = np.append(vector, 0.0)
    return vector


def _unzip(measurements: Sequence[RangePair]) -> Tuple[np.ndarray, np.ndarray]:
    if len(measurements) == 0:
        return np.zeros((0, 3)), np.zeros(0)
    positions = np.vstack([_as_vector(position) for position, _ in measurements])
    ranges = np.array([float(value) for _, value in measurements])
    if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(ranges))):
        raise InvalidArgumentError("Anchor positions and ranges must be finite")
    return positions, ranges


def rssi_to_range(rssi: float, model: PathLossModel) -> float:
    """Invert the log-distance path loss model: d = d0 * 10^((P0 - rssi) / (10 n))."""
    return model.range_for(rssi)


def rtt_to_range(value: float, gamma: float) -> float:
    """Calibrated GeoIP distance from an RTT already expressed as c/2 * rtt meters."""
    if not 0.0 < gamma <= 1.0:
        raise InvalidArgumentError(f"gamma must lie in (0, 1], got {gamma}")
    return gamma * value


def gnss_design_matrix(anchors: np.ndarray, position: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Rows [-(alpha - p)/r, 1] of the linearized pseudorange model, plus the ranges r."""
    delta = anchors - position
    ranges = np.linalg.norm(delta, axis=1)
    if np.any(ranges == 0.0):
        raise SingularGeometryError("Receiver coincides with a satellite")
    design = np.ones((len(anchors), 4))
    design[:, :3] = -delta / ranges[:, None]
    return design, ranges


def compute_dop(design_matrix: np.ndarray) -> Dop:
    """DOP from Q = (A^T A)^-1; components are square roots of its diagonal."""
    design = np.asarray(design_matrix, dtype=float)
    if design.ndim != 2 or design.shape[1] not in (3, 4):
        raise InvalidArgumentError(f"Design matrix must have 3 or 4 columns, got shape {design.shape}")
    columns = design.shape[1]
    if design.shape[0] < columns or np.linalg.matrix_rank(design) < columns:
        raise SingularGeometryError("A^T A is singular")
    q = np.linalg.inv(design.T @ design)
    diagonal = np.diag(q)
    if np.any(diagonal <= 0.0) or not np.all(np.isfinite(diagonal)):
        raise SingularGeometryError("A^T A is numerically singular")
    sigmas = np.sqrt(diagonal)
    return Dop(
        sigma_x=float(sigmas[0]),
        sigma_y=float(sigmas[1]),
        sigma_z=float(sigmas[2]),
        sigma_t=float(sigmas[3]) if columns == 4 else 0.0,
    )


def planar_position_sigma(anchors: np.ndarray, position: PositionLike, range_sigmas: np.ndarray) -> float:
    """Largest horizontal standard deviation of a range fix, sqrt(max diag((G^T W G)^-1)).

    G holds the horizontal components of the unit anchor-to-receiver
    directions and W the inverse range variances.
    """
    anchors = np.asarray(anchors, dtype=float)
    sigmas = np.asarray(range_sigmas, dtype=float)
    if np.any(sigmas <= 0.0) or not np.all(np.isfinite(sigmas)):
        raise InvalidArgumentError("Range sigmas must be positive and finite")
    delta = _as_vector(position) - anchors
    distances = np.linalg.norm(delta, axis=1)
    if np.any(distances == 0.0):
        raise SingularGeometryError("Receiver coincides with an anchor")
    design = delta[:, :2] / (distances * sigmas)[:, None]
    normal = design.T @ design
    if np.linalg.matrix_rank(normal) < 2:
        raise SingularGeometryError("Anchor directions do not span the horizontal plane")
    return float(np.sqrt(np.max(np.diag(np.linalg.inv(normal)))))


def residual_consistent(statistic: float, dof: int, false_alarm: float) -> bool:
    """Chi-square residual test; subsets without redundancy always pass."""
    if not 0.0 < false_alarm < 1.0:
        raise InvalidArgumentError(f"False-alarm probability must lie in (0, 1), got {false_alarm}")
    if dof <= 0:
        return True
    return bool(statistic <= chi2.ppf(1.0 - false_alarm, dof))


def _lorentz(a: np.ndarray, b: np.ndarray) -> float:
    return float(a[:3] @ b[:3] - a[3] * b[3])


def _surface_distance(position: np.ndarray) -> float:
    center = np.array([0.0, 0.0, -PhysicalConstants.EARTH_MEAN_RADIUS])
    return abs(float(np.linalg.norm(position - center)) - PhysicalConstants.EARTH_MEAN_RADIUS)


def bancroft_fix(anchors: np.ndarray, ranges: np.ndarray) -> Optional[np.ndarray]:
    """Closed-form (east, north, up, clock) from four or more pseudoranges.

    Both roots of the Lorentz quadratic solve the system; the one nearer the
    earth surface is kept. Returns None when the geometry has no real root.
    """
    rows = np.column_stack([anchors, ranges])
    half_norms = np.array([_lorentz(row, row) / 2.0 for row in rows])
    pseudo_inverse = np.linalg.pinv(rows)
    g = pseudo_inverse @ half_norms
    h = pseudo_inverse @ np.ones(len(ranges))

    a = _lorentz(h, h)
    b = 2.0 * (_lorentz(g, h) - 1.0)
    c = _lorentz(g, g)
    if abs(a) < np.finfo(float).tiny:
        roots = [-c / b] if b != 0.0 else []
    else:
        discriminant = max(b * b - 4.0 * a * c, 0.0)
        roots = [(-b + sign * np.sqrt(discriminant)) / (2.0 * a) for sign in (1.0, -1.0)]

    candidates = []
    for root in roots:
        solution = g + root * h
        if np.all(np.isfinite(solution)):
            candidates.append(np.array([solution[0], solution[1], solution[2], -solution[3]]))
    if not candidates:
        return None
    return min(candidates, key=lambda state: _surface_distance(state[:3]))


def _gnss_refine(
    anchors: np.ndarray, ranges: np.ndarray, state: np.ndarray, max_evaluations: int
) -> Tuple[np.ndarray, int]:
    def residuals(x: np.ndarray) -> np.ndarray:
        return np.linalg.norm(anchors - x[:3], axis=1) + x[3] - ranges

    def jacobian(x: np.ndarray) -> np.ndarray:
        return gnss_design_matrix(anchors, x[:3])[0]

    result = least_squares(
        residuals, state, jac=jacobian, method="lm", xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=max_evaluations
    )
    if not result.success:
        raise ConvergenceError(f"Pseudorange refinement failed: {result.message}", iterations=int(result.nfev))
    return result.x, int(result.nfev)


def solve_gnss_ls(
    pseudoranges: Sequence[RangePair],
    max_iterations: int = 20,
    step_tolerance: float = 1e-8,
    initial: Optional[PositionLike] = None,
) -> GnssSolution:
    """Gauss-Newton solution of rho_j = ||p - alpha_j|| + b.

    Starts from the closed-form Bancroft fix unless an initial position is
    given. When the step does not settle within max_iterations, a
    Levenberg-Marquardt refinement takes over from the last iterate.
    Raises SingularGeometryError for rank-deficient geometry and
    ConvergenceError when neither method converges.
    """
    anchors, ranges = _unzip(pseudoranges)
    if len(ranges) < 4:
        raise InsufficientDataError(f"GNSS positioning needs 4 pseudoranges, got {len(ranges)}")

    state = np.zeros(4)
    if initial is not None:
        state[:3] = _as_vector(initial)
    else:
        closed_form = bancroft_fix(anchors, ranges)
        if closed_form is None:
            raise SingularGeometryError("Pseudoranges admit no closed-form fix")
        state = closed_form
    # the step tolerance cannot go below the float resolution of the ranges
    tolerance = max(step_tolerance, 64.0 * np.finfo(float).eps * float(np.max(np.abs(ranges))))

    for iteration in range(1, max_iterations + 1):
        design, predicted = gnss_design_matrix(anchors, state[:3])
        innovation = ranges - (predicted + state[3])
        step, _, rank, _ = np.linalg.lstsq(design, innovation, rcond=None)
        if rank < 4:
            raise SingularGeometryError(f"Design matrix has rank {rank} < 4")
        state = state + step
        if np.linalg.norm(step[:3]) < tolerance:
            break
    else:
        logger.debug("Gauss-Newton did not settle in {} iterations, refining", max_iterations)
        state, evaluations = _gnss_refine(anchors, ranges, state, max_evaluations=50 * max_iterations)
        iteration = max_iterations + evaluations

    design, predicted = gnss_design_matrix(anchors, state[:3])
    residuals = ranges - (predicted + state[3])
    return GnssSolution(
        position=EnuPoint.from_array(state[:3]),
        clock_bias=float(state[3]),
        residuals=residuals,
        dop=compute_dop(design),
        iterations=iteration,
    )


def _is_collinear(anchors: np.ndarray) -> bool:
    horizontal = anchors[:, :2] - anchors[:, :2].mean(axis=0)
    singular_values = np.linalg.svd(horizontal, compute_uv=False)
    if singular_values.size < 2:
        return True
    return bool(singular_values[1] <= 1e-9 * max(singular_values[0], 1.0))


def _checked_ranges(ranges: np.ndarray) -> np.ndarray:
    if np.any(ranges < 0.0):
        raise InvalidArgumentError("Ranges must be non-negative")
    return np.maximum(ranges, RANGE_FLOOR_M)


def weighted_ls_objective(position: PositionLike, measurements: Sequence[RangePair]) -> float:
    """Sum of (||p - alpha_j|| / rho_j)^2."""
    anchors, ranges = _unzip(measurements)
    ranges = _checked_ranges(ranges)
    distances = np.linalg.norm(anchors - _as_vector(position), axis=1)
    return float(np.sum((distances / ranges) ** 2))


def range_ls_objective(position: PositionLike, measurements: Sequence[RangePair]) -> float:
    """Sum of ((||p - alpha_j|| - rho_j) / rho_j)^2."""
    anchors, ranges = _unzip(measurements)
    ranges = _checked_ranges(ranges)
    distances = np.linalg.norm(anchors - _as_vector(position), axis=1)
    return float(np.sum(((distances - ranges) / ranges) ** 2))


def solve_weighted_ls(measurements: Sequence[RangePair], fixed_up: float = 0.0) -> LsSolution:
    """Minimize sum (||p - alpha_j|| / rho_j)^2 over the horizontal position.

    The objective is quadratic in p, so the minimizer is the weighted centroid
    of the anchors with weights 1 / rho_j^2, solved here as a stacked linear
    least squares problem.
    """
    anchors, ranges = _unzip(measurements)
    if len(ranges) < 3:
        raise InsufficientDataError(f"Weighted least squares needs 3 ranges, got {len(ranges)}")
    ranges = _checked_ranges(ranges)

    scale = 1.0 / ranges
    system = np.kron(scale[:, None], np.eye(2))
    target = (anchors[:, :2] * scale[:, None]).reshape(-1)
    horizontal, *_ = np.linalg.lstsq(system, target, rcond=None)
    position = np.array([horizontal[0], horizontal[1], fixed_up])

    distances = np.linalg.norm(anchors - position, axis=1)
    return LsSolution(
        position=EnuPoint.from_array(position),
        residual=float(np.sum((distances / ranges) ** 2)),
        degenerate=_is_collinear(anchors),
        method="weighted_centroid",
    )


def _range_refine(
    anchors: np.ndarray,
    ranges: np.ndarray,
    start: np.ndarray,
    fixed_up: float,
    max_evaluations: int,
    tolerance: float,
) -> Tuple[np.ndarray, float, int]:
    def deltas(horizontal: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        delta = np.column_stack([horizontal[0] - anchors[:, 0], horizontal[1] - anchors[:, 1],
                                 fixed_up - anchors[:, 2]])
        return delta, np.maximum(np.linalg.norm(delta, axis=1), 1e-12)

    def residuals(horizontal: np.ndarray) -> np.ndarray:
        _, distances = deltas(horizontal)
        return (distances - ranges) / ranges

    def jacobian(horizontal: np.ndarray) -> np.ndarray:
        delta, distances = deltas(horizontal)
        return delta[:, :2] / (distances * ranges)[:, None]

    result = least_squares(
        residuals, start.astype(float), jac=jacobian, method="lm",
        xtol=tolerance, ftol=tolerance, gtol=tolerance, max_nfev=max_evaluations,
    )
    if not result.success:
        logger.debug("Range refinement stopped early: {}", result.message)
    return result.x, float(result.fun @ result.fun), int(result.nfev)


def solve_range_ls(
    measurements: Sequence[RangePair],
    fixed_up: float = 0.0,
    max_evaluations: int = 200,
    tolerance: float = 1e-12,
) -> LsSolution:
    """Minimize sum ((||p - alpha_j|| - rho_j) / rho_j)^2 over the horizontal position.

    Levenberg-Marquardt refinement started from the inverse-square weighted
    centroid and from the plain anchor centroid; the lower cost wins.
    """
    anchors, ranges = _unzip(measurements)
    if len(ranges) < 3:
        raise InsufficientDataError(f"Range least squares needs 3 ranges, got {len(ranges)}")
    ranges = _checked_ranges(ranges)

    starts = [
        solve_weighted_ls(measurements, fixed_up).position.as_array()[:2],
        anchors[:, :2].mean(axis=0),
    ]
    best: Optional[Tuple[np.ndarray, float, int]] = None
    for start in starts:
        candidate = _range_refine(anchors, ranges, start, fixed_up, max_evaluations, tolerance)
        if best is None or candidate[1] < best[1]:
            best = candidate
    horizontal, cost, iterations = best
    return LsSolution(
        position=EnuPoint(east=float(horizontal[0]), north=float(horizontal[1]), up=fixed_up),
        residual=cost,
        degenerate=_is_collinear(anchors),
        method="range_ls",
        iterations=iterations,
    )


def solve_geoip(
    measurements: Sequence[RangePair],
    resolution: Optional[float] = None,
    grid_points: int = 120,
    fixed_up: float = 0.0,
    max_points_per_axis: int = 2000,
) -> LsSolution:
    """Centroid of the region inside every circle (anchor, distance).

    The region is sampled on a regular grid over the intersection of the
    circles' bounding boxes. An empty region falls back to the weighted least
    squares solution with the degeneracy marker set.
    """
    anchors, ranges = _unzip(measurements)
    if len(ranges) < 3:
        raise InsufficientDataError(f"GeoIP positioning needs 3 RTT distances, got {len(ranges)}")
    centers = anchors[:, :2]

    lower = np.max(centers - ranges[:, None], axis=0)
    upper = np.min(centers + ranges[:, None], axis=0)
    inside = np.zeros((0, 2))
    if np.all(lower <= upper):
        extent = float(np.max(upper - lower))
        step = resolution if resolution is not None else max(extent / grid_points, 1e-9)
        step = max(step, extent / max_points_per_axis)
        axes = [np.arange(lo + step / 2.0, max(hi, lo + step / 2.0) + 1e-12, step)
                for lo, hi in zip(lower, upper)]
        grid_x, grid_y = np.meshgrid(axes[0], axes[1], indexing="ij")
        samples = np.column_stack([grid_x.ravel(), grid_y.ravel()])
        squared = np.sum((samples[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        inside = samples[np.all(squared <= ranges[None, :] ** 2, axis=1)]

    if len(inside) == 0:
        logger.debug("GeoIP circles do not intersect; falling back to weighted least squares")
        fallback = solve_weighted_ls(measurements, fixed_up)
        return LsSolution(
            position=fallback.position,
            residual=range_ls_objective(fallback.position, measurements),
            degenerate=True,
            method="geoip_fallback",
        )

    centroid = inside.mean(axis=0)
    spread = float(np.sqrt(np.mean(np.sum((inside - centroid) ** 2, axis=1))))
    position = EnuPoint(east=float(centroid[0]), north=float(centroid[1]), up=fixed_up)
    return LsSolution(
        position=position,
        residual=range_ls_objective(position, measurements),
        degenerate=_is_collinear(anchors),
        method="geoip",
        spread=spread,
    )


def fingerprint_scores(query: Mapping[str, float], db: FingerprintDb, d_min: float) -> np.ndarray:
    """Similarity of every entry: sum over shared anchors of 1 / max(|rssi - rssi'|, d_min)."""
    scores = np.zeros(len(db.entries))
    for index, entry in enumerate(db.entries):
        total = 0.0
        for anchor_id, rssi in query.items():
            stored = entry.rssi.get(anchor_id)
            if stored is not None:
                total += 1.0 / max(abs(rssi - stored), d_min)
        scores[index] = total
    return scores


def fingerprint_position(
    query: Mapping[str, float], db: FingerprintDb, k: int = 3, d_min: float = 1.0
) -> FingerprintResult:
    """Score-weighted average of the K most similar fingerprints."""
    if k < 1:
        raise InvalidArgumentError(f"K must be at least 1, got {k}")
    if d_min <= 0.0:
        raise InvalidArgumentError(f"d_min must be positive, got {d_min}")
    if len(db) == 0:
        raise InsufficientDataError("Fingerprint database is empty")

    scores = fingerprint_scores(query, db, d_min)
    # stable sort keeps the lower entry index first among equal scores
    order = np.argsort(-scores, kind="stable")[: min(k, len(scores))]
    top = scores[order]
    if top.sum() <= 0.0:
        raise InsufficientDataError("No fingerprint shares an anchor with the query")
    positions = np.vstack([db.entries[i].position.as_array() for i in order])
    estimate = (top[:, None] * positions).sum(axis=0) / top.sum()
    return FingerprintResult(
        position=EnuPoint.from_array(estimate),
        scores=[float(s) for s in top],
        entry_indices=[int(i) for i in order],
    )
