"""
Motion propagation and the motion-constrained local polynomial smoother.

Each subset keeps its own short position track. At every epoch the track is
fitted with a kernel-weighted polynomial in time, and the fitted value at
the current epoch must stay within a tolerance ball around the position
predicted from onboard motion sensing.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .config import FilterConfig
from .models import EnuPoint, Infrastructure, MotionSample, SubsetEstimate, Vector3, wrap_angle

TrackKey = Tuple[Infrastructure, Tuple[str, ...]]


class KinematicState(BaseModel):
    """Position in ENU plus body-frame velocity, acceleration and orientation."""

    position: EnuPoint
    velocity: Vector3 = Field(default=(0.0, 0.0, 0.0), description="Body-frame m/s")
    acceleration: Vector3 = Field(default=(0.0, 0.0, 0.0), description="Body-frame m/s^2")
    orientation: Vector3 = Field(default=(0.0, 0.0, 0.0), description="Roll, pitch, yaw in radians")

    @field_validator("orientation")
    @classmethod
    def wrap_orientation(cls, v):
        return tuple(wrap_angle(a) for a in v)

    @classmethod
    def from_motion(cls, position: EnuPoint, motion: MotionSample) -> "KinematicState":
        return cls(
            position=position,
            velocity=motion.velocity,
            acceleration=motion.acceleration,
            orientation=motion.orientation,
        )

    model_config = ConfigDict(frozen=True)


@dataclass
class PolyFit:
    """Result of one constrained local polynomial fit.

    coefficients has one row per power of the scaled time (intercept first)
    and one column per ENU axis, so the smoothed position is its first row.
    """

    coefficients: Optional[np.ndarray]
    order: int
    window: int
    kernel_decay: float
    smoothed: EnuPoint
    objective: float = 0.0
    residual_axes: np.ndarray = field(default_factory=lambda: np.zeros(3))
    constrained: bool = False
    fallback: bool = False


@dataclass
class TrackPoint:
    time: int
    position: np.ndarray
    filled: bool = False


def rotation_matrix(orientation: Sequence[float]) -> np.ndarray:
    """Body (right, forward, up) to ENU rotation R = R_roll R_pitch R_yaw.

    Yaw is a compass heading, clockwise from north; pitch turns about the
    right axis and roll about the forward axis.
    """
    roll, pitch, yaw = (float(a) for a in orientation)
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    r_roll = np.array([[cr, 0.0, sr], [0.0, 1.0, 0.0], [-sr, 0.0, cr]])
    r_pitch = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    r_yaw = np.array([[cy, sy, 0.0], [-sy, cy, 0.0], [0.0, 0.0, 1.0]])
    return r_roll @ r_pitch @ r_yaw


def propagate_state(state: KinematicState, dt: float = 1.0) -> Tuple[EnuPoint, np.ndarray]:
    """Predict (position, body velocity) one step of dt seconds ahead.

    p' = p + R v dt + 1/2 R a dt^2 and v' = v + a dt.
    """
    rotation = rotation_matrix(state.orientation)
    velocity = np.asarray(state.velocity, dtype=float)
    acceleration = np.asarray(state.acceleration, dtype=float)
    position = state.position.as_array() + rotation @ velocity * dt + 0.5 * rotation @ acceleration * dt * dt
    return EnuPoint.from_array(position), velocity + acceleration * dt


def kernel_weights(deltas: np.ndarray, decay: float) -> np.ndarray:
    return np.exp(-decay * np.asarray(deltas, dtype=float) ** 2)


def _vandermonde(deltas: np.ndarray, order: int) -> np.ndarray:
    span = max(-float(np.min(deltas)), 1.0)
    return np.vander(deltas / span, order + 1, increasing=True)


def poly_objective(coefficients: np.ndarray, deltas: np.ndarray, positions: np.ndarray, decay: float) -> float:
    """Kernel-weighted squared error of a coefficient matrix over a window."""
    order = coefficients.shape[0] - 1
    residuals = _vandermonde(np.asarray(deltas, dtype=float), order) @ coefficients - positions
    return float(np.sum(kernel_weights(deltas, decay) * np.sum(residuals ** 2, axis=1)))


def fit_constrained_poly(
    deltas: Sequence[float],
    positions: np.ndarray,
    constraint: Optional[EnuPoint] = None,
    epsilon: float = 3.0,
    order: int = 2,
    kernel_decay: float = 0.3,
    window: Optional[int] = None,
) -> PolyFit:
    """Fit a kernel-weighted polynomial and evaluate it at delta 0.

    deltas are sample times relative to the current epoch, in epochs (<= 0).
    The fit minimizes sum K(delta) ||W tau - p||^2 subject to
    ||W(0) - constraint|| <= epsilon. The objective restricted to the
    intercept is isotropic with curvature 1/(H^-1)_00, so the constrained
    optimum projects the free intercept onto the ball and moves the other
    coefficients along H^-1 e_0.
    """
    deltas = np.asarray(deltas, dtype=float)
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    window = window if window is not None else len(deltas)

    def fallback() -> PolyFit:
        latest = positions[int(np.argmax(deltas))] if len(deltas) else np.zeros(3)
        return PolyFit(None, order, window, kernel_decay, EnuPoint.from_array(latest), fallback=True)

    if len(np.unique(deltas)) < order + 1:
        return fallback()

    design = _vandermonde(deltas, order)
    weights = kernel_weights(deltas, kernel_decay)
    hessian = design.T @ (weights[:, None] * design)
    try:
        factor = cho_factor(hessian)
    except LinAlgError:
        logger.debug("Local polynomial normal matrix is not positive definite")
        return fallback()
    coefficients = cho_solve(factor, design.T @ (weights[:, None] * positions))

    constrained = False
    if constraint is not None:
        target = constraint.as_array()
        offset = coefficients[0] - target
        distance = float(np.linalg.norm(offset))
        if distance > epsilon:
            projected = target + (epsilon / distance) * offset if epsilon > 0.0 else target
            unit = np.zeros(order + 1)
            unit[0] = 1.0
            direction = cho_solve(factor, unit)
            coefficients = coefficients + np.outer(direction / direction[0], projected - coefficients[0])
            coefficients[0] = projected
            constrained = True

    residuals = design @ coefficients - positions
    residual_axes = np.sqrt(np.sum(weights[:, None] * residuals ** 2, axis=0) / np.sum(weights))
    return PolyFit(
        coefficients=coefficients,
        order=order,
        window=window,
        kernel_decay=kernel_decay,
        smoothed=EnuPoint.from_array(coefficients[0]),
        objective=float(np.sum(weights * np.sum(residuals ** 2, axis=1))),
        residual_axes=residual_axes,
        constrained=constrained,
    )


def backfill_track(
    track: Mapping[int, Optional[np.ndarray]],
    verified: Mapping[int, EnuPoint],
    window_times: Optional[Sequence[int]] = None,
) -> List[TrackPoint]:
    """Complete a subset track with verified fused positions where the subset has no fix.

    Epochs with neither a fix nor a verified position stay open, which
    shrinks the usable window.
    """
    times = list(window_times) if window_times is not None else sorted(track)
    points = []
    for time in times:
        position = track.get(time)
        if position is not None:
            points.append(TrackPoint(time=time, position=np.asarray(position, dtype=float)))
        elif time in verified:
            points.append(TrackPoint(time=time, position=verified[time].as_array(), filled=True))
    return points


class SubsetTrackStore:
    """Per-subset position histories and the smoothing step applied to new estimates."""

    def __init__(self, config: FilterConfig, sigma_min: float = 1.0):
        self.config = config
        self.sigma_min = sigma_min
        self._raw: Dict[TrackKey, Dict[int, np.ndarray]] = {}
        self._smoothed: Dict[TrackKey, Tuple[int, EnuPoint]] = {}

    def __len__(self) -> int:
        return len(self._raw)

    def track(self, key: TrackKey) -> Dict[int, np.ndarray]:
        return dict(self._raw.get(key, {}))

    def record(self, key: TrackKey, time: int, position: EnuPoint):
        self._raw.setdefault(key, {})[time] = position.as_array()

    def prune(self, window_times: Sequence[int]):
        """Forget fixes outside the window and subsets with no fix left in it."""
        if not window_times:
            return
        oldest = window_times[0]
        for key in list(self._raw):
            kept = {t: p for t, p in self._raw[key].items() if t >= oldest}
            if kept:
                self._raw[key] = kept
            else:
                del self._raw[key]
                self._smoothed.pop(key, None)

    def _constraint(
        self,
        key: TrackKey,
        now: int,
        window_times: Sequence[int],
        verified: Mapping[int, EnuPoint],
        motion: Optional[MotionSample],
    ) -> Optional[EnuPoint]:
        if motion is None:
            return None
        start: Optional[Tuple[int, EnuPoint]] = self._smoothed.get(key)
        if start is None and len(window_times) >= 2 and window_times[-2] in verified:
            start = (window_times[-2], verified[window_times[-2]])
        if start is None or start[0] >= now:
            return None
        dt = (now - start[0]) / 1000.0
        predicted, _ = propagate_state(KinematicState.from_motion(start[1], motion), dt)
        return predicted

    def update(
        self,
        estimate: SubsetEstimate,
        window_times: Sequence[int],
        verified: Mapping[int, EnuPoint],
        motion: Optional[MotionSample] = None,
    ) -> SubsetEstimate:
        """Record a raw estimate and return it smoothed over its window.

        The smoothed estimate keeps the larger of its solver uncertainty and
        the per-axis fit residual.

        window_times are the epoch times of the window, oldest first, ending
        at the current epoch; motion is the sample of the previous epoch.
        """
        key = estimate.spec.key
        now = window_times[-1]
        self.record(key, now, estimate.raw_position)

        points = backfill_track(self._raw[key], verified, window_times)
        epoch_ms = self.config.epoch_seconds * 1000.0
        deltas = np.array([(point.time - now) / epoch_ms for point in points])
        positions = np.vstack([point.position for point in points])
        constraint = self._constraint(key, now, window_times, verified, motion)

        fit = fit_constrained_poly(
            deltas,
            positions,
            constraint=constraint,
            epsilon=self.config.tolerance,
            order=self.config.order,
            kernel_decay=self.config.kernel_decay,
            window=self.config.window,
        )
        diagnostics = dict(estimate.diagnostics)
        diagnostics["filled_points"] = sum(point.filled for point in points)
        if fit.fallback:
            diagnostics["filter"] = "fallback"
            self._smoothed[key] = (now, estimate.raw_position)
            return estimate.model_copy(
                update={
                    "uncertainty": tuple(float(s) * self.config.fallback_inflation for s in estimate.uncertainty),
                    "diagnostics": diagnostics,
                }
            )

        diagnostics["filter"] = "constrained" if fit.constrained else "free"
        diagnostics["poly_residual"] = [float(r) for r in fit.residual_axes]
        self._smoothed[key] = (now, fit.smoothed)
        return estimate.model_copy(
            update={
                "position": fit.smoothed,
                "uncertainty": tuple(
                    max(float(s), float(r), self.sigma_min) for s, r in zip(estimate.uncertainty, fit.residual_axes)
                ),
                "diagnostics": diagnostics,
                "filtered": True,
            }
        )
