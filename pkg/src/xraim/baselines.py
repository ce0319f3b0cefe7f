"""
Comparison detectors.

The distance detector checks the network position against the raw GNSS
position. The Kalman detector tracks GNSS fixes with a constant-velocity
filter aided by onboard motion and alarms on large innovations.
"""

from typing import Iterable, List, Optional, Tuple

import numpy as np
from loguru import logger

from .config import BaselineConfig, PositioningConfig
from .exceptions import XraimError
from .ingest import AnchorRegistry
from .models import BaselineDecision, EnuPoint, Epoch, GeoPoint, Infrastructure
from .motion import rotation_matrix
from .solvers import rssi_to_range, solve_gnss_ls, solve_range_ls
from .subsets import ResolvedEpoch, resolve_epoch


def gnss_fix(resolved: ResolvedEpoch) -> Optional[EnuPoint]:
    """Least-squares position from every GNSS measurement of the epoch."""
    group = resolved.groups.get(Infrastructure.GNSS)
    if group is None or len(group.ids) < Infrastructure.GNSS.min_subset_size:
        return None
    try:
        return solve_gnss_ls(list(zip(group.positions, group.values))).position
    except XraimError as e:
        logger.debug("No GNSS fix at {}: {}", resolved.time, e)
        return None


def network_fix(
    resolved: ResolvedEpoch,
    infrastructures: Iterable[Infrastructure],
    positioning: Optional[PositioningConfig] = None,
) -> Optional[EnuPoint]:
    """Multilateration over all RSSI anchors of the given infrastructures pooled together."""
    positioning = positioning or PositioningConfig()
    measurements = []
    for infrastructure in infrastructures:
        group = resolved.groups.get(infrastructure)
        if group is None:
            continue
        model = positioning.path_loss[infrastructure]
        measurements.extend(
            (position, rssi_to_range(value, model)) for position, value in zip(group.positions, group.values)
        )
    if len(measurements) < 3:
        return None
    fixed_up = positioning.receiver_up if positioning.receiver_up is not None else resolved.fixed_up
    try:
        return solve_range_ls(measurements, fixed_up=fixed_up).position
    except XraimError as e:
        logger.debug("No network fix at {}: {}", resolved.time, e)
        return None


def _horizontal_distance(a: EnuPoint, b: EnuPoint) -> float:
    return float(np.hypot(a.east - b.east, a.north - b.north))


def baseline_distance_detector(
    epochs: Iterable[Epoch],
    registry: AnchorRegistry,
    origin: GeoPoint,
    threshold_m: Optional[float] = None,
    config: Optional[BaselineConfig] = None,
    positioning: Optional[PositioningConfig] = None,
) -> List[BaselineDecision]:
    """Alarm when the network and GNSS positions lie more than threshold_m apart."""
    config = config or BaselineConfig()
    threshold = threshold_m if threshold_m is not None else config.distance_threshold_m
    receiver_up = positioning.receiver_up if positioning is not None else None
    decisions = []
    for epoch in epochs:
        resolved = resolve_epoch(epoch, registry, origin, receiver_up=receiver_up)
        satellite = gnss_fix(resolved)
        network = network_fix(resolved, config.network_infrastructures, positioning)
        if satellite is None or network is None:
            decisions.append(BaselineDecision(time=epoch.time, position=satellite or network))
            continue
        distance = _horizontal_distance(network, satellite)
        decisions.append(
            BaselineDecision(time=epoch.time, score=distance, alarm=distance > threshold, position=satellite)
        )
    return decisions


class KalmanTracker:
    """Constant-velocity filter over horizontal state [east, north, v_east, v_north]."""

    def __init__(self, config: Optional[BaselineConfig] = None):
        self.config = config or BaselineConfig()
        self.state: Optional[np.ndarray] = None
        self.covariance: Optional[np.ndarray] = None
        self.rejected = 0

    @property
    def initialized(self) -> bool:
        return self.state is not None

    def initialize(self, fix: np.ndarray, velocity: Optional[np.ndarray] = None):
        self.state = np.concatenate([fix, velocity if velocity is not None else np.zeros(2)])
        self.covariance = np.diag([self.config.gnss_sigma_m ** 2] * 2 + [10.0, 10.0])

    def predict(self, dt: float):
        transition = np.eye(4)
        transition[0, 2] = transition[1, 3] = dt
        q = self.config.process_noise
        block = q * np.array([[dt ** 3 / 3.0, dt ** 2 / 2.0], [dt ** 2 / 2.0, dt]])
        noise = np.zeros((4, 4))
        noise[np.ix_([0, 2], [0, 2])] = block
        noise[np.ix_([1, 3], [1, 3])] = block
        self.state = transition @ self.state
        self.covariance = transition @ self.covariance @ transition.T + noise

    def _update(self, observation: np.ndarray, rows: Tuple[int, int], sigma: float):
        design = np.zeros((2, 4))
        design[0, rows[0]] = design[1, rows[1]] = 1.0
        innovation = observation - design @ self.state
        gain_denominator = design @ self.covariance @ design.T + sigma ** 2 * np.eye(2)
        gain = np.linalg.solve(gain_denominator, design @ self.covariance).T
        self.state = self.state + gain @ innovation
        self.covariance = (np.eye(4) - gain @ design) @ self.covariance

    def update_velocity(self, velocity: np.ndarray):
        self._update(velocity, (2, 3), self.config.velocity_sigma)

    def update_position(self, fix: np.ndarray) -> float:
        """Innovation distance of a fix; fixes outside the gate are not applied."""
        innovation = float(np.linalg.norm(fix - self.state[:2]))
        if innovation <= self.config.kalman_gate_m:
            self._update(fix, (0, 1), self.config.gnss_sigma_m)
        else:
            self.rejected += 1
        return innovation


def _enu_velocity(epoch: Epoch) -> Optional[np.ndarray]:
    if epoch.motion is None:
        return None
    return (rotation_matrix(epoch.motion.orientation) @ np.asarray(epoch.motion.velocity, dtype=float))[:2]


def baseline_kalman_detector(
    epochs: Iterable[Epoch],
    registry: AnchorRegistry,
    origin: GeoPoint,
    threshold_m: Optional[float] = None,
    config: Optional[BaselineConfig] = None,
    positioning: Optional[PositioningConfig] = None,
) -> List[BaselineDecision]:
    """Alarm when a GNSS fix lands farther than threshold_m from the motion-aided prediction.

    The first fix initializes the filter and never alarms.
    """
    config = config or BaselineConfig()
    threshold = threshold_m if threshold_m is not None else config.kalman_threshold_m
    receiver_up = positioning.receiver_up if positioning is not None else None
    tracker = KalmanTracker(config)
    decisions = []
    last_time: Optional[int] = None
    for epoch in epochs:
        fix = gnss_fix(resolve_epoch(epoch, registry, origin, receiver_up=receiver_up))
        velocity = _enu_velocity(epoch)
        if not tracker.initialized:
            if fix is not None:
                tracker.initialize(fix.as_array()[:2], velocity)
                last_time = epoch.time
            decisions.append(BaselineDecision(time=epoch.time, position=fix))
            continue

        tracker.predict((epoch.time - last_time) / 1000.0)
        last_time = epoch.time
        if velocity is not None:
            tracker.update_velocity(velocity)
        if fix is None:
            decisions.append(BaselineDecision(time=epoch.time))
            continue
        score = tracker.update_position(fix.as_array()[:2])
        east, north = tracker.state[:2]
        decisions.append(
            BaselineDecision(
                time=epoch.time,
                score=score,
                alarm=score > threshold,
                position=EnuPoint(east=float(east), north=float(north), up=fix.up),
            )
        )
    logger.debug("Kalman baseline rejected {} fixes", tracker.rejected)
    return decisions
