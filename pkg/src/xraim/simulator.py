"""
Synthetic scenario generator and attack injection.

A scenario is a receiver moving along a waypoint path among satellites,
Wi-Fi access points, cell towers, Bluetooth beacons and GeoIP servers. The
generator produces benign noisy measurements; attack schedules then rewrite
or remove measurements of the affected anchors. Every random draw comes
from the scenario seed, so a config always yields the same dataset.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from loguru import logger

from .config import AttackSchedule, PathLossModel, ScenarioConfig
from .exceptions import InvalidArgumentError
from .geodesy import ecef_to_enu, ecef_to_geodetic, enu_to_ecef, enu_to_wgs84, wgs84_to_enu
from .ingest import (
    AnchorRegistry,
    DatasetFiles,
    write_anchor_db,
    write_fingerprints,
    write_gnss_log,
    write_labels,
    write_lbs_log,
    write_motion_log,
    write_network_log,
    write_truth,
)
from .models import (
    Anchor,
    AttackKind,
    AttackLabel,
    EnuPoint,
    Epoch,
    FingerprintDb,
    FingerprintEntry,
    GeoPoint,
    Infrastructure,
    MotionSample,
    RangingMeasurement,
    EXPECTED_VALUE_KIND,
)

AnchorKey = Tuple[Infrastructure, str]

GNSS_DISTANCE_M = 20_200_000.0

CARRIER_FREQUENCY_HZ = {
    Infrastructure.WIFI: 2.412e9,
    Infrastructure.CELL: 1.8e9,
    Infrastructure.BLUETOOTH: 2.402e9,
}

ANCHOR_PREFIX = {
    Infrastructure.GNSS: "G",
    Infrastructure.WIFI: "ap",
    Infrastructure.CELL: "cell",
    Infrastructure.BLUETOOTH: "bt",
    Infrastructure.GEOIP: "ip",
}


@dataclass
class SimulatedRun:
    """A generated scenario: truth, anchors, measurements and attack bookkeeping.

    Per-epoch lists share one index; anchor positions are the ENU positions
    a detector resolves from the exported files.
    """

    config: ScenarioConfig
    times: List[int]
    truth: List[EnuPoint]
    headings: List[float]
    satellites: Dict[str, Anchor]
    anchors: List[Anchor]
    anchor_enu: Dict[AnchorKey, np.ndarray]
    epochs: List[Epoch]
    motion: List[MotionSample]
    lbs: List[EnuPoint]
    attacked: List[Set[AnchorKey]]
    spoof: Dict[int, EnuPoint] = field(default_factory=dict)
    fingerprints: Optional[FingerprintDb] = None

    @property
    def origin(self) -> GeoPoint:
        return self.config.origin

    def registry(self) -> AnchorRegistry:
        return AnchorRegistry(self.anchors)

    def anchor_ids(self, infrastructure: Infrastructure) -> List[str]:
        return sorted(anchor_id for infra, anchor_id in self.anchor_enu if infra == infrastructure)

    def is_attacked(self, index: int) -> bool:
        return bool(self.attacked[index])

    def labels(self) -> List[AttackLabel]:
        """One benign row per clean epoch, one row per attacked anchor otherwise."""
        labels = []
        for time, attacked in zip(self.times, self.attacked):
            if not attacked:
                labels.append(AttackLabel(time=time, attacked=False))
                continue
            for infrastructure, anchor_id in sorted(attacked, key=lambda key: (key[0].value, key[1])):
                labels.append(
                    AttackLabel(time=time, attacked=True, infrastructure=infrastructure, anchor_id=anchor_id)
                )
        return labels

    def detection_epochs(self) -> List[Epoch]:
        """Epochs with motion samples and reported positions attached, as load_dataset aligns them."""
        return [
            epoch.model_copy(update={"motion": sample, "lbs_position": enu_to_wgs84(reported, self.origin)})
            for epoch, sample, reported in zip(self.epochs, self.motion, self.lbs)
        ]

    def truth_by_time(self) -> Dict[int, EnuPoint]:
        return dict(zip(self.times, self.truth))

    def truth_geodetic(self) -> Dict[int, GeoPoint]:
        return {time: enu_to_wgs84(point, self.origin) for time, point in zip(self.times, self.truth)}

    def lbs_geodetic(self) -> Dict[int, GeoPoint]:
        return {time: enu_to_wgs84(point, self.origin) for time, point in zip(self.times, self.lbs)}


def _disc_offset(rng: np.random.Generator, radius: float) -> np.ndarray:
    heading = rng.uniform(0.0, 2.0 * np.pi)
    distance = radius * np.sqrt(rng.uniform(0.0, 1.0))
    return distance * np.array([np.sin(heading), np.cos(heading)])


def _ring_offset(rng: np.random.Generator, low: float, high: float) -> np.ndarray:
    heading = rng.uniform(0.0, 2.0 * np.pi)
    return rng.uniform(low, high) * np.array([np.sin(heading), np.cos(heading)])


def forward_value(
    infrastructure: Infrastructure,
    anchor: np.ndarray,
    receiver: np.ndarray,
    path_loss: Dict[Infrastructure, PathLossModel],
    geoip_gamma: float,
) -> float:
    """Noise-free measurement of an anchor from a receiver position (GNSS without clock bias)."""
    distance = float(np.linalg.norm(anchor - receiver))
    if infrastructure == Infrastructure.GNSS:
        return distance
    if infrastructure == Infrastructure.GEOIP:
        return distance / geoip_gamma
    return path_loss[infrastructure].rssi_for(distance)


class ScenarioGenerator:
    """Generates benign scenarios and applies the configured attack schedules."""

    def __init__(self, config: Optional[ScenarioConfig] = None):
        try:
            self.config = config or ScenarioConfig()
            self.rng = np.random.default_rng(self.config.seed)
            logger.debug("Initialized scenario generator '{}' with seed {}", self.config.name, self.config.seed)
        except Exception as e:
            logger.error("Error initializing scenario generator: {}", e)
            raise

    def generate_trajectory(self) -> Tuple[List[EnuPoint], List[float]]:
        """Constant-speed positions along the waypoint path, looping at its end, plus compass headings."""
        trajectory = self.config.trajectory
        waypoints = np.asarray(trajectory.waypoints, dtype=float)
        segments = np.diff(waypoints, axis=0)
        lengths = np.linalg.norm(segments, axis=1)
        cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
        total = cumulative[-1]
        step = trajectory.speed * self.config.cadence_ms / 1000.0

        positions, headings = [], []
        for k in range(self.config.epochs):
            travelled = (k * step) % total if total > 0.0 else 0.0
            segment = int(np.clip(np.searchsorted(cumulative, travelled, side="right") - 1, 0, len(lengths) - 1))
            while lengths[segment] == 0.0 and segment < len(lengths) - 1:
                segment += 1
            fraction = (travelled - cumulative[segment]) / lengths[segment] if lengths[segment] > 0.0 else 0.0
            east, north = waypoints[segment] + fraction * segments[segment]
            positions.append(EnuPoint(east=float(east), north=float(north), up=trajectory.up_m))
            headings.append(float(np.arctan2(segments[segment][0], segments[segment][1])))
        return positions, headings

    def _count(self, infrastructure: Infrastructure) -> int:
        low, high = self.config.layout.count_range(infrastructure)
        return int(self.rng.integers(low, high + 1))

    def generate_anchors(
        self, truth: Sequence[EnuPoint]
    ) -> Tuple[Dict[str, Anchor], List[Anchor], Dict[AnchorKey, np.ndarray]]:
        """Place satellites (ECEF) and terrestrial anchors (WGS84) around the path.

        Returned ENU positions are those recovered from the stored
        coordinates, so simulation and detection see identical geometry.
        """
        layout = self.config.layout
        origin = self.config.origin
        up = self.config.trajectory.up_m
        path = np.array([[p.east, p.north] for p in truth])
        center = path.mean(axis=0)
        anchor_enu: Dict[AnchorKey, np.ndarray] = {}

        satellites: Dict[str, Anchor] = {}
        for j in range(self._count(Infrastructure.GNSS)):
            azimuth = self.rng.uniform(0.0, 2.0 * np.pi)
            elevation = np.radians(self.rng.uniform(layout.min_elevation_deg, 90.0))
            direction = np.array([
                np.cos(elevation) * np.sin(azimuth), np.cos(elevation) * np.cos(azimuth), np.sin(elevation)
            ])
            ecef = tuple(float(v) for v in enu_to_ecef(EnuPoint.from_array(GNSS_DISTANCE_M * direction), origin))
            latitude, longitude, altitude = ecef_to_geodetic(ecef)
            sat_id = f"G{j + 1:02d}"
            satellites[sat_id] = Anchor(
                id=sat_id,
                infrastructure=Infrastructure.GNSS,
                position=GeoPoint(latitude=latitude, longitude=longitude, altitude=altitude),
                metadata={"signal_type": "L1"},
                ecef=ecef,
            )
            anchor_enu[(Infrastructure.GNSS, sat_id)] = ecef_to_enu(ecef, origin).as_array()

        placements: Dict[Infrastructure, Callable[[], np.ndarray]] = {
            Infrastructure.WIFI: lambda: path[self.rng.integers(len(path))]
            + _disc_offset(self.rng, layout.wifi_radius_m),
            Infrastructure.CELL: lambda: center + _ring_offset(self.rng, *layout.cell_distance_m),
            Infrastructure.BLUETOOTH: lambda: path[self.rng.integers(len(path))]
            + _disc_offset(self.rng, layout.bluetooth_radius_m),
            Infrastructure.GEOIP: lambda: center + _ring_offset(self.rng, *layout.geoip_distance_m),
        }
        anchors: List[Anchor] = []
        for infrastructure, place in placements.items():
            for j in range(self._count(infrastructure)):
                east, north = place()
                anchor_id = f"{ANCHOR_PREFIX[infrastructure]}{j + 1:02d}"
                geo = enu_to_wgs84(EnuPoint(east=float(east), north=float(north), up=up), origin)
                metadata = {"name": f"{infrastructure.value.lower()}-{j + 1:02d}"}
                if infrastructure == Infrastructure.WIFI:
                    metadata["ssid"] = f"net-{j + 1:02d}"
                anchors.append(Anchor(id=anchor_id, infrastructure=infrastructure, position=geo, metadata=metadata))
                anchor_enu[(infrastructure, anchor_id)] = wgs84_to_enu(geo, origin).as_array()

        logger.debug("Placed {} satellites and {} terrestrial anchors", len(satellites), len(anchors))
        return satellites, anchors, anchor_enu

    def _motion_sample(self, time: int, heading: float) -> MotionSample:
        noise = self.config.noise
        speed = self.config.trajectory.speed
        velocity = np.array([0.0, speed, 0.0]) + self.rng.normal(0.0, noise.velocity_sigma, 3)
        acceleration = self.rng.normal(0.0, noise.acceleration_sigma, 3)
        orientation = np.array([0.0, 0.0, heading]) + self.rng.normal(0.0, noise.orientation_sigma, 3)
        return MotionSample(
            time=time,
            velocity=tuple(float(v) for v in velocity),
            acceleration=tuple(float(v) for v in acceleration),
            orientation=tuple(float(v) for v in orientation),
        )

    def generate_benign(self, progress_callback: Optional[Callable[[], None]] = None) -> SimulatedRun:
        """Benign measurements, motion samples and reported positions for every epoch."""
        config = self.config
        noise = config.noise
        truth, headings = self.generate_trajectory()
        satellites, anchors, anchor_enu = self.generate_anchors(truth)
        terrestrial = [(anchor.infrastructure, anchor.id) for anchor in anchors]
        window_ms = max(500, abs(config.network_offset_ms))

        times, epochs, motion, lbs = [], [], [], []
        clock_bias = 0.0
        sparse: Set[Infrastructure] = set()
        for k, (position, heading) in enumerate(zip(truth, headings)):
            time = config.start_time_ms + k * config.cadence_ms
            receiver = position.as_array()
            clock_bias += float(self.rng.normal(0.0, noise.clock_walk_sigma_m)) if k > 0 else 0.0

            measurements: Dict[Infrastructure, List[RangingMeasurement]] = {Infrastructure.GNSS: []}
            for sat_id in sorted(satellites):
                value = forward_value(
                    Infrastructure.GNSS, anchor_enu[(Infrastructure.GNSS, sat_id)], receiver,
                    config.path_loss, config.geoip_gamma,
                ) + clock_bias + float(self.rng.normal(0.0, noise.pseudorange_sigma_m))
                measurements[Infrastructure.GNSS].append(
                    RangingMeasurement(
                        time=time,
                        anchor_id=sat_id,
                        infrastructure=Infrastructure.GNSS,
                        value=value,
                        value_kind=EXPECTED_VALUE_KIND[Infrastructure.GNSS],
                        sigma=noise.pseudorange_sigma_m,
                        signal_type="L1",
                    )
                )

            if k % config.network_period_epochs == 0:
                scan_time = time + config.network_offset_ms
                for infrastructure, anchor_id in terrestrial:
                    value = forward_value(
                        infrastructure, anchor_enu[(infrastructure, anchor_id)], receiver,
                        config.path_loss, config.geoip_gamma,
                    )
                    if infrastructure == Infrastructure.GEOIP:
                        value = max(value + float(self.rng.normal(0.0, noise.rtt_jitter_m)), 1.0)
                    else:
                        value = min(value + float(self.rng.normal(0.0, noise.rssi_shadowing_db)), 0.0)
                        if value < config.path_loss[infrastructure].sensitivity_dbm:
                            continue
                    measurements.setdefault(infrastructure, []).append(
                        RangingMeasurement(
                            time=scan_time,
                            anchor_id=anchor_id,
                            infrastructure=infrastructure,
                            value=value,
                            value_kind=EXPECTED_VALUE_KIND[infrastructure],
                            frequency_hz=CARRIER_FREQUENCY_HZ.get(infrastructure),
                        )
                    )
                for infrastructure in {infra for infra, _ in terrestrial}:
                    if len(measurements.get(infrastructure, [])) < infrastructure.min_subset_size:
                        sparse.add(infrastructure)

            times.append(time)
            epochs.append(
                Epoch(
                    time=time,
                    measurements={infra: group for infra, group in measurements.items() if group},
                    anchors=satellites,
                    alignment_window_ms=window_ms,
                )
            )
            motion.append(self._motion_sample(time, heading))
            lbs_noise = self.rng.normal(0.0, noise.lbs_sigma_m, 2)
            lbs.append(EnuPoint(east=position.east + lbs_noise[0], north=position.north + lbs_noise[1], up=position.up))
            if progress_callback:
                progress_callback()

        for infrastructure in sorted(sparse, key=lambda infra: infra.value):
            logger.warning("Trajectory leaves {} coverage in some epochs", infrastructure.value)

        fingerprints = self.generate_fingerprints(truth, anchor_enu) if config.fingerprint_spacing_m else None
        return SimulatedRun(
            config=config,
            times=times,
            truth=truth,
            headings=headings,
            satellites=satellites,
            anchors=anchors,
            anchor_enu=anchor_enu,
            epochs=epochs,
            motion=motion,
            lbs=lbs,
            attacked=[set() for _ in times],
            fingerprints=fingerprints,
        )

    def generate_fingerprints(
        self, truth: Sequence[EnuPoint], anchor_enu: Dict[AnchorKey, np.ndarray]
    ) -> FingerprintDb:
        """Benign RSSI survey on a regular grid covering the path."""
        spacing = self.config.fingerprint_spacing_m
        up = self.config.trajectory.up_m
        path = np.array([[p.east, p.north] for p in truth])
        low, high = path.min(axis=0) - spacing, path.max(axis=0) + spacing
        rssi_anchors = [
            (key, position)
            for key, position in sorted(anchor_enu.items(), key=lambda item: (item[0][0].value, item[0][1]))
            if key[0] in CARRIER_FREQUENCY_HZ
        ]
        entries = []
        for east in np.arange(low[0], high[0] + 1e-9, spacing):
            for north in np.arange(low[1], high[1] + 1e-9, spacing):
                point = np.array([east, north, up])
                rssi = {}
                for (infrastructure, anchor_id), position in rssi_anchors:
                    model = self.config.path_loss[infrastructure]
                    value = min(
                        model.rssi_for(float(np.linalg.norm(position - point)))
                        + float(self.rng.normal(0.0, self.config.noise.rssi_shadowing_db)),
                        0.0,
                    )
                    if value >= model.sensitivity_dbm:
                        rssi[anchor_id] = value
                if rssi:
                    entries.append(
                        FingerprintEntry(rssi=rssi, position=EnuPoint.from_array(point), time=self.config.start_time_ms)
                    )
        logger.debug("Generated {} fingerprint entries", len(entries))
        return FingerprintDb(entries=entries)

    def run(self, progress_callback: Optional[Callable[[], None]] = None) -> SimulatedRun:
        """Benign generation followed by every attack schedule, in order."""
        simulated = self.generate_benign(progress_callback)
        for index, schedule in enumerate(self.config.attacks):
            rng = np.random.default_rng(np.random.SeedSequence([self.config.seed, 1000 + index]))
            simulated = inject_attack(simulated, schedule, rng)
            logger.debug(
                "Applied {} attack on epochs [{}, {})", schedule.kind.value, schedule.start_epoch, schedule.end_epoch
            )
        return simulated

    def export(self, simulated: SimulatedRun, output_dir: Path) -> Dict[str, Path]:
        """Write a dataset directory readable by load_dataset."""
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        files = {
            "gnss": write_gnss_log(simulated.epochs, output_dir / DatasetFiles.GNSS),
            "network": write_network_log(simulated.epochs, output_dir / DatasetFiles.NETWORK),
            "motion": write_motion_log(simulated.motion, output_dir / DatasetFiles.MOTION),
            "anchors": write_anchor_db(simulated.anchors, output_dir / DatasetFiles.ANCHORS),
            "labels": write_labels(simulated.labels(), output_dir / DatasetFiles.LABELS),
            "truth": write_truth(simulated.truth_geodetic(), output_dir / DatasetFiles.TRUTH),
            "lbs": write_lbs_log(simulated.lbs_geodetic(), output_dir / DatasetFiles.LBS),
        }
        if simulated.fingerprints is not None:
            files["fingerprints"] = write_fingerprints(simulated.fingerprints, output_dir / DatasetFiles.FINGERPRINTS)
        scenario_file = output_dir / DatasetFiles.SCENARIO
        scenario_file.write_text(self.config.model_dump_json(indent=2), encoding="utf-8")
        files["scenario"] = scenario_file
        logger.debug("Exported dataset to: {}", output_dir)
        return files


def generate_benign(config: ScenarioConfig) -> SimulatedRun:
    return ScenarioGenerator(config).generate_benign()


def affected_anchors(
    simulated: SimulatedRun, schedule: AttackSchedule, rng: np.random.Generator
) -> Set[AnchorKey]:
    """Anchors an attack touches: explicit ids, else a random draw of the given counts.

    Without ids or counts, spoofing attacks cover every anchor and jamming
    covers the whole GNSS constellation.
    """
    chosen: Set[AnchorKey] = set()
    for infrastructure, ids in schedule.affected_ids.items():
        known = set(simulated.anchor_ids(infrastructure))
        unknown = [anchor_id for anchor_id in ids if anchor_id not in known]
        if unknown:
            raise InvalidArgumentError(f"Unknown {infrastructure.value} anchors in attack: {unknown}")
        chosen.update((infrastructure, anchor_id) for anchor_id in ids)
    for infrastructure, count in sorted(schedule.affected_counts.items(), key=lambda item: item[0].value):
        if infrastructure in schedule.affected_ids or count == 0:
            continue
        available = simulated.anchor_ids(infrastructure)
        if count > len(available):
            logger.warning(
                "Attack asks for {} {} anchors, only {} exist", count, infrastructure.value, len(available)
            )
        picked = rng.choice(len(available), size=min(count, len(available)), replace=False)
        chosen.update((infrastructure, available[i]) for i in sorted(picked))
    for infrastructure in schedule.jam_all:
        chosen.update((infrastructure, anchor_id) for anchor_id in simulated.anchor_ids(infrastructure))

    if not chosen and not schedule.affected_ids and not schedule.affected_counts:
        if schedule.kind == AttackKind.JAMMING:
            chosen = {(Infrastructure.GNSS, anchor_id) for anchor_id in simulated.anchor_ids(Infrastructure.GNSS)}
        else:
            chosen = set(simulated.anchor_enu)
    return chosen


def _spoof_epoch(
    simulated: SimulatedRun,
    index: int,
    targets: Dict[AnchorKey, np.ndarray],
    clock_offset_m: float = 0.0,
) -> Tuple[Epoch, Set[AnchorKey]]:
    """Shift affected measurements by the change of the noise-free value from truth to each spoof point."""
    config = simulated.config
    epoch = simulated.epochs[index]
    receiver = simulated.truth[index].as_array()
    touched: Set[AnchorKey] = set()
    measurements: Dict[Infrastructure, List[RangingMeasurement]] = {}
    for infrastructure, group in epoch.measurements.items():
        updated = []
        for measurement in group:
            key = (infrastructure, measurement.anchor_id)
            target = targets.get(key)
            if target is None:
                updated.append(measurement)
                continue
            anchor = simulated.anchor_enu[key]
            delta = forward_value(infrastructure, anchor, target, config.path_loss, config.geoip_gamma) - forward_value(
                infrastructure, anchor, receiver, config.path_loss, config.geoip_gamma
            )
            value = measurement.value + delta
            if infrastructure == Infrastructure.GNSS:
                value += clock_offset_m
            elif infrastructure == Infrastructure.GEOIP:
                value = max(value, 1.0)
            else:
                value = min(value, 0.0)
            updated.append(measurement.model_copy(update={"value": value}))
            touched.add(key)
        measurements[infrastructure] = updated
    return epoch.model_copy(update={"measurements": measurements}), touched


def _window(simulated: SimulatedRun, schedule: AttackSchedule) -> range:
    return range(schedule.start_epoch, min(schedule.end_epoch, len(simulated.epochs)))


def inject_uncoordinated(
    simulated: SimulatedRun, schedule: AttackSchedule, rng: Optional[np.random.Generator] = None
) -> SimulatedRun:
    """Each affected anchor becomes consistent with its own fixed random spoof point.

    The reported position stays benign.
    """
    rng = rng or np.random.default_rng(0)
    affected = sorted(affected_anchors(simulated, schedule, rng), key=lambda key: (key[0].value, key[1]))
    offsets = {}
    for key in affected:
        east, north = _ring_offset(rng, schedule.min_offset_m, schedule.max_offset_m)
        offsets[key] = np.array([east, north, 0.0])

    epochs, attacked = list(simulated.epochs), [set(s) for s in simulated.attacked]
    for index in _window(simulated, schedule):
        receiver = simulated.truth[index].as_array()
        targets = {key: receiver + offset for key, offset in offsets.items()}
        epochs[index], touched = _spoof_epoch(
            replace(simulated, epochs=epochs), index, targets, schedule.spoof_clock_offset_m
        )
        attacked[index] |= touched
    return replace(simulated, epochs=epochs, attacked=attacked)


def inject_coordinated(
    simulated: SimulatedRun,
    schedule: AttackSchedule,
    spoof_trajectory: Optional[Dict[int, EnuPoint]] = None,
    rng: Optional[np.random.Generator] = None,
) -> SimulatedRun:
    """All affected anchors agree on one spoof trajectory, and the reported position follows it.

    The default spoof trajectory is the truth shifted by the schedule's offset.
    """
    rng = rng or np.random.default_rng(0)
    affected = affected_anchors(simulated, schedule, rng)
    offset = np.array([schedule.offset_m[0], schedule.offset_m[1], 0.0])

    epochs, attacked = list(simulated.epochs), [set(s) for s in simulated.attacked]
    lbs, spoof = list(simulated.lbs), dict(simulated.spoof)
    for index in _window(simulated, schedule):
        truth = simulated.truth[index].as_array()
        if spoof_trajectory is not None:
            target = spoof_trajectory[index].as_array()
        else:
            target = truth + offset
        epochs[index], touched = _spoof_epoch(
            replace(simulated, epochs=epochs), index, {key: target for key in affected}, schedule.spoof_clock_offset_m
        )
        attacked[index] |= touched
        lbs[index] = EnuPoint.from_array(target + (simulated.lbs[index].as_array() - truth))
        spoof[index] = EnuPoint.from_array(target)
    return replace(simulated, epochs=epochs, attacked=attacked, lbs=lbs, spoof=spoof)


def drift_trajectory(simulated: SimulatedRun, schedule: AttackSchedule) -> Dict[int, EnuPoint]:
    """Truth plus an offset ramping from zero to the terminal distance along the drift heading."""
    heading = np.radians(schedule.drift_heading_deg)
    direction = np.array([np.sin(heading), np.cos(heading), 0.0])
    return {
        index: EnuPoint.from_array(
            simulated.truth[index].as_array() + schedule.ramp_fraction(index) * schedule.drift_terminal_m * direction
        )
        for index in _window(simulated, schedule)
    }


def inject_gradual_drift(
    simulated: SimulatedRun, schedule: AttackSchedule, rng: Optional[np.random.Generator] = None
) -> SimulatedRun:
    """Coordinated spoofing along a slowly growing offset."""
    return inject_coordinated(simulated, schedule, drift_trajectory(simulated, schedule), rng)


def inject_jamming(
    simulated: SimulatedRun, schedule: AttackSchedule, rng: Optional[np.random.Generator] = None
) -> SimulatedRun:
    """Remove the affected anchors' measurements inside the window."""
    rng = rng or np.random.default_rng(0)
    affected = affected_anchors(simulated, schedule, rng)
    epochs, attacked = list(simulated.epochs), [set(s) for s in simulated.attacked]
    for index in _window(simulated, schedule):
        epoch = epochs[index]
        measurements = {}
        for infrastructure, group in epoch.measurements.items():
            kept = [m for m in group if (infrastructure, m.anchor_id) not in affected]
            if kept:
                measurements[infrastructure] = kept
        epochs[index] = epoch.model_copy(update={"measurements": measurements})
        attacked[index] |= affected
    return replace(simulated, epochs=epochs, attacked=attacked)


def inject_attack(
    simulated: SimulatedRun, schedule: AttackSchedule, rng: Optional[np.random.Generator] = None
) -> SimulatedRun:
    """Dispatch a schedule to its injector."""
    if schedule.kind == AttackKind.NONE:
        return simulated
    if schedule.kind == AttackKind.UNCOORDINATED:
        return inject_uncoordinated(simulated, schedule, rng)
    if schedule.kind == AttackKind.COORDINATED:
        return inject_coordinated(simulated, schedule, rng=rng)
    if schedule.kind == AttackKind.GRADUAL_DRIFT:
        return inject_gradual_drift(simulated, schedule, rng)
    return inject_jamming(simulated, schedule, rng)
