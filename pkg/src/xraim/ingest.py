"""
Reading and writing of measurement logs, the anchor database and run outputs.

Every file is a UTF-8 CSV with a mandatory header row. Values are read as
strings and converted row by row so that a bad value is reported with its
line number; floats are written with their shortest round-trip
representation so parse -> write -> parse is lossless.
"""

import bisect
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd
from loguru import logger
from pydantic import ValidationError

from .config import ScenarioConfig
from .exceptions import FormatError, InvalidArgumentError, RowError
from .geodesy import ecef_to_geodetic, wgs84_to_enu
from .models import (
    Anchor,
    AttackLabel,
    DetectionReport,
    EnuPoint,
    Epoch,
    FingerprintDb,
    FingerprintEntry,
    GeoPoint,
    Infrastructure,
    MotionSample,
    RangingMeasurement,
    ValueKind,
)

PathLike = Union[str, Path]

GNSS_COLUMNS = [
    "time_ms", "sat_id", "signal_type", "pseudorange_m", "pr_sigma_m",
    "sat_x_ecef_m", "sat_y_ecef_m", "sat_z_ecef_m",
]
NETWORK_COLUMNS = ["time_ms", "infra", "anchor_id", "rssi_dbm_or_rtt_m", "value_kind", "freq_hz"]
ANCHOR_COLUMNS = ["infra", "id", "lat_deg", "lon_deg", "alt_m", "metadata_json"]
MOTION_COLUMNS = ["time_ms", "vx", "vy", "vz", "ax", "ay", "az", "roll", "pitch", "yaw"]
POSITION_COLUMNS = ["time_ms", "lat_deg", "lon_deg", "alt_m"]
LABEL_COLUMNS = ["time_ms", "attacked", "infra", "anchor_id"]
FINGERPRINT_COLUMNS = ["entry_id", "time_ms", "east_m", "north_m", "up_m", "anchor_id", "rssi_dbm"]
REPORT_COLUMNS = ["time_ms", "score", "alarm", "recovered_e", "recovered_n", "recovered_u", "n_excluded"]

TimedPositions = Dict[int, GeoPoint]


class DatasetFiles:
    """File names of a dataset directory."""

    GNSS = "gnss_log.csv"
    NETWORK = "network_log.csv"
    MOTION = "motion_log.csv"
    ANCHORS = "anchors.csv"
    LABELS = "labels.csv"
    TRUTH = "truth.csv"
    LBS = "lbs_log.csv"
    FINGERPRINTS = "fingerprints.csv"
    SCENARIO = "scenario.json"
    REPORTS_JSONL = "reports.jsonl"
    REPORTS_CSV = "reports.csv"


def _read_table(path: PathLike, columns: Sequence[str]) -> pd.DataFrame:
    """Read a CSV as strings and check that the header has every required column."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise FormatError(f"{path}: missing header row") from e
    except pd.errors.ParserError as e:
        raise FormatError(f"{path}: {e}") from e
    missing = [column for column in columns if column not in frame.columns]
    if missing:
        raise FormatError(f"{path}: header is missing column(s) {', '.join(missing)}")
    return frame


def _rows(frame: pd.DataFrame) -> Iterable[Tuple[int, Dict[str, str]]]:
    """Yield (1-based file line, row) pairs; line 1 is the header."""
    for offset, row in enumerate(frame.to_dict(orient="records")):
        yield offset + 2, row


def _to_float(row: Mapping[str, str], column: str, path: PathLike, line: int) -> float:
    try:
        return float(row[column])
    except ValueError as e:
        raise RowError(str(path), line, f"column {column}: not a number: {row[column]!r}") from e


def _to_optional_float(row: Mapping[str, str], column: str, path: PathLike, line: int) -> Optional[float]:
    if row[column].strip() == "":
        return None
    return _to_float(row, column, path, line)


def _to_int(row: Mapping[str, str], column: str, path: PathLike, line: int) -> int:
    text = row[column].strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        value = float("nan")
    if not value.is_integer():
        raise RowError(str(path), line, f"column {column}: not an integer: {text!r}")
    return int(value)


def _to_infrastructure(value: str, path: PathLike, line: int) -> Infrastructure:
    try:
        return Infrastructure(value.strip().upper())
    except ValueError as e:
        raise RowError(str(path), line, f"unknown infrastructure {value!r}") from e


def _validation_message(error: ValidationError) -> str:
    return "; ".join(item["msg"] for item in error.errors())


def _write_table(rows: List[Dict[str, object]], columns: Sequence[str], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=list(columns)).to_csv(path, index=False)
    logger.debug("Wrote {} rows to {}", len(rows), path)
    return path


def _group_by_time(
    measurements: List[RangingMeasurement],
    anchors: Optional[Dict[int, Dict[str, Anchor]]] = None,
) -> List[Epoch]:
    """Turn measurements into one epoch fragment per distinct timestamp."""
    grouped: Dict[int, Dict[Infrastructure, List[RangingMeasurement]]] = {}
    for measurement in measurements:
        grouped.setdefault(measurement.time, {}).setdefault(measurement.infrastructure, []).append(measurement)
    return [
        Epoch(time=time, measurements=groups, anchors=(anchors or {}).get(time, {}))
        for time, groups in sorted(grouped.items())
    ]


def parse_gnss_log(path: PathLike) -> List[Epoch]:
    """Parse a GNSS pseudorange log into epoch fragments with inline satellite anchors."""
    frame = _read_table(path, GNSS_COLUMNS)
    measurements: List[RangingMeasurement] = []
    satellites: Dict[int, Dict[str, Anchor]] = {}
    for line, row in _rows(frame):
        time = _to_int(row, "time_ms", path, line)
        sat_id = row["sat_id"].strip()
        ecef = tuple(_to_float(row, column, path, line) for column in GNSS_COLUMNS[5:8])
        try:
            latitude, longitude, altitude = ecef_to_geodetic(ecef)
            measurement = RangingMeasurement(
                time=time,
                anchor_id=sat_id,
                infrastructure=Infrastructure.GNSS,
                value=_to_float(row, "pseudorange_m", path, line),
                value_kind=ValueKind.PSEUDORANGE,
                sigma=_to_optional_float(row, "pr_sigma_m", path, line) or 0.0,
                signal_type=row["signal_type"].strip() or None,
            )
            anchor = Anchor(
                id=sat_id,
                infrastructure=Infrastructure.GNSS,
                position=GeoPoint(latitude=latitude, longitude=longitude, altitude=altitude),
                metadata={"signal_type": row["signal_type"].strip()} if row["signal_type"].strip() else {},
                ecef=ecef,
            )
        except ValidationError as e:
            raise RowError(str(path), line, _validation_message(e)) from e
        except InvalidArgumentError as e:
            raise RowError(str(path), line, str(e)) from e
        epoch_satellites = satellites.setdefault(time, {})
        if sat_id in epoch_satellites:
            raise RowError(str(path), line, f"satellite {sat_id} appears twice at {time}")
        epoch_satellites[sat_id] = anchor
        measurements.append(measurement)

    epochs = _group_by_time(measurements, satellites)
    logger.debug("Parsed {} GNSS measurements into {} epochs from {}", len(measurements), len(epochs), path)
    return epochs


def parse_network_log(path: PathLike) -> List[Epoch]:
    """Parse a Wi-Fi/cellular/Bluetooth RSSI and GeoIP RTT log into epoch fragments."""
    frame = _read_table(path, NETWORK_COLUMNS)
    measurements: List[RangingMeasurement] = []
    for line, row in _rows(frame):
        infrastructure = _to_infrastructure(row["infra"], path, line)
        if infrastructure == Infrastructure.GNSS:
            raise RowError(str(path), line, "GNSS measurements belong in the GNSS log")
        try:
            value_kind = ValueKind(row["value_kind"].strip().upper())
        except ValueError as e:
            raise RowError(str(path), line, f"unknown value kind {row['value_kind']!r}") from e
        try:
            measurements.append(
                RangingMeasurement(
                    time=_to_int(row, "time_ms", path, line),
                    anchor_id=row["anchor_id"].strip(),
                    infrastructure=infrastructure,
                    value=_to_float(row, "rssi_dbm_or_rtt_m", path, line),
                    value_kind=value_kind,
                    frequency_hz=_to_optional_float(row, "freq_hz", path, line),
                )
            )
        except ValidationError as e:
            raise RowError(str(path), line, _validation_message(e)) from e

    epochs = _group_by_time(measurements)
    logger.debug("Parsed {} network measurements into {} epochs from {}", len(measurements), len(epochs), path)
    return epochs


def parse_motion_log(path: PathLike) -> List[MotionSample]:
    frame = _read_table(path, MOTION_COLUMNS)
    samples = []
    for line, row in _rows(frame):
        values = [_to_float(row, column, path, line) for column in MOTION_COLUMNS[1:]]
        try:
            samples.append(
                MotionSample(
                    time=_to_int(row, "time_ms", path, line),
                    velocity=tuple(values[0:3]),
                    acceleration=tuple(values[3:6]),
                    orientation=tuple(values[6:9]),
                )
            )
        except ValidationError as e:
            raise RowError(str(path), line, _validation_message(e)) from e
    return sorted(samples, key=lambda sample: sample.time)


def _parse_positions(path: PathLike) -> TimedPositions:
    frame = _read_table(path, POSITION_COLUMNS)
    positions: TimedPositions = {}
    for line, row in _rows(frame):
        try:
            point = GeoPoint(
                latitude=_to_float(row, "lat_deg", path, line),
                longitude=_to_float(row, "lon_deg", path, line),
                altitude=_to_float(row, "alt_m", path, line),
            )
        except ValidationError as e:
            raise RowError(str(path), line, _validation_message(e)) from e
        positions[_to_int(row, "time_ms", path, line)] = point
    return dict(sorted(positions.items()))


def parse_lbs_log(path: PathLike) -> TimedPositions:
    """Positions reported by the platform location service, keyed by time."""
    return _parse_positions(path)


def parse_truth(path: PathLike) -> TimedPositions:
    """Ground-truth receiver positions, keyed by time."""
    return _parse_positions(path)


def parse_labels(path: PathLike) -> List[AttackLabel]:
    frame = _read_table(path, LABEL_COLUMNS)
    labels = []
    for line, row in _rows(frame):
        attacked = row["attacked"].strip()
        if attacked not in ("0", "1"):
            raise RowError(str(path), line, f"attacked must be 0 or 1, got {attacked!r}")
        infra = row["infra"].strip()
        labels.append(
            AttackLabel(
                time=_to_int(row, "time_ms", path, line),
                attacked=attacked == "1",
                infrastructure=_to_infrastructure(infra, path, line) if infra else None,
                anchor_id=row["anchor_id"].strip() or None,
            )
        )
    return labels


def parse_fingerprints(path: PathLike) -> FingerprintDb:
    """Load a fingerprint survey; rows sharing an entry_id form one entry."""
    frame = _read_table(path, FINGERPRINT_COLUMNS)
    entries: Dict[str, Dict[str, object]] = {}
    for line, row in _rows(frame):
        entry_id = row["entry_id"].strip()
        position = (
            _to_float(row, "east_m", path, line),
            _to_float(row, "north_m", path, line),
            _to_float(row, "up_m", path, line),
        )
        entry = entries.setdefault(
            entry_id, {"time": _to_int(row, "time_ms", path, line), "position": position, "rssi": {}}
        )
        if entry["position"] != position:
            raise RowError(str(path), line, f"entry {entry_id} has inconsistent positions")
        entry["rssi"][row["anchor_id"].strip()] = _to_float(row, "rssi_dbm", path, line)
    try:
        return FingerprintDb(
            entries=[
                FingerprintEntry(
                    rssi=entry["rssi"],
                    position=EnuPoint.from_array(entry["position"]),
                    time=entry["time"],
                )
                for entry in entries.values()
            ]
        )
    except ValidationError as e:
        raise FormatError(f"{path}: {_validation_message(e)}") from e


class AnchorRegistry:
    """Read-only lookup of anchors by (infrastructure, id)."""

    def __init__(self, anchors: Iterable[Anchor] = ()):
        self._anchors: Dict[Tuple[Infrastructure, str], Anchor] = {}
        self._enu_cache: Dict[GeoPoint, Dict[Tuple[Infrastructure, str], EnuPoint]] = {}
        for anchor in anchors:
            key = (anchor.infrastructure, anchor.id)
            if key in self._anchors:
                raise FormatError(f"Duplicate anchor {anchor.infrastructure.value}/{anchor.id}")
            self._anchors[key] = anchor

    def __len__(self) -> int:
        return len(self._anchors)

    def __contains__(self, key: Tuple[Infrastructure, str]) -> bool:
        return key in self._anchors

    def __iter__(self):
        return iter(self._anchors.values())

    def get(self, infrastructure: Infrastructure, anchor_id: str) -> Optional[Anchor]:
        return self._anchors.get((infrastructure, anchor_id))

    def by_infrastructure(self, infrastructure: Infrastructure) -> List[Anchor]:
        return [anchor for (infra, _), anchor in self._anchors.items() if infra == infrastructure]

    def enu_positions(self, origin: GeoPoint) -> Dict[Tuple[Infrastructure, str], EnuPoint]:
        """ENU position of every anchor around origin, computed once per origin."""
        if origin not in self._enu_cache:
            self._enu_cache[origin] = {
                key: wgs84_to_enu(anchor.position, origin) for key, anchor in self._anchors.items()
            }
        return self._enu_cache[origin]


def load_anchor_db(path: PathLike) -> AnchorRegistry:
    """Load the anchor database; duplicate (infrastructure, id) pairs are rejected."""
    frame = _read_table(path, ANCHOR_COLUMNS)
    anchors = []
    seen = set()
    for line, row in _rows(frame):
        infrastructure = _to_infrastructure(row["infra"], path, line)
        anchor_id = row["id"].strip()
        if (infrastructure, anchor_id) in seen:
            raise FormatError(f"{path}:{line}: duplicate anchor {infrastructure.value}/{anchor_id}")
        seen.add((infrastructure, anchor_id))
        raw_metadata = row["metadata_json"].strip()
        try:
            metadata = json.loads(raw_metadata) if raw_metadata else {}
        except json.JSONDecodeError as e:
            raise RowError(str(path), line, f"metadata_json is not valid JSON: {e.msg}") from e
        if not isinstance(metadata, dict):
            raise RowError(str(path), line, "metadata_json must be a JSON object")
        try:
            anchors.append(
                Anchor(
                    id=anchor_id,
                    infrastructure=infrastructure,
                    position=GeoPoint(
                        latitude=_to_float(row, "lat_deg", path, line),
                        longitude=_to_float(row, "lon_deg", path, line),
                        altitude=_to_float(row, "alt_m", path, line),
                    ),
                    metadata={str(k): str(v) for k, v in metadata.items()},
                )
            )
        except ValidationError as e:
            raise RowError(str(path), line, _validation_message(e)) from e
    logger.debug("Loaded {} anchors from {}", len(anchors), path)
    return AnchorRegistry(anchors)


def _nearest(times: List[int], target: int) -> Optional[int]:
    """Index of the sorted time closest to target; ties go to the earlier one."""
    if not times:
        return None
    position = bisect.bisect_left(times, target)
    candidates = [i for i in (position - 1, position) if 0 <= i < len(times)]
    return min(candidates, key=lambda i: (abs(times[i] - target), times[i]))


def align_epochs(
    gnss: Sequence[Epoch],
    network: Sequence[Epoch] = (),
    motion: Sequence[MotionSample] = (),
    lbs: Optional[Mapping[int, GeoPoint]] = None,
    window_ms: int = 500,
) -> List[Epoch]:
    """Merge log fragments into aligned epochs.

    Network scans join the nearest GNSS epoch inside the window and otherwise
    become epochs of their own. When two scans land in the same epoch, the
    measurement closest in time wins for each anchor. Motion samples and
    reported positions are attached when one lies inside the window.
    """
    if window_ms < 0:
        raise InvalidArgumentError("Alignment window must be non-negative")

    merged: Dict[int, Dict[str, object]] = {}
    for fragment in gnss:
        slot = merged.setdefault(fragment.time, {"measurements": {}, "anchors": {}})
        for infrastructure, group in fragment.measurements.items():
            for measurement in group:
                slot["measurements"].setdefault(infrastructure, {})[measurement.anchor_id] = measurement
        slot["anchors"].update(fragment.anchors)

    gnss_times = sorted(merged)
    for fragment in sorted(network, key=lambda epoch: epoch.time):
        index = _nearest(gnss_times, fragment.time)
        if index is not None and abs(gnss_times[index] - fragment.time) <= window_ms:
            epoch_time = gnss_times[index]
        else:
            epoch_time = fragment.time
        slot = merged.setdefault(epoch_time, {"measurements": {}, "anchors": {}})
        for infrastructure, group in fragment.measurements.items():
            bucket = slot["measurements"].setdefault(infrastructure, {})
            for measurement in group:
                current = bucket.get(measurement.anchor_id)
                if current is None or abs(measurement.time - epoch_time) < abs(current.time - epoch_time):
                    bucket[measurement.anchor_id] = measurement

    motion_samples = sorted(motion, key=lambda sample: sample.time)
    motion_times = [sample.time for sample in motion_samples]
    lbs = lbs or {}
    lbs_times = sorted(lbs)

    epochs = []
    for time in sorted(merged):
        slot = merged[time]
        motion_index = _nearest(motion_times, time)
        sample = None
        if motion_index is not None and abs(motion_times[motion_index] - time) <= window_ms:
            sample = motion_samples[motion_index]
        lbs_index = _nearest(lbs_times, time)
        reported = None
        if lbs_index is not None and abs(lbs_times[lbs_index] - time) <= window_ms:
            reported = lbs[lbs_times[lbs_index]]
        epochs.append(
            Epoch(
                time=time,
                measurements={
                    infra: sorted(bucket.values(), key=lambda m: m.anchor_id)
                    for infra, bucket in slot["measurements"].items()
                },
                anchors=slot["anchors"],
                motion=sample,
                lbs_position=reported,
                alignment_window_ms=window_ms,
            )
        )
    logger.debug("Aligned {} GNSS and {} network fragments into {} epochs", len(gnss), len(network), len(epochs))
    return epochs


def write_gnss_log(epochs: Sequence[Epoch], path: PathLike) -> Path:
    rows = []
    for epoch in epochs:
        for measurement in epoch.measurements.get(Infrastructure.GNSS, []):
            satellite = epoch.anchors.get(measurement.anchor_id)
            if satellite is None or satellite.ecef is None:
                raise InvalidArgumentError(f"Satellite {measurement.anchor_id} at {epoch.time} has no ECEF position")
            rows.append(
                {
                    "time_ms": measurement.time,
                    "sat_id": measurement.anchor_id,
                    "signal_type": measurement.signal_type or "",
                    "pseudorange_m": measurement.value,
                    "pr_sigma_m": measurement.sigma,
                    "sat_x_ecef_m": satellite.ecef[0],
                    "sat_y_ecef_m": satellite.ecef[1],
                    "sat_z_ecef_m": satellite.ecef[2],
                }
            )
    return _write_table(rows, GNSS_COLUMNS, path)


def write_network_log(epochs: Sequence[Epoch], path: PathLike) -> Path:
    rows = []
    for epoch in epochs:
        for infrastructure in epoch.infrastructures():
            if infrastructure == Infrastructure.GNSS:
                continue
            for measurement in epoch.measurements[infrastructure]:
                rows.append(
                    {
                        "time_ms": measurement.time,
                        "infra": infrastructure.value,
                        "anchor_id": measurement.anchor_id,
                        "rssi_dbm_or_rtt_m": measurement.value,
                        "value_kind": measurement.value_kind.value,
                        "freq_hz": measurement.frequency_hz if measurement.frequency_hz is not None else "",
                    }
                )
    return _write_table(rows, NETWORK_COLUMNS, path)


def write_motion_log(samples: Sequence[MotionSample], path: PathLike) -> Path:
    rows = [
        dict(zip(MOTION_COLUMNS, (s.time, *s.velocity, *s.acceleration, *s.orientation)))
        for s in samples
    ]
    return _write_table(rows, MOTION_COLUMNS, path)


def write_anchor_db(anchors: Iterable[Anchor], path: PathLike) -> Path:
    rows = [
        {
            "infra": anchor.infrastructure.value,
            "id": anchor.id,
            "lat_deg": anchor.position.latitude,
            "lon_deg": anchor.position.longitude,
            "alt_m": anchor.position.altitude,
            "metadata_json": json.dumps(anchor.metadata, sort_keys=True) if anchor.metadata else "",
        }
        for anchor in anchors
    ]
    return _write_table(rows, ANCHOR_COLUMNS, path)


def _write_positions(positions: Mapping[int, GeoPoint], path: PathLike) -> Path:
    rows = [
        {"time_ms": time, "lat_deg": p.latitude, "lon_deg": p.longitude, "alt_m": p.altitude}
        for time, p in sorted(positions.items())
    ]
    return _write_table(rows, POSITION_COLUMNS, path)


def write_lbs_log(positions: Mapping[int, GeoPoint], path: PathLike) -> Path:
    return _write_positions(positions, path)


def write_truth(positions: Mapping[int, GeoPoint], path: PathLike) -> Path:
    return _write_positions(positions, path)


def write_labels(labels: Sequence[AttackLabel], path: PathLike) -> Path:
    rows = [
        {
            "time_ms": label.time,
            "attacked": int(label.attacked),
            "infra": label.infrastructure.value if label.infrastructure else "",
            "anchor_id": label.anchor_id or "",
        }
        for label in labels
    ]
    return _write_table(rows, LABEL_COLUMNS, path)


def write_fingerprints(db: FingerprintDb, path: PathLike) -> Path:
    rows = []
    for index, entry in enumerate(db.entries):
        for anchor_id, rssi in sorted(entry.rssi.items()):
            rows.append(
                {
                    "entry_id": f"fp{index:05d}",
                    "time_ms": entry.time,
                    "east_m": entry.position.east,
                    "north_m": entry.position.north,
                    "up_m": entry.position.up,
                    "anchor_id": anchor_id,
                    "rssi_dbm": rssi,
                }
            )
    return _write_table(rows, FINGERPRINT_COLUMNS, path)


def write_reports(reports: Sequence[DetectionReport], out_dir: PathLike) -> Tuple[Path, Path]:
    """Write reports as JSON lines plus the per-run summary CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jsonl_path = out_dir / DatasetFiles.REPORTS_JSONL
    with open(jsonl_path, "w", encoding="utf-8") as handle:
        for report in reports:
            handle.write(report.model_dump_json() + "\n")
    csv_path = _write_table([report.to_csv_row() for report in reports], REPORT_COLUMNS,
                            out_dir / DatasetFiles.REPORTS_CSV)
    return jsonl_path, csv_path


def parse_reports(path: PathLike) -> List[DetectionReport]:
    """Read a JSON-lines report stream back into DetectionReports."""
    path = Path(path)
    reports = []
    with open(path, encoding="utf-8") as handle:
        for line, text in enumerate(handle, start=1):
            if not text.strip():
                continue
            try:
                reports.append(DetectionReport.model_validate_json(text))
            except ValidationError as e:
                raise RowError(str(path), line, _validation_message(e)) from e
    return reports


@dataclass
class Dataset:
    """Everything in a dataset directory, aligned and ready for detection."""

    origin: GeoPoint
    epochs: List[Epoch]
    registry: AnchorRegistry
    truth: TimedPositions = field(default_factory=dict)
    labels: List[AttackLabel] = field(default_factory=list)
    fingerprints: Optional[FingerprintDb] = None
    scenario: Optional[ScenarioConfig] = None

    def truth_enu(self) -> Dict[int, EnuPoint]:
        return {time: wgs84_to_enu(point, self.origin) for time, point in self.truth.items()}


def load_scenario(path: PathLike) -> ScenarioConfig:
    """Load a scenario config from JSON."""
    path = Path(path)
    try:
        return ScenarioConfig.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        logger.error("Invalid scenario config {}: {}", path, e)
        raise


def load_dataset(
    directory: PathLike, origin: Optional[GeoPoint] = None, alignment_window_ms: int = 500
) -> Dataset:
    """Load a dataset directory written by the simulator (or by hand).

    The GNSS log and anchor database are required; the network, motion, LBS,
    truth, label and fingerprint files are read when present. The origin
    comes from the argument, else from scenario.json.
    """
    directory = Path(directory)
    for required in (DatasetFiles.GNSS, DatasetFiles.ANCHORS):
        if not (directory / required).exists():
            raise FileNotFoundError(f"{directory / required} not found")

    scenario = None
    if (directory / DatasetFiles.SCENARIO).exists():
        scenario = load_scenario(directory / DatasetFiles.SCENARIO)
    if origin is None:
        if scenario is None:
            raise InvalidArgumentError(f"No origin given and no {DatasetFiles.SCENARIO} in {directory}")
        origin = scenario.origin

    def optional(name: str, parser):
        file = directory / name
        return parser(file) if file.exists() else None

    gnss = parse_gnss_log(directory / DatasetFiles.GNSS)
    network = optional(DatasetFiles.NETWORK, parse_network_log) or []
    motion = optional(DatasetFiles.MOTION, parse_motion_log) or []
    lbs = optional(DatasetFiles.LBS, parse_lbs_log) or {}

    return Dataset(
        origin=origin,
        epochs=align_epochs(gnss, network, motion, lbs, alignment_window_ms),
        registry=load_anchor_db(directory / DatasetFiles.ANCHORS),
        truth=optional(DatasetFiles.TRUTH, parse_truth) or {},
        labels=optional(DatasetFiles.LABELS, parse_labels) or [],
        fingerprints=optional(DatasetFiles.FINGERPRINTS, parse_fingerprints),
        scenario=scenario,
    )
