"""
Pydantic models for anchors, ranging measurements and detection results.

All models are frozen after construction so epochs, registries and reports can
be shared freely between pipeline stages. Validation follows the measurement
conventions of the input logs: RSSI in dBm (never positive), pseudoranges and
RTT distances in meters, angles in radians.
"""

import math
from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Vector3 = Tuple[float, float, float]


class Infrastructure(str, Enum):
    """Positioning infrastructures an anchor can belong to."""

    GNSS = "GNSS"
    WIFI = "WIFI"
    CELL = "CELL"
    BLUETOOTH = "BLUETOOTH"
    GEOIP = "GEOIP"

    @property
    def min_subset_size(self) -> int:
        """Fewest anchors that pin down a position for this infrastructure."""
        return 4 if self is Infrastructure.GNSS else 3

    @property
    def is_terrestrial(self) -> bool:
        return self in (Infrastructure.WIFI, Infrastructure.CELL, Infrastructure.BLUETOOTH)


class ValueKind(str, Enum):
    """Physical meaning of a measurement value."""

    PSEUDORANGE = "PSEUDORANGE"
    RSSI = "RSSI"
    RTT_DISTANCE = "RTT_DISTANCE"


class AttackKind(str, Enum):
    """Attack classes the simulator can inject."""

    NONE = "NONE"
    UNCOORDINATED = "UNCOORDINATED"
    COORDINATED = "COORDINATED"
    JAMMING = "JAMMING"
    GRADUAL_DRIFT = "GRADUAL_DRIFT"


EXPECTED_VALUE_KIND = {
    Infrastructure.GNSS: ValueKind.PSEUDORANGE,
    Infrastructure.WIFI: ValueKind.RSSI,
    Infrastructure.CELL: ValueKind.RSSI,
    Infrastructure.BLUETOOTH: ValueKind.RSSI,
    Infrastructure.GEOIP: ValueKind.RTT_DISTANCE,
}


def wrap_angle(angle: float) -> float:
    """Wrap an angle in radians to (-pi, pi]."""
    return math.pi - (math.pi - angle) % (2.0 * math.pi)


def _require_finite(values, label: str):
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"{label} must be finite")


class GeoPoint(BaseModel):
    """WGS84 geodetic position."""

    latitude: float = Field(..., ge=-90.0, le=90.0, description="Latitude in degrees")
    longitude: float = Field(..., ge=-180.0, le=180.0, description="Longitude in degrees")
    altitude: float = Field(default=0.0, description="Height above the ellipsoid in meters")

    @field_validator("latitude", "longitude", "altitude")
    @classmethod
    def validate_finite(cls, v):
        _require_finite([v], "Geodetic coordinates")
        return v

    model_config = ConfigDict(frozen=True)


class EnuPoint(BaseModel):
    """Position in meters in the local east/north/up frame of a scenario origin."""

    east: float = Field(..., description="East offset in meters")
    north: float = Field(..., description="North offset in meters")
    up: float = Field(default=0.0, description="Up offset in meters")

    @field_validator("east", "north", "up")
    @classmethod
    def validate_finite(cls, v):
        _require_finite([v], "ENU components")
        return v

    def as_array(self) -> np.ndarray:
        return np.array([self.east, self.north, self.up], dtype=float)

    @classmethod
    def from_array(cls, values) -> "EnuPoint":
        east, north, up = (float(v) for v in values)
        return cls(east=east, north=north, up=up)

    def distance_to(self, other: "EnuPoint") -> float:
        return float(np.linalg.norm(self.as_array() - other.as_array()))

    model_config = ConfigDict(frozen=True)


class Anchor(BaseModel):
    """Transmitter with a known position (satellite, AP, base station, beacon, GeoIP server)."""

    id: str = Field(..., min_length=1, description="Identifier, unique within its infrastructure")
    infrastructure: Infrastructure = Field(..., description="Infrastructure the anchor belongs to")
    position: GeoPoint = Field(..., description="Anchor position")
    metadata: Dict[str, str] = Field(default_factory=dict, description="SSID, cell id, signal type, ...")
    ecef: Optional[Vector3] = Field(
        default=None,
        description="Earth-centered position in meters, kept for satellites to avoid geodetic round trips",
    )

    @field_validator("ecef")
    @classmethod
    def validate_ecef(cls, v):
        if v is not None:
            _require_finite(v, "ECEF coordinates")
        return v

    model_config = ConfigDict(frozen=True)


class RangingMeasurement(BaseModel):
    """One timestamped observation of an anchor."""

    time: int = Field(..., description="Unix time in milliseconds")
    anchor_id: str = Field(..., min_length=1, description="Observed anchor")
    infrastructure: Infrastructure = Field(..., description="Infrastructure of the anchor")
    value: float = Field(..., description="Meters for pseudorange/RTT distance, dBm for RSSI")
    value_kind: ValueKind = Field(..., description="Meaning of value")
    sigma: float = Field(default=0.0, ge=0.0, description="Reported uncertainty in the unit of value")
    frequency_hz: Optional[float] = Field(default=None, description="Carrier frequency if reported")
    signal_type: Optional[str] = Field(default=None, description="GNSS signal label (L1, E1, ...)")

    @model_validator(mode="after")
    def validate_value(self):
        """Check the value against the physical range of its kind."""
        _require_finite([self.value, self.sigma], "Measurement value and sigma")
        expected = EXPECTED_VALUE_KIND[self.infrastructure]
        if self.value_kind != expected:
            raise ValueError(
                f"{self.infrastructure.value} measurements must be {expected.value}, got {self.value_kind.value}"
            )
        if self.value_kind == ValueKind.RSSI and self.value > 0.0:
            raise ValueError(f"RSSI must be <= 0 dBm, got {self.value}")
        if self.value_kind in (ValueKind.PSEUDORANGE, ValueKind.RTT_DISTANCE) and self.value <= 0.0:
            raise ValueError(f"{self.value_kind.value} must be positive, got {self.value}")
        return self

    model_config = ConfigDict(frozen=True)


class MotionSample(BaseModel):
    """Onboard motion sensing in the body frame (right, forward, up)."""

    time: int = Field(..., description="Unix time in milliseconds")
    velocity: Vector3 = Field(default=(0.0, 0.0, 0.0), description="Body-frame velocity in m/s")
    acceleration: Vector3 = Field(default=(0.0, 0.0, 0.0), description="Body-frame acceleration in m/s^2")
    orientation: Vector3 = Field(default=(0.0, 0.0, 0.0), description="Roll, pitch, yaw in radians")

    @field_validator("velocity", "acceleration")
    @classmethod
    def validate_vectors(cls, v):
        _require_finite(v, "Motion vectors")
        return v

    @field_validator("orientation")
    @classmethod
    def wrap_orientation(cls, v):
        _require_finite(v, "Orientation")
        return tuple(wrap_angle(a) for a in v)

    model_config = ConfigDict(frozen=True)


class Epoch(BaseModel):
    """Temporally aligned measurements of one positioning instant."""

    time: int = Field(..., description="Epoch time, Unix milliseconds")
    measurements: Dict[Infrastructure, List[RangingMeasurement]] = Field(
        default_factory=dict, description="Measurements grouped by infrastructure"
    )
    anchors: Dict[str, Anchor] = Field(
        default_factory=dict, description="Per-epoch inline anchors (GNSS satellites) keyed by id"
    )
    motion: Optional[MotionSample] = Field(default=None, description="Motion sample for this epoch")
    lbs_position: Optional[GeoPoint] = Field(
        default=None, description="Position reported by the platform location service"
    )
    alignment_window_ms: int = Field(default=500, ge=0, description="Allowed measurement time offset")

    @model_validator(mode="after")
    def validate_alignment(self):
        """All measurements belong to their group and lie within the alignment window."""
        for infrastructure, group in self.measurements.items():
            for measurement in group:
                if measurement.infrastructure != infrastructure:
                    raise ValueError(
                        f"Measurement of {measurement.anchor_id} filed under {infrastructure.value}"
                    )
                if abs(measurement.time - self.time) > self.alignment_window_ms:
                    raise ValueError(
                        f"Measurement at {measurement.time} outside alignment window of epoch {self.time}"
                    )
        return self

    def infrastructures(self) -> List[Infrastructure]:
        """Infrastructures with at least one measurement, in declaration order."""
        return [infra for infra in Infrastructure if self.measurements.get(infra)]

    def measurement_count(self) -> int:
        return sum(len(group) for group in self.measurements.values())

    model_config = ConfigDict(frozen=True)


class SubsetSpec(BaseModel):
    """Anchor subset of one infrastructure used for one temporary position estimate."""

    infrastructure: Infrastructure = Field(..., description="Infrastructure m")
    members: Tuple[str, ...] = Field(..., description="Member anchor ids, sorted")
    index: int = Field(..., ge=0, description="Subset index l within the infrastructure")

    @model_validator(mode="after")
    def validate_members(self):
        if len(set(self.members)) != len(self.members):
            raise ValueError("Subset members must be unique")
        if len(self.members) < self.infrastructure.min_subset_size:
            raise ValueError(
                f"{self.infrastructure.value} subsets need at least "
                f"{self.infrastructure.min_subset_size} members, got {len(self.members)}"
            )
        return self

    @property
    def key(self) -> Tuple[Infrastructure, Tuple[str, ...]]:
        """Identity of the subset across epochs (indices are per-epoch)."""
        return self.infrastructure, self.members

    model_config = ConfigDict(frozen=True)


class SubsetEstimate(BaseModel):
    """Temporary position and uncertainty from one subset."""

    spec: SubsetSpec
    position: EnuPoint = Field(..., description="Smoothed position when filtered, else the raw solution")
    raw_position: EnuPoint = Field(..., description="Solver output before motion filtering")
    uncertainty: Vector3 = Field(..., description="Per-axis standard deviation in meters")
    diagnostics: Dict[str, Any] = Field(default_factory=dict, description="Solver-specific details")
    filtered: bool = Field(default=False, description="Whether the motion filter produced position")

    @field_validator("uncertainty")
    @classmethod
    def validate_uncertainty(cls, v):
        _require_finite(v, "Uncertainty")
        if min(v) <= 0.0:
            raise ValueError("Uncertainty components must be positive")
        return v

    model_config = ConfigDict(frozen=True)


class SubsetFailure(BaseModel):
    """Subset whose solve failed, with the logged reason."""

    spec: SubsetSpec
    reason: str

    model_config = ConfigDict(frozen=True)


class SubsetDensity(BaseModel):
    """Axis-aligned Gaussian describing one subset estimate."""

    mean: EnuPoint
    sigma: Vector3

    @field_validator("sigma")
    @classmethod
    def validate_sigma(cls, v):
        _require_finite(v, "Sigma")
        if min(v) <= 0.0:
            raise ValueError("Sigma components must be positive")
        return v

    model_config = ConfigDict(frozen=True)


class SubsetDeviation(BaseModel):
    """Distance of one subset estimate from the preliminary fused position."""

    infrastructure: Infrastructure
    index: int
    deviation_m: float

    model_config = ConfigDict(frozen=True)


class DetectionReport(BaseModel):
    """Per-epoch outcome of the extended RAIM detector."""

    time: int = Field(..., description="Epoch time, Unix milliseconds")
    score: Optional[float] = Field(default=None, ge=0.0, le=1.0, description="Attack likelihood f_t")
    alarm: bool = Field(default=False, description="score > lambda_f")
    lambda_f: float = Field(..., gt=0.0, lt=1.0, description="Alarm threshold used")
    score_reference: Literal["lbs", "fused", "none"] = Field(
        default="none", description="Which position the score was evaluated at"
    )
    preliminary_fused: Optional[EnuPoint] = Field(default=None, description="Fusion of all subsets")
    deviations: List[SubsetDeviation] = Field(default_factory=list)
    excluded: List[SubsetSpec] = Field(default_factory=list)
    benign_index_sets: Dict[Infrastructure, List[int]] = Field(default_factory=dict)
    recovered: Optional[EnuPoint] = Field(default=None, description="Position from benign subsets")
    iterations: int = Field(default=0, ge=0)
    n_estimates: int = Field(default=0, ge=0)
    n_failures: int = Field(default=0, ge=0)
    status: Literal["ok", "trivial", "no_data"] = Field(default="ok")

    @model_validator(mode="after")
    def validate_partition(self):
        """Excluded and benign subsets are disjoint; recovery exists iff a benign subset does."""
        excluded = {(spec.infrastructure, spec.index) for spec in self.excluded}
        benign = {(infra, idx) for infra, indices in self.benign_index_sets.items() for idx in indices}
        if excluded & benign:
            raise ValueError("A subset cannot be both excluded and benign")
        if (self.recovered is not None) != bool(benign):
            raise ValueError("recovered must be present exactly when benign subsets remain")
        return self

    def to_csv_row(self) -> Dict[str, Any]:
        recovered = self.recovered
        return {
            "time_ms": self.time,
            "score": self.score,
            "alarm": int(self.alarm),
            "recovered_e": recovered.east if recovered else None,
            "recovered_n": recovered.north if recovered else None,
            "recovered_u": recovered.up if recovered else None,
            "n_excluded": len(self.excluded),
        }

    model_config = ConfigDict(frozen=True)


class BaselineDecision(BaseModel):
    """Per-epoch output of a comparison detector; the score is a distance in meters."""

    time: int = Field(..., description="Epoch time, Unix milliseconds")
    score: Optional[float] = Field(default=None, ge=0.0, description="None when no fix was available")
    alarm: bool = Field(default=False)
    position: Optional[EnuPoint] = Field(default=None, description="Position the detector would report")

    model_config = ConfigDict(frozen=True)


class RocPoint(BaseModel):
    """One threshold of a receiver operating characteristic sweep."""

    lambda_f: float = Field(..., ge=0.0, le=1.0)
    p_fp: float = Field(..., ge=0.0, le=1.0)
    p_tp: float = Field(..., ge=0.0, le=1.0)

    model_config = ConfigDict(frozen=True)


class MetricsSummary(BaseModel):
    """Detection and recovery metrics of one or more labeled runs."""

    lambda_f: float = Field(..., ge=0.0, le=1.0)
    n_attacked: int = Field(default=0, ge=0)
    n_benign: int = Field(default=0, ge=0)
    p_tp: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    p_fp: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    delta_t_d: Optional[float] = Field(default=None, ge=0.0, description="Mean detection delay in seconds")
    window_delays: List[Optional[float]] = Field(default_factory=list)
    roc: List[RocPoint] = Field(default_factory=list)
    auc: Optional[float] = Field(default=None)
    recovery_mae: Optional[float] = None
    recovery_median: Optional[float] = None
    recovery_p20: Optional[float] = None
    recovery_p80: Optional[float] = None
    lbs_mae: Optional[float] = Field(default=None, description="MAE of following the reported position")
    fused_mae: Optional[float] = Field(default=None, description="MAE of fusion without exclusion")
    score_mean: Optional[float] = None
    score_std: Optional[float] = None

    @field_validator("roc")
    @classmethod
    def validate_roc_sorted(cls, v):
        thresholds = [point.lambda_f for point in v]
        if thresholds != sorted(thresholds):
            raise ValueError("ROC points must be sorted by lambda_f")
        return v

    model_config = ConfigDict(frozen=True)


class FingerprintEntry(BaseModel):
    """One surveyed RSSI vector and where it was recorded."""

    rssi: Dict[str, float] = Field(..., description="RSSI in dBm keyed by anchor id")
    position: EnuPoint
    time: int = Field(default=0, description="Survey time, Unix milliseconds")

    @field_validator("rssi")
    @classmethod
    def validate_rssi(cls, v):
        if not v:
            raise ValueError("A fingerprint needs at least one RSSI value")
        _require_finite(v.values(), "Fingerprint RSSI")
        return v

    model_config = ConfigDict(frozen=True)


class FingerprintDb(BaseModel):
    """Fingerprint survey used for RSSI pattern matching."""

    entries: List[FingerprintEntry] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    model_config = ConfigDict(frozen=True)


class AttackLabel(BaseModel):
    """Ground-truth label row: an attacked anchor at an epoch, or a whole epoch's status."""

    time: int = Field(..., description="Epoch time, Unix milliseconds")
    attacked: bool = Field(default=False)
    infrastructure: Optional[Infrastructure] = Field(default=None, description="Empty for epoch-level rows")
    anchor_id: Optional[str] = Field(default=None, description="Empty for epoch-level rows")

    model_config = ConfigDict(frozen=True)
