"""
Configuration module for the extended RAIM detector and scenario simulator.

Provides physical constants, per-infrastructure defaults and validated
Pydantic configuration objects for detection runs and synthetic scenarios.
"""

import math
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .models import AttackKind, GeoPoint, Infrastructure


class WGS84:
    """WGS84 ellipsoid constants."""

    SEMI_MAJOR_AXIS = 6378137.0
    FLATTENING = 1.0 / 298.257223563

    @classmethod
    def eccentricity_squared(cls) -> float:
        return cls.FLATTENING * (2.0 - cls.FLATTENING)


class PhysicalConstants:
    """Constants used by the forward models."""

    SPEED_OF_LIGHT = 299_792_458.0
    EARTH_MEAN_RADIUS = 6_371_000.0
    GNSS_ORBIT_RADIUS = 26_560_000.0


class PathLossModel(BaseModel):
    """Log-distance path loss model mapping RSSI to distance."""

    reference_power_dbm: float = Field(default=-40.0, description="P0, received power at d0")
    reference_distance_m: float = Field(default=1.0, gt=0.0, description="d0 in meters")
    exponent: float = Field(default=2.7, gt=0.0, description="Path loss exponent n_pl")
    sensitivity_dbm: float = Field(default=-100.0, description="Weakest RSSI a receiver reports")
    shadowing_db: float = Field(default=2.0, gt=0.0, description="Shadowing std assumed when weighing ranges")

    def range_for(self, rssi: float) -> float:
        """Distance in meters that produces the given RSSI."""
        return self.reference_distance_m * 10.0 ** (
            (self.reference_power_dbm - rssi) / (10.0 * self.exponent)
        )

    @property
    def relative_range_sigma(self) -> float:
        """Range std as a fraction of the range, ln(10) * shadowing / (10 n)."""
        return math.log(10.0) * self.shadowing_db / (10.0 * self.exponent)

    def rssi_for(self, distance: float) -> float:
        """Noise-free RSSI at the given distance."""
        return self.reference_power_dbm - 10.0 * self.exponent * math.log10(
            max(distance, 1e-3) / self.reference_distance_m
        )

    model_config = ConfigDict(frozen=True)


class DefaultPathLoss:
    """Default propagation models per terrestrial infrastructure."""

    WIFI = {"reference_power_dbm": -40.0, "exponent": 2.7, "sensitivity_dbm": -100.0}
    CELL = {"reference_power_dbm": -30.0, "exponent": 2.7, "sensitivity_dbm": -115.0}
    BLUETOOTH = {"reference_power_dbm": -59.0, "exponent": 2.0, "sensitivity_dbm": -100.0}

    @classmethod
    def for_infrastructure(cls, infrastructure: Infrastructure) -> PathLossModel:
        """Get the default model for an RSSI-based infrastructure."""
        params = {
            Infrastructure.WIFI: cls.WIFI,
            Infrastructure.CELL: cls.CELL,
            Infrastructure.BLUETOOTH: cls.BLUETOOTH,
        }.get(infrastructure, cls.WIFI)
        return PathLossModel(**params)

    @classmethod
    def get_defaults(cls) -> Dict[Infrastructure, PathLossModel]:
        return {
            infra: cls.for_infrastructure(infra)
            for infra in (Infrastructure.WIFI, Infrastructure.CELL, Infrastructure.BLUETOOTH)
        }


class SamplingConfig(BaseModel):
    """How subsets are selected before solving."""

    strategy: Literal["uniform", "greedy_dop"] = Field(
        default="uniform", description="uniform random sampling or greedy DOP expansion (GNSS only)"
    )
    rate: float = Field(default=1.0, gt=0.0, le=1.0, description="Keep probability per subset")
    max_subsets: int = Field(
        default=512, ge=1, description="Cap N_sam per infrastructure per epoch"
    )
    dop_threshold: float = Field(default=3.0, gt=0.0, description="Spatial DOP bound for greedy expansion")
    greedy_max_size: Optional[int] = Field(
        default=None, ge=4, description="Largest greedy subset; None lets the first subset grow freely"
    )


class PositioningConfig(BaseModel):
    """Solver selection and parameters."""

    terrestrial_method: Literal["range_ls", "weighted_centroid", "fingerprint"] = Field(
        default="range_ls", description="Solver for Wi-Fi, cellular and Bluetooth subsets"
    )
    path_loss: Dict[Infrastructure, PathLossModel] = Field(
        default_factory=DefaultPathLoss.get_defaults, description="Propagation model per infrastructure"
    )
    geoip_gamma: float = Field(default=0.5, gt=0.0, le=1.0, description="RTT to distance calibration")
    geoip_grid_points: int = Field(default=120, ge=10, description="Samples per axis for GeoIP centroids")
    fingerprint_k: int = Field(default=3, ge=1, description="Neighbours averaged by fingerprinting")
    fingerprint_d_min: float = Field(default=1.0, gt=0.0, description="RSSI difference floor in dB")
    gnss_max_iterations: int = Field(default=20, ge=1)
    gnss_step_tolerance: float = Field(default=1e-8, gt=0.0, description="Gauss-Newton step tolerance in m")
    gnss_uere_m: float = Field(
        default=1.0, gt=0.0, description="Unit range error used when a subset reports no sigma"
    )
    geoip_range_sigma_m: float = Field(default=1000.0, gt=0.0, description="Std of a calibrated RTT distance")
    consistency_false_alarm: Optional[float] = Field(
        default=1e-3, gt=0.0, lt=1.0,
        description="False-alarm probability of the per-subset residual test; None keeps every solved subset",
    )
    receiver_up: Optional[float] = Field(
        default=None, description="Fixed receiver height for planar solvers; None uses the reported height"
    )

    @field_validator("path_loss")
    @classmethod
    def complete_path_loss(cls, v):
        """Fill infrastructures missing from a partial mapping with defaults."""
        merged = DefaultPathLoss.get_defaults()
        merged.update(v)
        return merged


class FilterConfig(BaseModel):
    """Motion-constrained local polynomial regression settings."""

    enabled: bool = Field(default=True)
    window: int = Field(default=15, ge=2, description="Window length w in epochs")
    order: int = Field(default=2, ge=1, description="Polynomial order n")
    kernel_decay: float = Field(default=0.3, gt=0.0, description="K(d) = exp(-decay * d^2)")
    motion_sigma_m: float = Field(default=1.0, gt=0.0, description="Per-epoch motion noise std")
    epsilon_m: Optional[float] = Field(
        default=None, ge=0.0, description="Constraint tolerance; None means 3x motion_sigma_m"
    )
    epoch_seconds: float = Field(default=1.0, gt=0.0, description="Duration of one epoch step")
    fallback_inflation: float = Field(default=2.0, ge=1.0, description="Uncertainty factor for unfiltered fixes")

    @model_validator(mode="after")
    def validate_window(self):
        if self.window < self.order + 1:
            raise ValueError("Window must hold at least order + 1 epochs")
        return self

    @property
    def tolerance(self) -> float:
        return self.epsilon_m if self.epsilon_m is not None else 3.0 * self.motion_sigma_m


class DetectorConfig(BaseModel):
    """Main configuration for the extended RAIM detector."""

    seed: int = Field(default=42, description="Seed for subset sampling")
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    positioning: PositioningConfig = Field(default_factory=PositioningConfig)
    filter: FilterConfig = Field(default_factory=FilterConfig)
    sigma_min: float = Field(default=1.0, gt=0.0, description="Uncertainty floor in meters")
    n_lambda: float = Field(default=3.0, ge=0.0, description="Coverage factor of the exclusion threshold")
    lambda_f: float = Field(default=0.5, gt=0.0, lt=1.0, description="Alarm threshold on f_t")
    max_exclusion_iterations: int = Field(default=20, ge=1)
    uniform_weights: bool = Field(
        default=False, description="Ignore uncertainties when fusing (idealized analysis)"
    )
    alignment_window_ms: int = Field(default=500, ge=0)
    infrastructures: Optional[List[Infrastructure]] = Field(
        default=None, description="Infrastructures to use; None uses all available"
    )

    model_config = ConfigDict(validate_assignment=True)


class BaselineConfig(BaseModel):
    """Comparison detectors: network-vs-GNSS distance and a constant-velocity Kalman filter."""

    distance_threshold_m: float = Field(default=100.0, gt=0.0, description="Alarm distance of the distance check")
    network_infrastructures: List[Infrastructure] = Field(
        default_factory=lambda: [Infrastructure.WIFI, Infrastructure.CELL, Infrastructure.BLUETOOTH],
        description="Infrastructures pooled into the network position",
    )
    kalman_threshold_m: float = Field(default=30.0, gt=0.0, description="Alarm innovation distance")
    kalman_gate_m: float = Field(
        default=50.0, gt=0.0, description="Innovations beyond the gate do not update the filter"
    )
    process_noise: float = Field(default=0.5, gt=0.0, description="Acceleration spectral density (m^2/s^3)")
    gnss_sigma_m: float = Field(default=5.0, gt=0.0, description="Horizontal std of a GNSS fix")
    velocity_sigma: float = Field(default=0.3, gt=0.0, description="Std of the motion-derived velocity")

    @field_validator("network_infrastructures")
    @classmethod
    def validate_network(cls, v):
        if Infrastructure.GNSS in v:
            raise ValueError("The network position cannot include GNSS")
        return v


class NoiseConfig(BaseModel):
    """Noise models of the forward simulation."""

    pseudorange_sigma_m: float = Field(default=2.0, ge=0.0)
    clock_walk_sigma_m: float = Field(default=10.0, ge=0.0, description="Clock bias random-walk step")
    rssi_shadowing_db: float = Field(default=2.0, ge=0.0)
    rtt_jitter_m: float = Field(default=2000.0, ge=0.0, description="Jitter of RTT distances")
    velocity_sigma: float = Field(default=0.05, ge=0.0)
    acceleration_sigma: float = Field(default=0.05, ge=0.0)
    orientation_sigma: float = Field(default=0.01, ge=0.0)
    lbs_sigma_m: float = Field(default=3.0, ge=0.0, description="Noise of the reported position")

    @classmethod
    def noiseless(cls) -> "NoiseConfig":
        return cls(
            pseudorange_sigma_m=0.0,
            clock_walk_sigma_m=0.0,
            rssi_shadowing_db=0.0,
            rtt_jitter_m=0.0,
            velocity_sigma=0.0,
            acceleration_sigma=0.0,
            orientation_sigma=0.0,
            lbs_sigma_m=0.0,
        )


class TrajectoryConfig(BaseModel):
    """Waypoint path travelled at constant speed."""

    mode: Literal["walking", "driving"] = Field(default="walking")
    speed_mps: Optional[float] = Field(default=None, gt=0.0, description="None uses the mode default")
    waypoints: List[Tuple[float, float]] = Field(
        default_factory=lambda: [(0.0, 0.0), (120.0, 0.0), (120.0, 80.0), (0.0, 80.0), (0.0, 0.0)],
        description="East/north waypoints in meters",
    )
    up_m: float = Field(default=0.0, description="Receiver height in the local frame")

    @field_validator("waypoints")
    @classmethod
    def validate_waypoints(cls, v):
        if len(v) < 2:
            raise ValueError("A trajectory needs at least two waypoints")
        return v

    @property
    def speed(self) -> float:
        if self.speed_mps is not None:
            return self.speed_mps
        return 1.4 if self.mode == "walking" else 10.0


class AnchorLayoutConfig(BaseModel):
    """Anchor counts and placement ranges."""

    gnss_count: Tuple[int, int] = Field(default=(8, 12))
    wifi_count: Tuple[int, int] = Field(default=(10, 15))
    cell_count: Tuple[int, int] = Field(default=(3, 6))
    bluetooth_count: Tuple[int, int] = Field(default=(0, 4))
    geoip_count: Tuple[int, int] = Field(default=(5, 5))
    wifi_radius_m: float = Field(default=60.0, gt=0.0, description="AP distance from the path")
    bluetooth_radius_m: float = Field(default=15.0, gt=0.0)
    cell_distance_m: Tuple[float, float] = Field(default=(300.0, 900.0))
    geoip_distance_m: Tuple[float, float] = Field(default=(50_000.0, 400_000.0))
    min_elevation_deg: float = Field(default=15.0, ge=0.0, lt=90.0)

    @field_validator("gnss_count", "wifi_count", "cell_count", "bluetooth_count", "geoip_count",
                     "cell_distance_m", "geoip_distance_m")
    @classmethod
    def validate_range(cls, v):
        if v[0] < 0 or v[0] > v[1]:
            raise ValueError(f"Invalid range {v}")
        return v

    def count_range(self, infrastructure: Infrastructure) -> Tuple[int, int]:
        return {
            Infrastructure.GNSS: self.gnss_count,
            Infrastructure.WIFI: self.wifi_count,
            Infrastructure.CELL: self.cell_count,
            Infrastructure.BLUETOOTH: self.bluetooth_count,
            Infrastructure.GEOIP: self.geoip_count,
        }[infrastructure]


class AttackSchedule(BaseModel):
    """One attack applied over a window of epochs [start_epoch, end_epoch)."""

    kind: AttackKind = Field(default=AttackKind.NONE)
    start_epoch: int = Field(default=0, ge=0)
    end_epoch: int = Field(default=1, ge=1)
    offset_m: Tuple[float, float] = Field(
        default=(150.0, 0.0), description="East/north spoof offset from the truth (coordinated)"
    )
    affected_counts: Dict[Infrastructure, int] = Field(
        default_factory=dict, description="Number of attacked anchors per infrastructure (N_adv)"
    )
    affected_ids: Dict[Infrastructure, List[str]] = Field(
        default_factory=dict, description="Explicit attacked anchor ids; take precedence over counts"
    )
    jam_all: List[Infrastructure] = Field(
        default_factory=list, description="Infrastructures jammed completely"
    )
    min_offset_m: float = Field(default=100.0, gt=0.0, description="Smallest uncoordinated offset")
    max_offset_m: float = Field(default=300.0, gt=0.0, description="Largest uncoordinated offset")
    drift_terminal_m: float = Field(default=150.0, ge=0.0)
    drift_profile: Literal["linear", "quadratic"] = Field(default="linear")
    drift_heading_deg: float = Field(default=90.0, description="Compass heading of the drift")
    spoof_clock_offset_m: float = Field(default=0.0, description="Spoofer time offset seen by GNSS")

    @field_validator("affected_counts")
    @classmethod
    def validate_counts(cls, v):
        for infra, count in v.items():
            if count < 0:
                raise ValueError(f"Negative affected count for {infra.value}")
        return v

    @model_validator(mode="after")
    def validate_window(self):
        if self.start_epoch >= self.end_epoch:
            raise ValueError("Attack start must precede its end")
        if self.min_offset_m > self.max_offset_m:
            raise ValueError("min_offset_m must not exceed max_offset_m")
        return self

    def is_active(self, epoch_index: int) -> bool:
        return self.kind != AttackKind.NONE and self.start_epoch <= epoch_index < self.end_epoch

    def ramp_fraction(self, epoch_index: int) -> float:
        """Fraction of the drift terminal offset reached at an epoch inside the window."""
        span = self.end_epoch - self.start_epoch - 1
        if span <= 0:
            return 1.0
        fraction = min(max((epoch_index - self.start_epoch) / span, 0.0), 1.0)
        return fraction if self.drift_profile == "linear" else fraction ** 2


class ScenarioConfig(BaseModel):
    """Complete description of a synthetic scenario."""

    name: str = Field(default="scenario")
    seed: int = Field(default=42, description="Random seed for reproducibility")
    origin: GeoPoint = Field(
        default_factory=lambda: GeoPoint(latitude=59.4040, longitude=17.9470, altitude=30.0)
    )
    epochs: int = Field(default=300, ge=1)
    cadence_ms: int = Field(default=1000, ge=1)
    start_time_ms: int = Field(default=1_700_000_000_000, ge=0)
    network_period_epochs: int = Field(default=1, ge=1, description="Epochs between network scans")
    network_offset_ms: int = Field(default=0, description="Network scan time offset from the GNSS epoch")
    trajectory: TrajectoryConfig = Field(default_factory=TrajectoryConfig)
    layout: AnchorLayoutConfig = Field(default_factory=AnchorLayoutConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    path_loss: Dict[Infrastructure, PathLossModel] = Field(default_factory=DefaultPathLoss.get_defaults)
    geoip_gamma: float = Field(default=0.5, gt=0.0, le=1.0)
    attacks: List[AttackSchedule] = Field(default_factory=list)
    fingerprint_spacing_m: Optional[float] = Field(
        default=None, gt=0.0, description="Grid spacing of a benign fingerprint survey, None disables it"
    )

    @field_validator("path_loss")
    @classmethod
    def complete_path_loss(cls, v):
        merged = DefaultPathLoss.get_defaults()
        merged.update(v)
        return merged

    @model_validator(mode="after")
    def validate_attacks(self):
        """Attack windows must lie inside the scenario."""
        for attack in self.attacks:
            if attack.end_epoch > self.epochs:
                raise ValueError(
                    f"Attack window [{attack.start_epoch}, {attack.end_epoch}) exceeds {self.epochs} epochs"
                )
        return self

    model_config = ConfigDict(validate_assignment=True)


# Default configuration instances
DEFAULT_DETECTOR_CONFIG = DetectorConfig()
DEFAULT_SCENARIO_CONFIG = ScenarioConfig()
