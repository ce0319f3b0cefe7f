"""
Extended RAIM location spoofing defense

Cross-validates position estimates from anchor subsets of several
positioning infrastructures (GNSS, Wi-Fi, cellular, Bluetooth, GeoIP) to
detect spoofing and recover a trustworthy position.

This package provides:
- Positioning solvers and subset generation per infrastructure
- Motion-constrained smoothing of subset estimates
- Attack likelihood scoring, exclusion and position recovery
- Counting conditions for recoverability
- A scenario simulator with attack injection and baseline detectors
"""

__version__ = "0.1.0"

from .config import DetectorConfig, ScenarioConfig
from .fusion import attack_likelihood, exclude_inconsistent, recover_position
from .ingest import AnchorRegistry, load_dataset
from .models import DetectionReport, EnuPoint, Epoch, GeoPoint, Infrastructure, SubsetEstimate
from .pipeline import ExtendedRaimDetector
from .simulator import ScenarioGenerator

__all__ = [
    "DetectorConfig",
    "ScenarioConfig",
    "attack_likelihood",
    "exclude_inconsistent",
    "recover_position",
    "AnchorRegistry",
    "load_dataset",
    "DetectionReport",
    "EnuPoint",
    "Epoch",
    "GeoPoint",
    "Infrastructure",
    "SubsetEstimate",
    "ExtendedRaimDetector",
    "ScenarioGenerator",
]
