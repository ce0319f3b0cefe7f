"""
Shared fixtures: a scenario origin, small noiseless scenarios and estimate builders.
"""

import numpy as np
import pytest

from xraim.config import AnchorLayoutConfig, NoiseConfig, ScenarioConfig, TrajectoryConfig
from xraim.models import EnuPoint, GeoPoint, Infrastructure, SubsetEstimate, SubsetSpec
from xraim.simulator import ScenarioGenerator

_MEMBERS = {
    Infrastructure.GNSS: ("G01", "G02", "G03", "G04"),
    Infrastructure.WIFI: ("ap01", "ap02", "ap03"),
    Infrastructure.CELL: ("cell01", "cell02", "cell03"),
}


@pytest.fixture
def origin() -> GeoPoint:
    return GeoPoint(latitude=59.4040, longitude=17.9470, altitude=30.0)


@pytest.fixture
def small_layout() -> AnchorLayoutConfig:
    return AnchorLayoutConfig(
        gnss_count=(6, 6),
        wifi_count=(5, 5),
        cell_count=(3, 3),
        bluetooth_count=(0, 0),
        geoip_count=(0, 0),
    )


@pytest.fixture
def straight_scenario(origin, small_layout) -> ScenarioConfig:
    """Noiseless walk along a straight east-bound line."""
    return ScenarioConfig(
        name="straight",
        seed=7,
        origin=origin,
        epochs=12,
        trajectory=TrajectoryConfig(waypoints=[(0.0, 0.0), (200.0, 0.0)]),
        layout=small_layout,
        noise=NoiseConfig.noiseless(),
    )


@pytest.fixture
def benign_run(straight_scenario):
    return ScenarioGenerator(straight_scenario).run()


def make_estimate(
    position,
    sigma=1.0,
    index=0,
    infrastructure: Infrastructure = Infrastructure.WIFI,
) -> SubsetEstimate:
    """Subset estimate at an (east, north, up) position with isotropic uncertainty."""
    point = EnuPoint.from_array(np.asarray(position, dtype=float))
    return SubsetEstimate(
        spec=SubsetSpec(infrastructure=infrastructure, members=_MEMBERS[infrastructure], index=index),
        position=point,
        raw_position=point,
        uncertainty=(float(sigma),) * 3,
    )


@pytest.fixture
def estimate_factory():
    return make_estimate
