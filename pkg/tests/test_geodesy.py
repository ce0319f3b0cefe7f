"""
Tests for WGS84 frame conversions.
"""

import numpy as np
import pytest

from xraim.config import WGS84
from xraim.exceptions import InvalidArgumentError
from xraim.geodesy import (
    ecef_to_geodetic,
    enu_rotation,
    enu_to_wgs84,
    geodetic_to_ecef,
    wgs84_to_enu,
)
from xraim.models import EnuPoint, GeoPoint


class TestEcef:
    """Geodetic to earth-centered conversions."""

    def test_equator_prime_meridian(self):
        xyz = geodetic_to_ecef(0.0, 0.0, 0.0)
        np.testing.assert_allclose(xyz, [WGS84.SEMI_MAJOR_AXIS, 0.0, 0.0], atol=1e-6)

    def test_north_pole(self):
        polar_radius = WGS84.SEMI_MAJOR_AXIS * (1.0 - WGS84.FLATTENING)
        xyz = geodetic_to_ecef(90.0, 0.0, 0.0)
        np.testing.assert_allclose(xyz, [0.0, 0.0, polar_radius], atol=1e-6)

    @pytest.mark.parametrize(
        "latitude,longitude,altitude",
        [(59.4040, 17.9470, 30.0), (-33.86, 151.21, 58.0), (89.9, -45.0, 1200.0), (0.0, 179.9, -20.0)],
    )
    def test_inverse(self, latitude, longitude, altitude):
        lat, lon, alt = ecef_to_geodetic(geodetic_to_ecef(latitude, longitude, altitude))
        assert lat == pytest.approx(latitude, abs=1e-9)
        assert lon == pytest.approx(longitude, abs=1e-9)
        assert alt == pytest.approx(altitude, abs=1e-4)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidArgumentError):
            geodetic_to_ecef(float("nan"), 0.0, 0.0)

    def test_matches_pyproj(self):
        pyproj = pytest.importorskip("pyproj")
        transformer = pyproj.Transformer.from_crs("EPSG:4979", "EPSG:4978", always_xy=True)
        for latitude, longitude, altitude in [(59.4040, 17.9470, 30.0), (-12.5, -77.0, 150.0)]:
            expected = transformer.transform(longitude, latitude, altitude)
            np.testing.assert_allclose(geodetic_to_ecef(latitude, longitude, altitude), expected, atol=1e-3)


class TestEnu:
    """Local tangent plane conversions around a scenario origin."""

    def test_origin_maps_to_zero(self, origin):
        point = wgs84_to_enu(origin, origin)
        assert point.as_array() == pytest.approx([0.0, 0.0, 0.0], abs=1e-6)

    def test_rotation_is_orthonormal(self, origin):
        rotation = enu_rotation(origin)
        np.testing.assert_allclose(rotation @ rotation.T, np.eye(3), atol=1e-12)

    def test_round_trip(self, origin):
        local = EnuPoint(east=350.0, north=-120.0, up=12.0)
        restored = wgs84_to_enu(enu_to_wgs84(local, origin), origin)
        np.testing.assert_allclose(restored.as_array(), local.as_array(), atol=1e-6)

    def test_northward_offset(self, origin):
        north = GeoPoint(latitude=origin.latitude + 0.001, longitude=origin.longitude, altitude=origin.altitude)
        point = wgs84_to_enu(north, origin)
        # about 111 m per millidegree of latitude
        assert point.north == pytest.approx(111.4, abs=0.5)
        assert abs(point.east) < 1e-6
