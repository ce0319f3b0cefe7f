"""
WGS84 geodesy: geodetic, earth-centered (ECEF) and local east/north/up frames.

All solver math runs in ENU meters around a scenario origin; these helpers are
only used at the input/output boundary.
"""

import math
from typing import Sequence, Tuple

import numpy as np

from .config import WGS84
from .exceptions import InvalidArgumentError
from .models import EnuPoint, GeoPoint

_A = WGS84.SEMI_MAJOR_AXIS
_E2 = WGS84.eccentricity_squared()


def _check_finite(values: Sequence[float], label: str):
    if not np.all(np.isfinite(np.asarray(values, dtype=float))):
        raise InvalidArgumentError(f"{label} must be finite, got {list(values)}")


def geodetic_to_ecef(latitude: float, longitude: float, altitude: float) -> np.ndarray:
    """Convert degrees/meters on the WGS84 ellipsoid to ECEF meters."""
    _check_finite([latitude, longitude, altitude], "Geodetic coordinates")
    lat = math.radians(latitude)
    lon = math.radians(longitude)
    sin_lat = math.sin(lat)
    n = _A / math.sqrt(1.0 - _E2 * sin_lat * sin_lat)
    return np.array(
        [
            (altitude + n) * math.cos(lat) * math.cos(lon),
            (altitude + n) * math.cos(lat) * math.sin(lon),
            (altitude + (1.0 - _E2) * n) * sin_lat,
        ]
    )


def ecef_to_geodetic(xyz: Sequence[float]) -> Tuple[float, float, float]:
    """Convert ECEF meters to (latitude deg, longitude deg, altitude m).

    Fixed-point iteration on the latitude; the height formula
    h = p cos(lat) + z sin(lat) - a^2 / N stays well conditioned at the poles.
    """
    _check_finite(xyz, "ECEF coordinates")
    x, y, z = (float(v) for v in xyz)
    lon = math.atan2(y, x)
    p = math.hypot(x, y)
    lat = math.atan2(z, p * (1.0 - _E2))
    for _ in range(12):
        sin_lat = math.sin(lat)
        n = _A / math.sqrt(1.0 - _E2 * sin_lat * sin_lat)
        h = p * math.cos(lat) + z * sin_lat - _A * _A / n
        updated = math.atan2(z, p * (1.0 - _E2 * n / (n + h)))
        converged = abs(updated - lat) < 1e-15
        lat = updated
        if converged:
            break
    sin_lat = math.sin(lat)
    n = _A / math.sqrt(1.0 - _E2 * sin_lat * sin_lat)
    h = p * math.cos(lat) + z * sin_lat - _A * _A / n
    return math.degrees(lat), math.degrees(lon), h


def enu_rotation(origin: GeoPoint) -> np.ndarray:
    """Rows are the east, north and up unit vectors of the origin, in ECEF."""
    lat = math.radians(origin.latitude)
    lon = math.radians(origin.longitude)
    sin_lat, cos_lat = math.sin(lat), math.cos(lat)
    sin_lon, cos_lon = math.sin(lon), math.cos(lon)
    return np.array(
        [
            [-sin_lon, cos_lon, 0.0],
            [-sin_lat * cos_lon, -sin_lat * sin_lon, cos_lat],
            [cos_lat * cos_lon, cos_lat * sin_lon, sin_lat],
        ]
    )


def ecef_to_enu(xyz: Sequence[float], origin: GeoPoint) -> EnuPoint:
    _check_finite(xyz, "ECEF coordinates")
    delta = np.asarray(xyz, dtype=float) - geodetic_to_ecef(
        origin.latitude, origin.longitude, origin.altitude
    )
    return EnuPoint.from_array(enu_rotation(origin) @ delta)


def enu_to_ecef(point: EnuPoint, origin: GeoPoint) -> np.ndarray:
    base = geodetic_to_ecef(origin.latitude, origin.longitude, origin.altitude)
    return base + enu_rotation(origin).T @ point.as_array()


def wgs84_to_enu(point: GeoPoint, origin: GeoPoint) -> EnuPoint:
    """Express a WGS84 position in the local tangent plane of origin."""
    _check_finite([point.latitude, point.longitude, point.altitude], "Point")
    _check_finite([origin.latitude, origin.longitude, origin.altitude], "Origin")
    return ecef_to_enu(geodetic_to_ecef(point.latitude, point.longitude, point.altitude), origin)


def enu_to_wgs84(point: EnuPoint, origin: GeoPoint) -> GeoPoint:
    """Inverse of wgs84_to_enu."""
    _check_finite([point.east, point.north, point.up], "ENU point")
    latitude, longitude, altitude = ecef_to_geodetic(enu_to_ecef(point, origin))
    return GeoPoint(latitude=latitude, longitude=longitude, altitude=altitude)
