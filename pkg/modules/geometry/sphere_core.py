"""
Mapping between ERP pixel coordinates, spherical coordinates and 3D unit vectors.

Conventions:
    - lat is colatitude in [0, pi]; row 0 is the north pole.
    - lon grows eastward with the column index, in [0, 2*pi).
    - Pixel coordinates use the raw index (no half-pixel centre offset).
    - The z axis is the polar (yaw) axis of a right-handed frame.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

from modules.config import POLE_EPSILON, UNIT_NORM_TOLERANCE
from modules.errors import InvalidCoordinateError, InvalidDimensionsError, InvalidVectorError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


@lru_cache(maxsize=None)
def _warn_aspect(height: int, width: int) -> None:
    logger.warning("Non-standard ERP aspect %dx%d (expected width = 2 * height)", height, width)


def _wrap_longitude(lon: float) -> float:
    lon = lon % TWO_PI
    # x % 2pi can round up to 2pi for tiny negative x
    if lon >= TWO_PI:
        lon = 0.0
    return lon


@dataclass(frozen=True)
class ImageDims:
    """Height and width of an ERP raster, in pixels."""

    height: int
    width: int

    def __post_init__(self):
        if self.height < 2 or self.width < 2:
            raise InvalidDimensionsError(
                f"ERP dimensions must be at least 2x2, got {self.height}x{self.width}"
            )
        if not self.is_standard_aspect:
            _warn_aspect(self.height, self.width)

    @property
    def is_standard_aspect(self) -> bool:
        return self.width == 2 * self.height

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width


@dataclass(frozen=True)
class SphericalCoord:
    """Colatitude/longitude pair in radians. Longitude is normalized on construction."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise InvalidCoordinateError(f"Non-finite spherical coordinate ({self.lat}, {self.lon})")
        if not 0.0 <= self.lat <= math.pi:
            raise InvalidCoordinateError(f"Colatitude {self.lat} outside [0, pi]")
        object.__setattr__(self, "lon", _wrap_longitude(self.lon))


@dataclass(frozen=True)
class UnitVec3:
    x: float
    y: float
    z: float

    @property
    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "UnitVec3":
        return cls(float(values[0]), float(values[1]), float(values[2]))


@dataclass(frozen=True)
class PixelCoord:
    """Continuous (row, column) position in an ERP raster."""

    i: float
    j: float


def pixel_to_sphere(p: PixelCoord, dims: ImageDims) -> SphericalCoord:
    """
    Map a continuous pixel position to spherical coordinates.

    Args:
        p: Pixel position, 0 <= i < height, any finite j
        dims: Raster dimensions

    Returns:
        SphericalCoord with lat = pi*i/h and lon = 2*pi*j/w (mod 2*pi)
    """
    if not (math.isfinite(p.i) and math.isfinite(p.j)):
        raise InvalidCoordinateError(f"Non-finite pixel coordinate ({p.i}, {p.j})")
    if not 0.0 <= p.i < dims.height:
        raise InvalidCoordinateError(f"Row {p.i} outside [0, {dims.height})")

    lat = math.pi * p.i / dims.height
    lon = TWO_PI * p.j / dims.width
    return SphericalCoord(lat, lon)


def sphere_to_pixel(s: SphericalCoord, dims: ImageDims) -> PixelCoord:
    """Exact inverse of pixel_to_sphere."""
    return PixelCoord(s.lat * dims.height / math.pi, s.lon * dims.width / TWO_PI)


def sphere_to_unitvec(s: SphericalCoord) -> UnitVec3:
    sin_lat = math.sin(s.lat)
    return UnitVec3(sin_lat * math.cos(s.lon), sin_lat * math.sin(s.lon), math.cos(s.lat))


def unitvec_to_sphere(v: UnitVec3) -> SphericalCoord:
    """
    Map a unit vector back to spherical coordinates.

    Longitude is canonicalized to 0 at the poles, where it is undefined.

    Args:
        v: Unit vector, norm within 1e-9 of 1

    Returns:
        SphericalCoord
    """
    values = (v.x, v.y, v.z)
    if not all(math.isfinite(c) for c in values):
        raise InvalidVectorError(f"Non-finite vector {values}")
    if abs(v.norm - 1.0) > UNIT_NORM_TOLERANCE:
        raise InvalidVectorError(f"Vector {values} is not unit length (norm {v.norm})")

    lat = math.acos(min(1.0, max(-1.0, v.z)))
    if math.hypot(v.x, v.y) < POLE_EPSILON:
        return SphericalCoord(lat, 0.0)
    return SphericalCoord(lat, math.atan2(v.y, v.x))


# Array forms used by the resampler. Same formulas, evaluated per element.

def pixel_grid_to_sphere(dims: ImageDims) -> Tuple[np.ndarray, np.ndarray]:
    """Return (lat, lon) arrays of shape (h, w) for every integer pixel."""
    rows = np.arange(dims.height, dtype=np.float64)
    cols = np.arange(dims.width, dtype=np.float64)
    lat = np.pi * rows / dims.height
    lon = TWO_PI * cols / dims.width
    return np.broadcast_to(lat[:, None], dims.shape), np.broadcast_to(lon[None, :], dims.shape)


def sphere_grid_to_unitvecs(lat: np.ndarray, lon: np.ndarray) -> np.ndarray:
    sin_lat = np.sin(lat)
    return np.stack([sin_lat * np.cos(lon), sin_lat * np.sin(lon), np.cos(lat)], axis=-1)


def unitvecs_to_sphere(vecs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Array form of unitvec_to_sphere; vecs has shape (..., 3)."""
    x, y, z = vecs[..., 0], vecs[..., 1], vecs[..., 2]
    lat = np.arccos(np.clip(z, -1.0, 1.0))
    lon = np.arctan2(y, x)
    lon = np.where(np.hypot(x, y) < POLE_EPSILON, 0.0, lon)
    lon = np.mod(lon, TWO_PI)
    lon = np.where(lon >= TWO_PI, 0.0, lon)
    return lat, lon
