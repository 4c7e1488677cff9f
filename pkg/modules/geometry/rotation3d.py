"""
Yaw / pitch / roll rotation matrices.

R = R_z(yaw) . R_y(pitch) . R_x(roll), angles in degrees at the API boundary.
Products are evaluated as (R_z . R_y) . R_x with every entry summed left to
right, so the result is reproducible bit for bit.
"""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from modules.config import ROTATION_TOLERANCE
from modules.errors import UsageError
from modules.geometry.sphere_core import UnitVec3

# 3x3 float64 array
RotMat = np.ndarray


@dataclass(frozen=True)
class RotationAngles:
    """Yaw, pitch and roll in degrees, stored exactly as given."""

    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self):
        for name in ("yaw", "pitch", "roll"):
            if not math.isfinite(getattr(self, name)):
                raise UsageError(f"Rotation {name} must be finite, got {getattr(self, name)}")

    def as_tuple(self) -> Tuple[float, float, float]:
        return self.yaw, self.pitch, self.roll

    @property
    def is_zero(self) -> bool:
        return self.yaw == 0.0 and self.pitch == 0.0 and self.roll == 0.0

    def label(self) -> str:
        """Situation label in (pitch, roll, yaw) order, as validation tables print it."""
        return f"({self.pitch:g},{self.roll:g},{self.yaw:g})"


def rot_x(roll: float) -> RotMat:
    g = math.radians(roll)
    c, s = math.cos(g), math.sin(g)
    return np.array([[1.0, 0.0, 0.0],
                     [0.0, c, -s],
                     [0.0, s, c]])


def rot_y(pitch: float) -> RotMat:
    b = math.radians(pitch)
    c, s = math.cos(b), math.sin(b)
    return np.array([[c, 0.0, s],
                     [0.0, 1.0, 0.0],
                     [-s, 0.0, c]])


def rot_z(yaw: float) -> RotMat:
    a = math.radians(yaw)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0],
                     [s, c, 0.0],
                     [0.0, 0.0, 1.0]])


def matmul3(a: Sequence[Sequence[float]], b: Sequence[Sequence[float]]) -> RotMat:
    """3x3 product with each entry summed as a0*b0 + a1*b1 + a2*b2, left to right."""
    a = np.asarray(a, dtype=np.float64).tolist()
    b = np.asarray(b, dtype=np.float64).tolist()
    out: List[List[float]] = [[0.0] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j]
    return np.array(out)


def compose(angles: RotationAngles) -> RotMat:
    return matmul3(matmul3(rot_z(angles.yaw), rot_y(angles.pitch)), rot_x(angles.roll))


def apply(r: RotMat, v: UnitVec3) -> UnitVec3:
    """
    Rotate a unit vector.

    Args:
        r: Rotation matrix
        v: Unit vector

    Returns:
        R v, renormalized if its norm drifted by more than 1e-12
    """
    x, y, z = v.x, v.y, v.z
    out = [r[k][0] * x + r[k][1] * y + r[k][2] * z for k in range(3)]
    norm = math.sqrt(out[0] * out[0] + out[1] * out[1] + out[2] * out[2])
    if abs(norm - 1.0) > ROTATION_TOLERANCE:
        out = [c / norm for c in out]
    return UnitVec3(float(out[0]), float(out[1]), float(out[2]))


def apply_to_array(r: RotMat, vecs: np.ndarray) -> np.ndarray:
    """Rotate an (..., 3) array of vectors."""
    return vecs @ np.asarray(r).T


def inverse(r: RotMat) -> RotMat:
    return np.array(r, dtype=np.float64).T.copy()


def is_rotation(r: RotMat, tolerance: float = ROTATION_TOLERANCE) -> bool:
    """Check orthogonality and unit determinant within tolerance."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        return False
    gram = r.T @ r
    return bool(np.max(np.abs(gram - np.eye(3))) <= tolerance
                and abs(np.linalg.det(r) - 1.0) <= tolerance)
