"""
Spherical deformable patch embedding (SDPE) offset constraints.

An offset field holds, for every patch (m, n) of an H x W patch grid and every
pixel (i, j) inside an s x s patch, a 2-vector (row offset, column offset) in
pixels. Array layout is (H, W, s, s, 2), row component first.

Losses return (value, grad) where grad is the analytic derivative of value
with respect to every offset component.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from modules.errors import DataError, DimensionMismatchError, UsageError
from modules.image_processing.erp_image import ErpImage

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PatchGrid:
    patch_rows: int
    patch_cols: int
    patch_size: int
    clamp_factor: float = 0.0

    def __post_init__(self):
        if min(self.patch_rows, self.patch_cols, self.patch_size) < 1:
            raise UsageError(f"Patch grid sizes must be >= 1, got {self}")
        if not (math.isfinite(self.clamp_factor) and self.clamp_factor >= 0):
            raise UsageError(f"Clamp factor k_D must be finite and >= 0, got {self.clamp_factor}")

    @property
    def field_shape(self):
        return (self.patch_rows, self.patch_cols, self.patch_size, self.patch_size, 2)

    @property
    def row_bound(self) -> float:
        return self.clamp_factor * self.patch_rows

    @property
    def col_bound(self) -> float:
        return self.clamp_factor * self.patch_cols


@dataclass(frozen=True)
class OffsetField:
    grid: PatchGrid
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != self.grid.field_shape:
            raise DimensionMismatchError(
                f"Offset data has shape {data.shape}, grid expects {self.grid.field_shape}"
            )
        if not np.all(np.isfinite(data)):
            raise DataError("Offset field contains non-finite values")
        object.__setattr__(self, "data", data)

    def with_data(self, data: np.ndarray) -> "OffsetField":
        return OffsetField(self.grid, data)

    @classmethod
    def zeros(cls, grid: PatchGrid) -> "OffsetField":
        return cls(grid, np.zeros(grid.field_shape))


class LossValue(NamedTuple):
    value: float
    grad: OffsetField


def clamp_offsets(raw: OffsetField) -> OffsetField:
    """Clamp row components to +-k_D*H and column components to +-k_D*W."""
    grid = raw.grid
    data = raw.data.copy()
    data[..., 0] = np.clip(data[..., 0], -grid.row_bound, grid.row_bound)
    data[..., 1] = np.clip(data[..., 1], -grid.col_bound, grid.col_bound)
    return raw.with_data(data)


def mirror_offsets(offsets: OffsetField) -> OffsetField:
    """
    Left-right mirror of every patch.

    Entry (i, j) of the result is entry (i, s-1-j) of the input with its column
    component negated. The operation is an involution.
    """
    data = offsets.data[:, :, :, ::-1, :].copy()
    data[..., 1] = -data[..., 1]
    return offsets.with_data(data)


def _finish(offsets: OffsetField, value: float, grad: np.ndarray, normalize: bool) -> LossValue:
    if normalize:
        count = offsets.data.size
        value /= count
        grad = grad / count
    return LossValue(float(value), offsets.with_data(grad))


def intra_loss(offsets: OffsetField, normalize: bool = False) -> LossValue:
    """
    Intra-offset (yaw-symmetry) loss.

    Args:
        offsets: Offset field
        normalize: Divide value and gradient by the element count

    Returns:
        LossValue with the sum of squared distances to the mirrored field
    """
    diff = offsets.data - mirror_offsets(offsets).data
    value = float(np.sum(diff * diff))
    # mirror is a symmetric involution P, so d/dx |x - Px|^2 = 2(I-P)^T(I-P)x = 4(x - Px)
    grad = 4.0 * diff
    return _finish(offsets, value, grad, normalize)


def row_average(offsets: OffsetField) -> np.ndarray:
    """
    Mean offset over the patch-column index.

    Args:
        offsets: Offset field

    Returns:
        Array of shape (H, s, s, 2), accumulated over n in order then divided by W
    """
    data = offsets.data
    acc = np.zeros((data.shape[0],) + data.shape[2:], dtype=np.float64)
    for n in range(data.shape[1]):
        acc = acc + data[:, n]
    return acc / data.shape[1]


def inter_loss(offsets: OffsetField, normalize: bool = False) -> LossValue:
    """Inter-offset loss: squared component differences to the patch-row average."""
    diff = offsets.data - row_average(offsets)[:, None]
    value = float(np.sum(diff * diff))
    # Second term is the path through the average; it sums to zero up to rounding
    grad = 2.0 * diff - 2.0 * np.mean(diff, axis=1, keepdims=True)
    return _finish(offsets, value, grad, normalize)


def sdpe_loss(offsets: OffsetField, normalize: bool = False) -> LossValue:
    intra = intra_loss(offsets, normalize)
    inter = inter_loss(offsets, normalize)
    return LossValue(intra.value + inter.value, offsets.with_data(intra.grad.data + inter.grad.data))


def finite_difference_grad(
    loss_fn: Callable[[OffsetField], LossValue],
    offsets: OffsetField,
    step: float = 1e-4,
) -> np.ndarray:
    """
    Central-difference gradient of a loss, one component at a time.

    Args:
        loss_fn: Loss returning LossValue
        offsets: Point of evaluation
        step: Difference step

    Returns:
        Array shaped like offsets.data
    """
    x = offsets.data.copy()
    grad = np.zeros_like(x)

    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        tmp_val = x[idx]

        x[idx] = tmp_val + step
        f_plus = loss_fn(offsets.with_data(x)).value

        x[idx] = tmp_val - step
        f_minus = loss_fn(offsets.with_data(x)).value

        grad[idx] = (f_plus - f_minus) / (2.0 * step)
        x[idx] = tmp_val
        it.iternext()

    return grad


def deformable_sample(img: ErpImage, grid: PatchGrid, offsets: OffsetField) -> np.ndarray:
    """
    Bilinear deformable sampling of non-overlapping s x s patches.

    Patch pixel (m, n, i, j) is sampled at (m*s + i + d_row, n*s + j + d_col).
    Rows clamp at the image border, columns wrap around (ERP continuity).

    Args:
        img: Source image
        grid: Patch grid, must fit inside the image
        offsets: Offset field on the same grid

    Returns:
        Array of shape (H, W, s, s, channels)
    """
    if offsets.grid != grid:
        raise DimensionMismatchError(f"Offset grid {offsets.grid} does not match {grid}")
    h, w = img.dims.shape
    s = grid.patch_size
    if grid.patch_rows * s > h or grid.patch_cols * s > w:
        raise DimensionMismatchError(
            f"Patch grid {grid.patch_rows}x{grid.patch_cols} of size {s} does not fit a {h}x{w} image"
        )

    m, n, i, j = np.indices(offsets.data.shape[:4], dtype=np.float64)
    rows = m * s + i + offsets.data[..., 0]
    cols = n * s + j + offsets.data[..., 1]

    r0 = np.floor(rows)
    c0 = np.floor(cols)
    fr = (rows - r0)[..., None]
    fc = (cols - c0)[..., None]

    r0 = r0.astype(np.int64)
    c0 = c0.astype(np.int64)
    r0c = np.clip(r0, 0, h - 1)
    r1c = np.clip(r0 + 1, 0, h - 1)
    c0w = np.mod(c0, w)
    c1w = np.mod(c0 + 1, w)

    data = img.data
    top = (1.0 - fc) * data[r0c, c0w] + fc * data[r0c, c1w]
    bottom = (1.0 - fc) * data[r1c, c0w] + fc * data[r1c, c1w]
    return (1.0 - fr) * top + fr * bottom
