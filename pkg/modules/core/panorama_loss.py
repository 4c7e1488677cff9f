"""
Panorama-aware loss: per-row cosine weights and the total loss combiner.

Rows are numbered m = 1..H. Row m has weight cos(|2m - H| / H * pi/2), so the
bottom row weighs 0 and the top row weighs cos((H - 2) / H * pi/2) > 0.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from modules.config import CE_PROB_CLAMP, LAMBDA_S, LAMBDA_W
from modules.errors import DataError, DimensionMismatchError, UsageError
from modules.geometry.sphere_core import ImageDims
from modules.image_processing.erp_image import LabelMap


@dataclass(frozen=True)
class WeightMap:
    dims: ImageDims
    row_weights: np.ndarray

    @property
    def data(self) -> np.ndarray:
        """Full (h, w) weight raster; every row is constant."""
        return np.broadcast_to(self.row_weights[:, None], self.dims.shape)


@dataclass(frozen=True)
class LossHyper:
    lambda_w: float = LAMBDA_W
    lambda_s: float = LAMBDA_S

    def __post_init__(self):
        for name in ("lambda_w", "lambda_s"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise UsageError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class SegLossMap:
    """Per-pixel segmentation loss; `valid` is False where the pixel is excluded."""

    values: np.ndarray
    valid: np.ndarray

    @classmethod
    def from_array(cls, values: np.ndarray, valid: Optional[np.ndarray] = None) -> "SegLossMap":
        values = np.asarray(values, dtype=np.float64)
        if valid is None:
            valid = np.ones(values.shape, dtype=bool)
        return cls(values, np.asarray(valid, dtype=bool))


def weight_map(dims: ImageDims) -> WeightMap:
    h = dims.height
    m = np.arange(1, h + 1, dtype=np.float64)
    distance = np.abs(2.0 * m - h)
    weights = np.cos(distance / h * (math.pi / 2.0))
    # cos(pi/2) rounds to 6e-17
    weights[distance == h] = 0.0
    return WeightMap(dims, weights)


def per_pixel_ce(probs: np.ndarray, lbl: LabelMap) -> SegLossMap:
    """
    Per-pixel cross entropy -log p(true class).

    Args:
        probs: Class distribution per pixel, shape (h, w, C)
        lbl: Ground truth; ignore_id pixels get loss 0 and are excluded

    Returns:
        SegLossMap
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 3 or probs.shape[:2] != lbl.data.shape:
        raise DimensionMismatchError(
            f"Probabilities {probs.shape} do not match labels {lbl.data.shape}"
        )
    if np.max(np.abs(probs.sum(axis=2) - 1.0)) > 1e-6:
        raise DataError("Per-pixel class probabilities must sum to 1")

    num_classes = probs.shape[2]
    lbl.validate(num_classes)

    valid = lbl.data != lbl.ignore_id
    target = np.where(valid, lbl.data, 0).astype(np.int64)
    p_true = np.take_along_axis(probs, target[:, :, None], axis=2)[:, :, 0]
    p_true = np.clip(p_true, CE_PROB_CLAMP, 1.0 - CE_PROB_CLAMP)
    loss = np.where(valid, -np.log(p_true), 0.0)
    return SegLossMap(loss, valid)


def combine_losses(seg: SegLossMap, wmap: WeightMap, sdpe_value: float, hyper: LossHyper) -> float:
    """
    Total loss: pixel-mean of (1 + lambda_w * w_pan) * seg over valid pixels,
    plus lambda_s * sdpe_value. No valid pixels gives a segmentation term of 0.
    """
    if seg.values.shape != wmap.dims.shape or seg.valid.shape != seg.values.shape:
        raise DimensionMismatchError(
            f"Segmentation loss {seg.values.shape} does not match weight map {wmap.dims.shape}"
        )
    count = int(np.count_nonzero(seg.valid))
    seg_term = 0.0
    if count:
        weighted = (1.0 + hyper.lambda_w * wmap.data) * seg.values
        seg_term = float(np.sum(weighted[seg.valid])) / count
    return seg_term + hyper.lambda_s * float(sdpe_value)
