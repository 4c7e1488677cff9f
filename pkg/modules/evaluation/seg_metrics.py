"""
Confusion-matrix segmentation metrics: per-class IoU, mIoU and pixel accuracy.

Rows of the matrix are ground truth, columns are predictions. Pixels whose
ground truth is ignore_id are skipped. A prediction of ignore_id on a labelled
pixel is a miss: it counts as a false negative of the true class and as
neither a true nor a false positive. Classes with an empty union are left out
of the mIoU mean, and dataset-level metrics come from the pooled matrix.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from modules.errors import DimensionMismatchError, InvalidLabelError, UndefinedMetricError
from modules.image_processing.erp_image import LabelMap


def _optional_floats(values: np.ndarray) -> List[Optional[float]]:
    return [None if np.isnan(v) else float(v) for v in values]


@dataclass(frozen=True)
class ConfusionMatrix:
    """(C, C) pair counts plus, per ground-truth class, pixels predicted as ignore_id."""

    counts: np.ndarray
    missed: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.missed is None:
            object.__setattr__(self, "missed", np.zeros(self.counts.shape[0], dtype=np.int64))

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + int(self.missed.sum())

    @property
    def support(self) -> np.ndarray:
        """Labelled pixels per ground-truth class."""
        return self.counts.sum(axis=1) + self.missed

    @classmethod
    def empty(cls, num_classes: int) -> "ConfusionMatrix":
        return cls(np.zeros((num_classes, num_classes), dtype=np.int64))

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.num_classes != self.num_classes:
            raise DimensionMismatchError(
                f"Cannot merge {self.num_classes}-class and {other.num_classes}-class matrices"
            )
        return ConfusionMatrix(self.counts + other.counts, self.missed + other.missed)

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return self + other

    def to_record(self, class_names: Optional[List[str]] = None) -> Dict[str, Any]:
        """
        Export the metrics as plain values.

        Keys: per_class_iou, class_accuracy, miou, pixel_accuracy,
        evaluated_pixels, unlabeled_predictions. Undefined per-class values become None.
        """
        record: Dict[str, Any] = {
            "per_class_iou": _optional_floats(iou_per_class(self)),
            "class_accuracy": _optional_floats(class_accuracy(self)),
            "miou": miou(self),
            "pixel_accuracy": pixel_accuracy(self),
            "evaluated_pixels": self.total,
            "unlabeled_predictions": int(self.missed.sum()),
        }
        if class_names:
            record["class_names"] = list(class_names)
        return record


def accumulate(pred: LabelMap, gt: LabelMap, num_classes: int) -> ConfusionMatrix:
    """
    Count (ground truth, prediction) pairs over non-ignored pixels.

    Args:
        pred: Predicted label map; ignore_id (of gt) means "no prediction"
        gt: Ground truth label map; its ignore_id marks skipped pixels
        num_classes: Number of classes C

    Returns:
        ConfusionMatrix of shape (C, C) with per-class missed counts
    """
    if pred.data.shape != gt.data.shape:
        raise DimensionMismatchError(f"Prediction {pred.data.shape} and ground truth {gt.data.shape} differ")

    keep = gt.data != gt.ignore_id
    g = gt.data[keep].astype(np.int64)
    p = pred.data[keep].astype(np.int64)

    if g.size and g.max() >= num_classes:
        raise InvalidLabelError(f"Ground truth id {int(g.max())} out of range for {num_classes} classes")

    unlabeled = p == gt.ignore_id
    g_hit, p_hit = g[~unlabeled], p[~unlabeled]
    if p_hit.size and p_hit.max() >= num_classes:
        raise InvalidLabelError(f"Predicted id {int(p_hit.max())} out of range for {num_classes} classes")

    counts = np.bincount(num_classes * g_hit + p_hit, minlength=num_classes ** 2)
    missed = np.bincount(g[unlabeled], minlength=num_classes)
    return ConfusionMatrix(
        counts.reshape(num_classes, num_classes).astype(np.int64),
        missed.astype(np.int64),
    )


def iou_per_class(cm: ConfusionMatrix) -> np.ndarray:
    """IoU_c = TP / (TP + FP + FN); NaN where the denominator is zero."""
    if cm.total == 0:
        raise UndefinedMetricError("No evaluated pixels; IoU is undefined")
    tp = np.diag(cm.counts).astype(np.float64)
    fn = cm.support - tp
    fp = cm.counts.sum(axis=0) - tp
    denom = tp + fp + fn
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0, tp / denom, np.nan)


def miou(cm: ConfusionMatrix) -> float:
    ious = iou_per_class(cm)
    defined = [float(v) for v in ious if not np.isnan(v)]
    return sum(defined) / len(defined)


def pixel_accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise UndefinedMetricError("No evaluated pixels; pixel accuracy is undefined")
    return int(np.trace(cm.counts)) / cm.total


def class_accuracy(cm: ConfusionMatrix) -> np.ndarray:
    """Per-class recall; NaN for classes absent from the ground truth."""
    support = cm.support.astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(support > 0, np.diag(cm.counts) / support, np.nan)
