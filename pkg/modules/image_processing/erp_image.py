"""
Containers for equirectangular rasters: continuous images and label maps.
"""

from dataclasses import dataclass
from typing import Optional, Set

import numpy as np

from modules.config import DEFAULT_IGNORE_ID
from modules.errors import DataError, InvalidLabelError
from modules.geometry.sphere_core import ImageDims


@dataclass(frozen=True)
class ErpImage:
    """ERP image with data of shape (h, w, channels), float64."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] < 1:
            raise DataError(f"ERP image data must be (h, w, channels), got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DataError("ERP image contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> ImageDims:
        return ImageDims(self.data.shape[0], self.data.shape[1])

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel class ids (uint8). Pixels equal to ignore_id are excluded from losses and metrics."""

    data: np.ndarray
    ignore_id: int = DEFAULT_IGNORE_ID

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise DataError(f"Label map must be 2-D, got shape {data.shape}")
        if data.dtype != np.uint8:
            if data.size and (data.min() < 0 or data.max() > 255):
                raise InvalidLabelError("Label values must fit in 0..255")
            data = data.astype(np.uint8)
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> ImageDims:
        return ImageDims(self.data.shape[0], self.data.shape[1])

    def class_ids(self) -> Set[int]:
        """Distinct ids present, ignore_id included."""
        return set(int(v) for v in np.unique(self.data))

    def validate(self, num_classes: int) -> None:
        """Raise InvalidLabelError if any value is neither a class id nor ignore_id."""
        bad = (self.data >= num_classes) & (self.data != self.ignore_id)
        if np.any(bad):
            first = int(self.data[bad][0])
            raise InvalidLabelError(
                f"Label id {first} is out of range for {num_classes} classes "
                f"(ignore id {self.ignore_id})"
            )

    def with_data(self, data: np.ndarray, ignore_id: Optional[int] = None) -> "LabelMap":
        return LabelMap(data, self.ignore_id if ignore_id is None else ignore_id)
