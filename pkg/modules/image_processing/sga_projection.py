"""
SGA image projection: rotate an ERP image or label map on the sphere.

Resampling is pull-based. Every output pixel is mapped to the sphere, rotated
by R^T, mapped back to a continuous source position and filled from the
nearest source pixel. Longitude wraps modulo the width; rows clamp to
[0, h - 1]. Nearest rounding is half away from zero.
"""

import logging
from typing import Tuple

import numpy as np

from modules.config import POLE_NUDGE
from modules.errors import DimensionMismatchError
from modules.geometry.rotation3d import RotMat, apply_to_array, inverse
from modules.geometry.sphere_core import (
    TWO_PI,
    ImageDims,
    pixel_grid_to_sphere,
    sphere_grid_to_unitvecs,
    unitvecs_to_sphere,
)
from modules.image_processing.erp_image import ErpImage, LabelMap

logger = logging.getLogger(__name__)


def source_indices(dims: ImageDims, r: RotMat) -> Tuple[np.ndarray, np.ndarray]:
    """
    Compute the nearest source pixel for every output pixel of a rotation.

    Args:
        dims: Raster dimensions (shared by input and output)
        r: Rotation applied to the panorama

    Returns:
        Tuple of integer (rows, cols) arrays of shape (h, w)
    """
    lat, lon = pixel_grid_to_sphere(dims)
    # Row 0 sits on the pole where longitude is lost; follow the meridian limit instead
    lat = np.where(lat < POLE_NUDGE, POLE_NUDGE, lat)

    vecs = sphere_grid_to_unitvecs(lat, lon)
    src_lat, src_lon = unitvecs_to_sphere(apply_to_array(inverse(r), vecs))

    i_src = src_lat * dims.height / np.pi
    j_src = src_lon * dims.width / TWO_PI

    rows = np.clip(np.floor(i_src + 0.5).astype(np.int64), 0, dims.height - 1)
    cols = np.mod(np.floor(j_src + 0.5).astype(np.int64), dims.width)
    return rows, cols


def rotate_erp(img: ErpImage, r: RotMat) -> ErpImage:
    rows, cols = source_indices(img.dims, r)
    return ErpImage(img.data[rows, cols])


def rotate_labels(lbl: LabelMap, r: RotMat) -> LabelMap:
    """Rotate a label map with the same nearest rule as rotate_erp; never invents class ids."""
    rows, cols = source_indices(lbl.dims, r)
    return lbl.with_data(lbl.data[rows, cols])


def rotate_sample(img: ErpImage, lbl: LabelMap, r: RotMat) -> Tuple[ErpImage, LabelMap]:
    """Rotate an image and its ground truth with one shared index map."""
    if img.dims != lbl.dims:
        raise DimensionMismatchError(f"Image {img.dims.shape} and labels {lbl.dims.shape} differ in size")
    rows, cols = source_indices(img.dims, r)
    return ErpImage(img.data[rows, cols]), lbl.with_data(lbl.data[rows, cols])
