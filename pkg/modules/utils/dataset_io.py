"""
Loading and saving of images, label maps, offset fields and dataset manifests.

PNG is the only raster format. Images decode to float64 in [0, 1]; labels are
8-bit single-channel PNGs whose value is the class id (255 = ignore).
Manifest paths are relative to the manifest's directory.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from modules.config import DEFAULT_IGNORE_ID
from modules.core.sdpe_constraints import OffsetField, PatchGrid
from modules.errors import (
    DataError,
    DuplicateSampleError,
    ManifestError,
    UnsupportedFormatError,
)
from modules.image_processing.erp_image import ErpImage, LabelMap

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    image_path: str
    label_path: str


@dataclass
class DatasetManifest:
    """Dataset description: sample entries plus class count and ignore id."""

    entries: List[ManifestEntry]
    num_classes: int
    ignore_id: int = DEFAULT_IGNORE_ID
    class_names: Optional[List[str]] = None
    root: Path = field(default_factory=Path)

    def resolve(self, relative: str) -> Path:
        return Path(self.root) / relative


@dataclass(frozen=True)
class Sample:
    sample_id: str
    image: ErpImage
    labels: LabelMap
    image_path: Path


def _open_png(path: PathLike) -> PILImage.Image:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"File not found: {path}")
    try:
        img = PILImage.open(path)
        img.load()
    except (UnidentifiedImageError, OSError) as e:
        raise DataError(f"Malformed image file {path}: {e}") from e
    if img.format != "PNG":
        raise UnsupportedFormatError(f"{path} is {img.format}, only PNG is supported")
    if img.width == 0 or img.height == 0:
        raise DataError(f"{path} has a zero dimension")
    return img


def load_image(path: PathLike) -> ErpImage:
    """
    Load an 8-bit RGB or grayscale PNG as an ERP image.

    Args:
        path: PNG file path

    Returns:
        ErpImage with values in [0, 1]
    """
    img = _open_png(path)
    if img.mode in ("P", "RGBA", "LA"):
        logger.warning("Converting %s image %s to RGB", img.mode, path)
        img = img.convert("RGB")
    if img.mode not in ("RGB", "L"):
        raise UnsupportedFormatError(f"{path}: image mode {img.mode} is not 8-bit RGB or grayscale")
    data = np.asarray(img, dtype=np.float64) / 255.0
    return ErpImage(data)


def save_image(path: PathLike, image: ErpImage) -> None:
    data = np.clip(np.rint(image.data * 255.0), 0, 255).astype(np.uint8)
    if image.channels == 1:
        data = data[:, :, 0]
    elif image.channels != 3:
        raise UnsupportedFormatError(f"Cannot write a {image.channels}-channel image as PNG")
    PILImage.fromarray(data).save(Path(path), format="PNG")


def load_labels(path: PathLike, ignore_id: int = DEFAULT_IGNORE_ID) -> LabelMap:
    """
    Load an 8-bit single-channel PNG label map.

    Args:
        path: PNG file path
        ignore_id: Id excluded from metrics

    Returns:
        LabelMap
    """
    img = _open_png(path)
    if img.mode == "P":
        raise UnsupportedFormatError(f"{path} is a palette PNG; label maps must be 8-bit grayscale")
    if img.mode != "L":
        raise UnsupportedFormatError(f"{path}: label mode {img.mode} is not 8-bit single-channel")
    return LabelMap(np.array(img, dtype=np.uint8), ignore_id)


def save_labels(path: PathLike, labels: LabelMap) -> None:
    PILImage.fromarray(np.ascontiguousarray(labels.data, dtype=np.uint8)).save(Path(path), format="PNG")


def load_manifest(path: PathLike) -> DatasetManifest:
    """
    Parse a JSON manifest.

    Args:
        path: Manifest file path

    Returns:
        DatasetManifest rooted at the manifest's directory
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        raise ManifestError(f"Manifest not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ManifestError(f"Manifest {path} is not valid JSON: {e}") from e

    for key in ("entries", "num_classes"):
        if key not in raw:
            raise ManifestError(f"Manifest {path} is missing '{key}'")

    entries = []
    seen = set()
    for item in raw["entries"]:
        try:
            entry = ManifestEntry(str(item["sample_id"]), item["image_path"], item["label_path"])
        except (KeyError, TypeError) as e:
            raise ManifestError(f"Malformed manifest entry {item!r}") from e
        if entry.sample_id in seen:
            raise DuplicateSampleError(f"Duplicate sample_id '{entry.sample_id}' in {path}")
        seen.add(entry.sample_id)
        entries.append(entry)

    num_classes = int(raw["num_classes"])
    ignore_id = int(raw.get("ignore_id", DEFAULT_IGNORE_ID))
    if not 1 <= num_classes <= 255:
        raise ManifestError(f"num_classes must be in 1..255, got {num_classes}")
    if ignore_id < num_classes:
        raise ManifestError(f"ignore_id {ignore_id} collides with class ids 0..{num_classes - 1}")

    return DatasetManifest(
        entries=entries,
        num_classes=num_classes,
        ignore_id=ignore_id,
        class_names=raw.get("class_names"),
        root=path.parent,
    )


def save_manifest(path: PathLike, manifest: DatasetManifest) -> None:
    data: Dict[str, Any] = {
        "num_classes": manifest.num_classes,
        "ignore_id": manifest.ignore_id,
        "entries": [
            {"sample_id": e.sample_id, "image_path": e.image_path, "label_path": e.label_path}
            for e in manifest.entries
        ],
    }
    if manifest.class_names:
        data["class_names"] = list(manifest.class_names)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)


def load_dataset(manifest: DatasetManifest, jobs: int = 1) -> List[Sample]:
    """Load every sample, checking label ids and image/label dims."""

    def _load(entry: ManifestEntry) -> Sample:
        image_path = manifest.resolve(entry.image_path)
        image = load_image(image_path)
        labels = load_labels(manifest.resolve(entry.label_path), manifest.ignore_id)
        if image.dims != labels.dims:
            raise DataError(
                f"Sample '{entry.sample_id}': image {image.dims.shape} and labels "
                f"{labels.dims.shape} differ in size"
            )
        labels.validate(manifest.num_classes)
        return Sample(entry.sample_id, image, labels, image_path)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(_load, manifest.entries))


# Offset fields. Text layout: header "# H W s k_D", then one line per offset
# vector "m n i j d_row d_col" (patch-major, row-major within a patch).

def save_offsets(path: PathLike, offsets: OffsetField) -> None:
    path = Path(path)
    grid = offsets.grid
    if path.suffix == ".npz":
        np.savez(path, data=offsets.data, patch_rows=grid.patch_rows, patch_cols=grid.patch_cols,
                 patch_size=grid.patch_size, clamp_factor=grid.clamp_factor)
        return

    idx = np.indices(offsets.data.shape[:4]).reshape(4, -1).T
    table = np.hstack([idx.astype(np.float64), offsets.data.reshape(-1, 2)])
    header = f"{grid.patch_rows} {grid.patch_cols} {grid.patch_size} {grid.clamp_factor!r}"
    np.savetxt(path, table, fmt=["%d", "%d", "%d", "%d", "%.17g", "%.17g"], header=header)


def load_offsets(path: PathLike) -> OffsetField:
    """
    Read an offset field written by save_offsets.

    Args:
        path: .npz archive or text table

    Returns:
        OffsetField
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Offset file not found: {path}")

    if path.suffix == ".npz":
        with np.load(path) as archive:
            grid = PatchGrid(int(archive["patch_rows"]), int(archive["patch_cols"]),
                             int(archive["patch_size"]), float(archive["clamp_factor"]))
            return OffsetField(grid, np.array(archive["data"], dtype=np.float64))

    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().lstrip("#").split()
    try:
        grid = PatchGrid(int(header[0]), int(header[1]), int(header[2]), float(header[3]))
        table = np.loadtxt(path, ndmin=2)
    except (IndexError, ValueError) as e:
        raise DataError(f"Malformed offset table {path}: {e}") from e

    expected = grid.patch_rows * grid.patch_cols * grid.patch_size ** 2
    if table.shape != (expected, 6):
        raise DataError(f"Offset table {path} has shape {table.shape}, expected ({expected}, 6)")

    data = np.zeros(grid.field_shape, dtype=np.float64)
    idx = table[:, :4].astype(np.int64)
    data[idx[:, 0], idx[:, 1], idx[:, 2], idx[:, 3]] = table[:, 4:]
    return OffsetField(grid, data)
