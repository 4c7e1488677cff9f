"""Shared fixtures: seeded generators, synthetic label maps and on-disk datasets."""

import json
from pathlib import Path

import numpy as np
import pytest

from modules.image_processing.erp_image import ErpImage, LabelMap
from modules.utils import dataset_io


def block_labels(height: int, width: int, num_classes: int, seed: int = 0,
                 block_rows: int = 64, block_cols: int = 128, band: int = 64) -> LabelMap:
    """
    Label map of large constant regions: a ceiling band, a floor band and a
    grid of rectangular blocks in between, each with a random class id.
    """
    rng = np.random.default_rng(seed)
    data = np.zeros((height, width), dtype=np.uint8)
    for top in range(band, height - band, block_rows):
        for left in range(0, width, block_cols):
            data[top:top + block_rows, left:left + block_cols] = rng.integers(0, num_classes)
    data[:band] = 0
    data[height - band:] = 1 % num_classes
    return LabelMap(data)


def labels_to_image(labels: LabelMap) -> ErpImage:
    """Grayscale image whose intensity encodes the class id, so images and labels rotate alike."""
    return ErpImage(labels.data.astype(np.float64) / 255.0)


def write_dataset(root: Path, samples, num_classes: int, class_names=None) -> Path:
    """Write (sample_id, LabelMap) pairs as image/label PNGs plus manifest.json; return the manifest path."""
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for sample_id, labels in samples:
        dataset_io.save_image(root / f"{sample_id}_image.png", labels_to_image(labels))
        dataset_io.save_labels(root / f"{sample_id}_label.png", labels)
        entries.append({
            "sample_id": sample_id,
            "image_path": f"{sample_id}_image.png",
            "label_path": f"{sample_id}_label.png",
        })
    manifest = {"num_classes": num_classes, "ignore_id": 255, "entries": entries}
    if class_names:
        manifest["class_names"] = list(class_names)
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_dataset(tmp_path):
    """Ten 32x64 block-label samples with 4 classes."""
    samples = [
        (f"pano_{k:02d}", block_labels(32, 64, 4, seed=k, block_rows=8, block_cols=16, band=8))
        for k in range(10)
    ]
    return write_dataset(tmp_path / "data", samples, num_classes=4)
