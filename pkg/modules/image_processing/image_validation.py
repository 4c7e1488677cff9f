"""
Module for validating dataset files before processing.
"""

from pathlib import Path
from typing import List, Tuple

from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from modules.utils.dataset_io import DatasetManifest


def _probe(path: Path) -> Tuple[str, Tuple[int, int], str]:
    """Return (format, (width, height), mode) without decoding pixel data."""
    with PILImage.open(path) as img:
        return img.format, img.size, img.mode


def validate_manifest(manifest: DatasetManifest) -> Tuple[bool, List[str]]:
    """
    Validate that every manifest entry has a readable image and label PNG of matching size.

    Args:
        manifest: Parsed dataset manifest

    Returns:
        Tuple containing:
            - Boolean indicating if validation passed
            - List of error messages
    """
    all_valid = True
    error_messages = []

    if not manifest.entries:
        return False, ["Manifest has no entries"]

    for entry in manifest.entries:
        sizes = {}
        for role, relative in (("image", entry.image_path), ("label", entry.label_path)):
            path = manifest.resolve(relative)
            if not path.is_file():
                error_messages.append(f"Sample {entry.sample_id} - Missing {role} file {path}")
                all_valid = False
                continue
            try:
                fmt, size, mode = _probe(path)
            except (UnidentifiedImageError, OSError):
                error_messages.append(f"Sample {entry.sample_id} - Unreadable {role} file {path}")
                all_valid = False
                continue

            if fmt != "PNG":
                error_messages.append(f"Sample {entry.sample_id} - {role} file is {fmt}, expected PNG")
                all_valid = False
            if role == "label" and mode != "L":
                error_messages.append(
                    f"Sample {entry.sample_id} - label mode {mode}, expected 8-bit single-channel (L)"
                )
                all_valid = False
            sizes[role] = size

        if len(sizes) == 2 and sizes["image"] != sizes["label"]:
            error_messages.append(
                f"Sample {entry.sample_id} - image size {sizes['image']} differs from label size {sizes['label']}"
            )
            all_valid = False

    return all_valid, error_messages


def validate_prediction_dir(root: Path, manifest: DatasetManifest,
                            situation_count: int) -> Tuple[bool, List[str]]:
    """
    Check that a per-situation prediction directory has every expected file.

    Args:
        root: Directory with s00/, s01/, ... subdirectories
        manifest: Dataset manifest
        situation_count: Number of situations in the grid

    Returns:
        Tuple of (all present, list of missing-file messages)
    """
    missing = []
    for index in range(situation_count):
        for entry in manifest.entries:
            path = Path(root) / f"s{index:02d}" / f"{entry.sample_id}.png"
            if not path.is_file():
                missing.append(f"Situation {index} - Missing prediction {path}")
    return not missing, missing
