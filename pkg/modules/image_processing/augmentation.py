"""
Training-time SGA augmentation: random rotation sampling and batch generation.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from modules.config import AUGMENT_PROBABILITY, TRAIN_MAX_PITCH, TRAIN_MAX_ROLL, TRAIN_MAX_YAW
from modules.errors import UsageError
from modules.geometry.rotation3d import RotationAngles, compose
from modules.image_processing.sga_projection import rotate_erp, rotate_labels
from modules.utils import dataset_io
from modules.utils.console import progress
from modules.utils.dataset_io import DatasetManifest, ManifestEntry

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentationConfig:
    max_angles: RotationAngles = field(
        default_factory=lambda: RotationAngles(TRAIN_MAX_YAW, TRAIN_MAX_PITCH, TRAIN_MAX_ROLL)
    )
    apply_probability: float = AUGMENT_PROBABILITY

    def __post_init__(self):
        if min(self.max_angles.as_tuple()) < 0:
            raise UsageError(f"Maximum augmentation angles must be >= 0, got {self.max_angles}")
        if not 0.0 <= self.apply_probability <= 1.0:
            raise UsageError(f"Apply probability must be in [0, 1], got {self.apply_probability}")


def sample_augmentation(cfg: AugmentationConfig, rng: np.random.Generator) -> Tuple[bool, RotationAngles]:
    """
    Draw one augmentation decision.

    Always consumes four draws (one Bernoulli, then pitch, roll, yaw uniforms)
    so streams stay aligned whether or not the rotation is applied.

    Args:
        cfg: Augmentation settings
        rng: Seeded generator owned by the caller

    Returns:
        Tuple of (applied, angles); angles are zero when not applied
    """
    coin = rng.random()
    pitch = rng.uniform(0.0, cfg.max_angles.pitch)
    roll = rng.uniform(0.0, cfg.max_angles.roll)
    yaw = rng.uniform(0.0, cfg.max_angles.yaw)

    if coin < cfg.apply_probability:
        return True, RotationAngles(yaw=float(yaw), pitch=float(pitch), roll=float(roll))
    return False, RotationAngles()


def augment_dataset(
    manifest: DatasetManifest,
    out_dir: Path,
    count: int,
    cfg: AugmentationConfig,
    seed: int,
    jobs: int = 1,
    show_progress: bool = True,
) -> DatasetManifest:
    """
    Write `count` augmented variants of every manifest sample.

    Angles are drawn up front from a single generator in manifest order, so the
    written files do not depend on `jobs`.

    Args:
        manifest: Source dataset
        out_dir: Output directory (created if missing)
        count: Variants per sample
        cfg: Augmentation settings
        seed: Generator seed
        jobs: Worker threads for the rotations
        show_progress: Show a progress bar

    Returns:
        Manifest describing the augmented dataset (also written to out_dir)
    """
    if count < 1:
        raise UsageError(f"--count must be >= 1, got {count}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    plan: List[Tuple[ManifestEntry, int, bool, RotationAngles]] = []
    for entry in manifest.entries:
        for variant in range(count):
            applied, angles = sample_augmentation(cfg, rng)
            plan.append((entry, variant, applied, angles))

    def _write_variant(item: Tuple[ManifestEntry, int, bool, RotationAngles]) -> Dict[str, object]:
        entry, variant, applied, angles = item
        sample_id = f"{entry.sample_id}_aug{variant:03d}"
        image = dataset_io.load_image(manifest.resolve(entry.image_path))
        labels = dataset_io.load_labels(manifest.resolve(entry.label_path), manifest.ignore_id)

        if applied:
            r = compose(angles)
            image = rotate_erp(image, r)
            labels = rotate_labels(labels, r)

        dataset_io.save_image(out_dir / f"{sample_id}_image.png", image)
        dataset_io.save_labels(out_dir / f"{sample_id}_label.png", labels)
        return {
            "sample_id": sample_id,
            "source_id": entry.sample_id,
            "variant": variant,
            "applied": applied,
            "yaw": angles.yaw,
            "pitch": angles.pitch,
            "roll": angles.roll,
        }

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        rows = list(progress(pool.map(_write_variant, plan), total=len(plan),
                             desc="Augmenting", enabled=show_progress))

    pd.DataFrame(rows).to_csv(out_dir / "augmentation_log.csv", index=False)

    augmented = DatasetManifest(
        entries=[
            ManifestEntry(row["sample_id"], f"{row['sample_id']}_image.png", f"{row['sample_id']}_label.png")
            for row in rows
        ],
        num_classes=manifest.num_classes,
        ignore_id=manifest.ignore_id,
        class_names=manifest.class_names,
        root=out_dir,
    )
    dataset_io.save_manifest(out_dir / "manifest.json", augmented)

    applied_count = sum(1 for row in rows if row["applied"])
    logger.info("Wrote %d augmented samples (%d rotated) to %s", len(rows), applied_count, out_dir)
    return augmented
