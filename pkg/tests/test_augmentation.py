import numpy as np
import pandas as pd
import pytest

from modules.errors import UsageError
from modules.geometry.rotation3d import RotationAngles
from modules.image_processing.augmentation import AugmentationConfig, augment_dataset, sample_augmentation
from modules.utils import dataset_io


def test_default_sampler_statistics():
    cfg = AugmentationConfig()
    rng = np.random.default_rng(2024)
    draws = [sample_augmentation(cfg, rng) for _ in range(10_000)]
    applied = [angles for ok, angles in draws if ok]

    assert abs(len(applied) / len(draws) - 0.5) <= 0.02
    assert abs(np.mean([a.yaw for a in applied]) - 180.0) <= 5.0
    assert abs(np.mean([a.pitch for a in applied]) - 5.0) <= 0.3
    assert abs(np.mean([a.roll for a in applied]) - 5.0) <= 0.3
    assert all(a.is_zero for ok, a in draws if not ok)


def test_sampler_respects_maxima():
    cfg = AugmentationConfig(RotationAngles(yaw=90.0, pitch=2.0, roll=0.0), apply_probability=1.0)
    rng = np.random.default_rng(0)
    for _ in range(500):
        applied, angles = sample_augmentation(cfg, rng)
        assert applied
        assert 0.0 <= angles.yaw <= 90.0
        assert 0.0 <= angles.pitch <= 2.0
        assert angles.roll == 0.0


def test_sampler_consumes_four_draws_per_call():
    never = AugmentationConfig(apply_probability=0.0)
    always = AugmentationConfig(apply_probability=1.0)
    rng_a, rng_b = np.random.default_rng(5), np.random.default_rng(5)
    for _ in range(3):
        sample_augmentation(never, rng_a)
        sample_augmentation(always, rng_b)
    assert rng_a.random() == rng_b.random()


def test_config_validation():
    with pytest.raises(UsageError):
        AugmentationConfig(apply_probability=1.5)
    with pytest.raises(UsageError):
        AugmentationConfig(RotationAngles(yaw=-1.0))


def test_augment_dataset_writes_variants_and_log(small_dataset, tmp_path):
    manifest = dataset_io.load_manifest(small_dataset)
    out_dir = tmp_path / "aug"
    cfg = AugmentationConfig(apply_probability=1.0)

    augmented = augment_dataset(manifest, out_dir, count=2, cfg=cfg, seed=11, jobs=2, show_progress=False)

    assert len(augmented.entries) == 20
    assert augmented.entries[0].sample_id == "pano_00_aug000"
    log = pd.read_csv(out_dir / "augmentation_log.csv")
    assert len(log) == 20 and log["applied"].all()

    reloaded = dataset_io.load_manifest(out_dir / "manifest.json")
    assert [e.sample_id for e in reloaded.entries] == [e.sample_id for e in augmented.entries]
    sample = dataset_io.load_dataset(reloaded)[0]
    assert sample.labels.class_ids() <= set(range(4))


def test_augment_dataset_is_independent_of_jobs(small_dataset, tmp_path):
    manifest = dataset_io.load_manifest(small_dataset)
    cfg = AugmentationConfig()
    augment_dataset(manifest, tmp_path / "one", 1, cfg, seed=3, jobs=1, show_progress=False)
    augment_dataset(manifest, tmp_path / "four", 1, cfg, seed=3, jobs=4, show_progress=False)

    one = pd.read_csv(tmp_path / "one" / "augmentation_log.csv")
    four = pd.read_csv(tmp_path / "four" / "augmentation_log.csv")
    pd.testing.assert_frame_equal(one, four)
    a = dataset_io.load_labels(tmp_path / "one" / "pano_05_aug000_label.png")
    b = dataset_io.load_labels(tmp_path / "four" / "pano_05_aug000_label.png")
    np.testing.assert_array_equal(a.data, b.data)
