import sys

import numpy as np
import pytest

from modules.errors import EmptyInputError, PredictorError, UsageError
from modules.evaluation import seg_metrics
from modules.evaluation.predictors import BasePredictor, CommandPredictor, DirectoryPredictor
from modules.evaluation.sga_validation import (
    SituationResult,
    aggregate,
    build_grid,
    compare_reports,
    evaluate_situation,
    grid_from_preset,
    run_sga_validation,
)
from modules.geometry.rotation3d import RotationAngles, compose
from modules.image_processing.erp_image import LabelMap
from modules.image_processing.sga_projection import rotate_labels
from modules.utils import dataset_io

from conftest import block_labels, write_dataset

# Per-situation results of a rotation-grid evaluation, grid order (pitch, roll, yaw)
BASELINE_MIOU = [53.617, 49.292, 49.468, 47.234, 53.918, 49.861, 49.400, 47.589,
                 53.587, 49.344, 49.536, 47.458, 53.669, 49.462, 49.363, 47.726]
BASELINE_PACC = [81.483, 78.346, 78.500, 77.129, 81.590, 78.656, 78.373, 77.361,
                 81.476, 78.532, 78.585, 77.307, 81.459, 78.445, 78.485, 77.451]
ROBUST_MIOU = [56.374, 56.073, 56.074, 55.784, 56.441, 55.954, 56.128, 55.636,
               56.246, 55.951, 55.714, 55.501, 56.223, 55.924, 55.983, 55.732]
ROBUST_PACC = [83.135, 82.892, 82.905, 82.794, 83.130, 82.847, 82.895, 82.657,
               83.054, 82.906, 82.796, 82.750, 83.051, 82.779, 82.904, 82.701]


def results_from(miou_values, pacc_values):
    grid = build_grid()
    return [
        SituationResult(index=k, angles=angles, miou=m, pixel_accuracy=p)
        for k, (angles, m, p) in enumerate(zip(grid.situations(), miou_values, pacc_values))
    ]


def write_predictions(root, dataset, grid, rotate):
    """Per-situation prediction directory; rotate=False gives a rotation-blind predictor."""
    for index, angles in enumerate(grid.situations()):
        situation_dir = root / f"s{index:02d}"
        situation_dir.mkdir(parents=True)
        r = compose(angles)
        for sample in dataset:
            labels = rotate_labels(sample.labels, r) if rotate else sample.labels
            dataset_io.save_labels(situation_dir / f"{sample.sample_id}.png", labels)
    return DirectoryPredictor(root)


class FlakyPredictor(BasePredictor):
    """Returns the ground truth it is given, but fails on chosen situations."""

    def __init__(self, failing):
        self.failing = set(failing)

    def predict(self, request):
        if request.situation_index in self.failing:
            raise PredictorError(f"situation {request.situation_index} unavailable")
        return LabelMap(np.zeros(request.image.dims.shape, dtype=np.uint8))


@pytest.fixture
def dataset(small_dataset):
    return dataset_io.load_dataset(dataset_io.load_manifest(small_dataset))


def test_published_aggregates_are_reproduced():
    report = aggregate(results_from(BASELINE_MIOU, BASELINE_PACC))
    miou, pacc = report.aggregates["miou"], report.aggregates["pixel_accuracy"]
    assert miou.mean == pytest.approx(50.033, abs=1e-3)
    assert miou.variance == pytest.approx(5.147, abs=1e-3)
    assert miou.range == pytest.approx(6.684, abs=1e-3)
    assert pacc.mean == pytest.approx(78.949, abs=1e-3)
    assert pacc.variance == pytest.approx(2.413, abs=1e-3)
    assert pacc.range == pytest.approx(4.461, abs=1e-3)

    robust = aggregate(results_from(ROBUST_MIOU, ROBUST_PACC))
    miou, pacc = robust.aggregates["miou"], robust.aggregates["pixel_accuracy"]
    assert miou.mean == pytest.approx(55.984, abs=1e-3)
    assert miou.variance == pytest.approx(0.066, abs=1e-3)
    assert miou.range == pytest.approx(0.940, abs=1e-3)
    assert pacc.mean == pytest.approx(82.887, abs=1e-3)
    assert pacc.variance == pytest.approx(0.020, abs=1e-3)
    assert pacc.range == pytest.approx(0.478, abs=1e-3)


def test_compare_reports_deltas():
    comparison = compare_reports(aggregate(results_from(BASELINE_MIOU, BASELINE_PACC)),
                                 aggregate(results_from(ROBUST_MIOU, ROBUST_PACC)))
    assert comparison["miou"]["mean"]["delta"] == pytest.approx(5.951, abs=2e-3)
    assert comparison["miou"]["variance"]["delta"] == pytest.approx(-5.081, abs=2e-3)
    assert comparison["pixel_accuracy"]["range"]["delta"] == pytest.approx(-3.983, abs=2e-3)


def test_default_grid_has_sixteen_situations_in_order():
    situations = build_grid().situations()
    assert len(situations) == len(build_grid()) == 16
    assert situations[0] == RotationAngles()
    assert [a.yaw for a in situations[:4]] == [0.0, 90.0, 180.0, 270.0]
    assert situations[4] == RotationAngles(yaw=0.0, pitch=0.0, roll=5.0)
    assert situations[15] == RotationAngles(yaw=270.0, pitch=5.0, roll=5.0)


def test_grid_presets_and_validation():
    assert len(grid_from_preset("0-0-360")) == 4
    assert grid_from_preset("10-10-360").pitch_values == (0.0, 10.0)
    assert grid_from_preset("5-5-360") == build_grid()
    with pytest.raises(UsageError):
        grid_from_preset("7-7-360")
    with pytest.raises(UsageError):
        build_grid(yaw_values=[0, 90, 90])
    with pytest.raises(UsageError):
        build_grid(pitch_values=[])


def test_oracle_predictor_scores_perfectly(dataset, tmp_path):
    grid = build_grid()
    predictor = write_predictions(tmp_path / "oracle", dataset, grid, rotate=True)
    report = run_sga_validation(dataset, predictor, grid, num_classes=4, show_progress=False)

    assert len(report.situations) == 16 and not report.failed_situations
    for metric in ("miou", "pixel_accuracy"):
        agg = report.aggregates[metric]
        assert agg.mean == 1.0 and agg.variance == 0.0 and agg.range == 0.0


def test_rotation_blind_predictor_varies(dataset, tmp_path):
    grid = build_grid()
    predictor = write_predictions(tmp_path / "blind", dataset, grid, rotate=False)
    report = run_sga_validation(dataset, predictor, grid, num_classes=4, show_progress=False)

    assert report.situations[0].miou == 1.0
    assert report.aggregates["miou"].variance > 0.0
    assert report.aggregates["miou"].range > 0.0


def test_identity_situation_matches_plain_evaluation(dataset):
    class Shifted(BasePredictor):
        def predict(self, request):
            return LabelMap(np.roll(by_id[request.sample_id].labels.data, 3, axis=1))

    by_id = {s.sample_id: s for s in dataset}
    result = evaluate_situation(dataset, Shifted(), RotationAngles(), 4)

    cm = seg_metrics.ConfusionMatrix.empty(4)
    for sample in dataset:
        pred = LabelMap(np.roll(sample.labels.data, 3, axis=1))
        cm = cm + seg_metrics.accumulate(pred, sample.labels, 4)
    assert result.miou == seg_metrics.miou(cm)
    assert result.pixel_accuracy == seg_metrics.pixel_accuracy(cm)


def test_failed_situations_are_reported_and_excluded(dataset):
    grid = build_grid()
    report = run_sga_validation(dataset, FlakyPredictor(failing={3, 7}), grid, 4,
                                jobs=3, show_progress=False)
    assert [s.index for s in report.failed_situations] == [3, 7]
    assert "unavailable" in report.failed_situations[0].error
    assert report.aggregates["miou"].count == 14


def test_all_failed_situations_cannot_be_aggregated(dataset):
    grid = grid_from_preset("0-0-360")
    with pytest.raises(EmptyInputError):
        run_sga_validation(dataset, FlakyPredictor(failing=range(4)), grid, 4, show_progress=False)
    with pytest.raises(EmptyInputError):
        aggregate([])


def test_parallel_run_matches_serial(dataset, tmp_path):
    grid = grid_from_preset("3-3-360")
    predictor = write_predictions(tmp_path / "blind", dataset, grid, rotate=False)
    serial = run_sga_validation(dataset, predictor, grid, 4, jobs=1, show_progress=False)
    parallel = run_sga_validation(dataset, predictor, grid, 4, jobs=4, show_progress=False)
    assert [s.to_dict() for s in serial.situations] == [s.to_dict() for s in parallel.situations]


def test_situation_result_round_trips_through_dict():
    result = SituationResult(index=5, angles=RotationAngles(90.0, 5.0, 0.0), miou=0.5,
                             pixel_accuracy=0.75, per_class_iou=[0.5, None], evaluated_pixels=12)
    assert SituationResult.from_dict(result.to_dict()) == result


def test_blind_predictor_with_unlabeled_band_completes_every_situation(tmp_path):
    samples = []
    for k in range(4):
        labels = block_labels(32, 64, 4, seed=k, block_rows=8, block_cols=16, band=8)
        labels.data[-4:] = 255
        samples.append((f"pano_{k:02d}", labels))
    manifest = dataset_io.load_manifest(write_dataset(tmp_path / "data", samples, num_classes=4))
    dataset = dataset_io.load_dataset(manifest)

    grid = build_grid()
    predictor = write_predictions(tmp_path / "blind", dataset, grid, rotate=False)
    report = run_sga_validation(dataset, predictor, grid, num_classes=4, show_progress=False)

    assert not report.failed_situations
    assert report.aggregates["miou"].count == 16
    assert report.situations[0].miou == 1.0
    assert min(s.pixel_accuracy for s in report.situations) < 1.0


def test_binary_stderr_from_command_marks_situation_failed(dataset, tmp_path):
    script = tmp_path / "noisy_pred.py"
    script.write_text("import sys\nsys.stderr.buffer.write(b'\\xff\\xfe')\nsys.exit(1)\n", encoding="utf-8")
    predictor = CommandPredictor(f'"{sys.executable}" "{script}" {{output}}', max_retries=1, retry_delay=0)
    result = evaluate_situation(dataset[:1], predictor, RotationAngles(), 4)
    assert result.failed
    assert "exit code 1" in result.error


def test_unexpected_predictor_exception_marks_situation_failed(dataset):
    class Broken(BasePredictor):
        def predict(self, request):
            raise RuntimeError("out of memory")

    result = evaluate_situation(dataset, Broken(), RotationAngles(yaw=90.0), 4, index=1)
    assert result.failed and result.index == 1
    assert "out of memory" in result.error
