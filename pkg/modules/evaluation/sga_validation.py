"""
SGA validation: evaluate a predictor over a grid of rotation situations and
summarize each metric by Mean, Variance and Range.

Situations are enumerated in (pitch, roll, yaw) lexicographic order, yaw
varying fastest. Image and ground truth are rotated with the same nearest rule,
so an oracle predictor scores exactly 1.0 in every situation. Failed
situations are kept in the report but left out of the aggregates.
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from modules.config import GRID_PITCH, GRID_ROLL, GRID_YAW, SGA_PRESETS
from modules.errors import DataError, EmptyInputError, PredictorError, UsageError
from modules.evaluation import seg_metrics
from modules.evaluation.predictors import BasePredictor, PredictionRequest
from modules.geometry.rotation3d import RotationAngles, compose
from modules.image_processing.sga_projection import rotate_sample
from modules.utils.console import progress
from modules.utils.dataset_io import Sample
from modules.utils.statistics import MetricAggregate, aggregate_values, per_class_means

logger = logging.getLogger(__name__)

METRICS = ("miou", "pixel_accuracy")


@dataclass(frozen=True)
class RotationGrid:
    yaw_values: Sequence[float]
    pitch_values: Sequence[float]
    roll_values: Sequence[float]

    def __post_init__(self):
        for name in ("yaw_values", "pitch_values", "roll_values"):
            values = [float(v) for v in getattr(self, name)]
            if not values:
                raise UsageError(f"Rotation grid {name} must not be empty")
            if len(set(values)) != len(values):
                raise UsageError(f"Rotation grid {name} has duplicates: {values}")
            object.__setattr__(self, name, tuple(values))

    def situations(self) -> List[RotationAngles]:
        return [
            RotationAngles(yaw=yaw, pitch=pitch, roll=roll)
            for pitch, roll, yaw in itertools.product(self.pitch_values, self.roll_values, self.yaw_values)
        ]

    def __len__(self) -> int:
        return len(self.yaw_values) * len(self.pitch_values) * len(self.roll_values)


@dataclass
class SituationResult:
    index: int
    angles: RotationAngles
    miou: Optional[float] = None
    pixel_accuracy: Optional[float] = None
    per_class_iou: List[Optional[float]] = field(default_factory=list)
    evaluated_pixels: int = 0
    failed: bool = False
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "yaw": self.angles.yaw,
            "pitch": self.angles.pitch,
            "roll": self.angles.roll,
            "miou": self.miou,
            "pixel_accuracy": self.pixel_accuracy,
            "per_class_iou": self.per_class_iou,
            "evaluated_pixels": self.evaluated_pixels,
            "failed": self.failed,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SituationResult":
        return cls(
            index=int(data.get("index", 0)),
            angles=RotationAngles(float(data.get("yaw", 0.0)), float(data.get("pitch", 0.0)),
                                  float(data.get("roll", 0.0))),
            miou=data.get("miou"),
            pixel_accuracy=data.get("pixel_accuracy"),
            per_class_iou=list(data.get("per_class_iou") or []),
            evaluated_pixels=int(data.get("evaluated_pixels", 0)),
            failed=bool(data.get("failed", False)),
            error=data.get("error"),
        )


@dataclass
class SgaReport:
    situations: List[SituationResult]
    aggregates: Dict[str, MetricAggregate]
    per_class_mean_iou: List[Optional[float]] = field(default_factory=list)
    class_names: Optional[List[str]] = None

    @property
    def failed_situations(self) -> List[SituationResult]:
        return [s for s in self.situations if s.failed]


def build_grid(yaw_values: Sequence[float] = GRID_YAW, pitch_values: Sequence[float] = GRID_PITCH,
               roll_values: Sequence[float] = GRID_ROLL) -> RotationGrid:
    return RotationGrid(yaw_values, pitch_values, roll_values)


def grid_from_preset(name: str) -> RotationGrid:
    """
    Grid for a named disturbance setting such as "5-5-360".

    Pitch and roll take {0, max} (just {0} when max is 0); yaw is 0/90/180/270.
    """
    if name not in SGA_PRESETS:
        raise UsageError(f"Unknown SGA preset '{name}' (known: {', '.join(SGA_PRESETS)})")
    pitch_max, roll_max = SGA_PRESETS[name]
    pitch = (0.0,) if pitch_max == 0 else (0.0, pitch_max)
    roll = (0.0,) if roll_max == 0 else (0.0, roll_max)
    return RotationGrid(GRID_YAW, pitch, roll)


def _predict(predictor: BasePredictor, request: PredictionRequest):
    """Run one prediction; anything the predictor raises becomes a PredictorError."""
    try:
        return predictor.predict(request)
    except (PredictorError, DataError):
        raise
    except Exception as e:
        raise PredictorError(f"{predictor.describe()} crashed on {request.sample_id}: {e}") from e


def evaluate_situation(
    dataset: Sequence[Sample],
    predictor: BasePredictor,
    angles: RotationAngles,
    num_classes: int,
    index: int = 0,
) -> SituationResult:
    """
    Rotate every sample, run the predictor and pool the confusion matrices.

    Args:
        dataset: Loaded samples
        predictor: Predictor under test
        angles: Rotation of this situation
        num_classes: Number of classes
        index: Situation index, passed to the predictor

    Returns:
        SituationResult; failed=True if the predictor failed on any image
    """
    if not dataset:
        raise EmptyInputError("SGA validation needs at least one sample")

    r = compose(angles)
    cm = seg_metrics.ConfusionMatrix.empty(num_classes)
    try:
        for sample in dataset:
            image, labels = rotate_sample(sample.image, sample.labels, r)
            pred = _predict(predictor, PredictionRequest(sample.sample_id, index, image, labels.ignore_id))
            cm = cm + seg_metrics.accumulate(pred, labels, num_classes)
        record = cm.to_record()
    except (PredictorError, DataError) as e:
        logger.error("Situation %d %s failed: %s", index, angles.label(), e)
        return SituationResult(index=index, angles=angles, failed=True, error=str(e))

    return SituationResult(
        index=index,
        angles=angles,
        miou=record["miou"],
        pixel_accuracy=record["pixel_accuracy"],
        per_class_iou=record["per_class_iou"],
        evaluated_pixels=record["evaluated_pixels"],
    )


def aggregate(results: Sequence[SituationResult], class_names: Optional[List[str]] = None) -> SgaReport:
    """
    Summarize situations into an SgaReport.

    Args:
        results: Per-situation results, failed ones included
        class_names: Optional names for per-class output

    Returns:
        SgaReport with Mean / Variance / Range per metric over successful situations
    """
    if not results:
        raise EmptyInputError("Cannot aggregate an empty list of situations")
    ok = [r for r in results if not r.failed]
    if not ok:
        raise EmptyInputError("Every situation failed; nothing to aggregate")

    aggregates = {metric: aggregate_values(getattr(r, metric) for r in ok) for metric in METRICS}
    return SgaReport(
        situations=list(results),
        aggregates=aggregates,
        per_class_mean_iou=per_class_means([r.per_class_iou for r in ok]),
        class_names=class_names,
    )


def run_sga_validation(
    dataset: Sequence[Sample],
    predictor: BasePredictor,
    grid: RotationGrid,
    num_classes: int,
    class_names: Optional[List[str]] = None,
    jobs: int = 1,
    show_progress: bool = True,
) -> SgaReport:
    """Evaluate every situation of the grid (in parallel when jobs > 1) and aggregate in grid order."""
    situations = grid.situations()
    logger.info("SGA validation: %d situations x %d samples with %s",
                len(situations), len(dataset), predictor.describe())

    def _run(item):
        index, angles = item
        return evaluate_situation(dataset, predictor, angles, num_classes, index)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(progress(pool.map(_run, enumerate(situations)), total=len(situations),
                                desc="Situations", enabled=show_progress))

    failed = [r for r in results if r.failed]
    if failed:
        logger.warning("%d of %d situations failed and are excluded from aggregates",
                       len(failed), len(results))
    return aggregate(results, class_names)


def compare_reports(baseline: SgaReport, candidate: SgaReport) -> Dict[str, Dict[str, Dict[str, float]]]:
    """
    Per-metric Mean / Variance / Range of both reports and candidate - baseline deltas.

    Returns:
        {metric: {"mean"|"variance"|"range": {"baseline", "candidate", "delta"}}}
    """
    out: Dict[str, Dict[str, Dict[str, float]]] = {}
    for metric in METRICS:
        base = baseline.aggregates[metric]
        cand = candidate.aggregates[metric]
        out[metric] = {
            stat: {
                "baseline": getattr(base, stat),
                "candidate": getattr(cand, stat),
                "delta": getattr(cand, stat) - getattr(base, stat),
            }
            for stat in ("mean", "variance", "range")
        }
    return out
