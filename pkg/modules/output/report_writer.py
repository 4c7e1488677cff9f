"""
Module for writing and reading SGA validation reports.

A report is written as a JSON document (situations array plus mean, variance
and range per metric) and two CSV tables: one row per situation, and a
Mean / Variance / Range summary.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import pandas as pd

from modules.errors import DataError
from modules.evaluation.sga_validation import METRICS, SgaReport, SituationResult, aggregate

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

STAT_LABELS = {"mean": "Mean", "variance": "Variance", "range": "Range"}


def report_to_dict(report: SgaReport) -> Dict[str, Any]:
    """
    Convert a report to its JSON structure.

    Args:
        report: SGA report

    Returns:
        Dictionary with keys situations, mean, variance, range, min, max,
        per_class_mean_iou, failed (and class_names when known)
    """
    data: Dict[str, Any] = {"situations": [s.to_dict() for s in report.situations]}
    for stat, key in (("mean", "mean"), ("variance", "variance"), ("range", "range"),
                      ("minimum", "min"), ("maximum", "max")):
        data[key] = {metric: getattr(report.aggregates[metric], stat) for metric in METRICS}
    data["per_class_mean_iou"] = report.per_class_mean_iou
    data["failed"] = [s.index for s in report.failed_situations]
    if report.class_names:
        data["class_names"] = list(report.class_names)
    return data


def situation_table(report: SgaReport) -> pd.DataFrame:
    """One row per situation, labelled (pitch,roll,yaw) as in the validation tables."""
    rows = []
    for s in report.situations:
        rows.append({
            "situation": s.angles.label(),
            "pitch": s.angles.pitch,
            "roll": s.angles.roll,
            "yaw": s.angles.yaw,
            "miou": s.miou,
            "pixel_accuracy": s.pixel_accuracy,
            "status": "failed" if s.failed else "ok",
        })
    return pd.DataFrame(rows)


def summary_table(report: SgaReport) -> pd.DataFrame:
    rows = []
    for stat, label in STAT_LABELS.items():
        row = {"statistic": label}
        for metric in METRICS:
            row[metric] = getattr(report.aggregates[metric], stat)
        rows.append(row)
    return pd.DataFrame(rows)


def comparison_table(comparison: Dict[str, Dict[str, Dict[str, float]]]) -> pd.DataFrame:
    """Flatten compare_reports output into rows Mean / Variance / Range."""
    rows = []
    for stat, label in STAT_LABELS.items():
        row: Dict[str, Any] = {"statistic": label}
        for metric, stats in comparison.items():
            for column in ("baseline", "candidate", "delta"):
                row[f"{metric}_{column}"] = stats[stat][column]
        rows.append(row)
    return pd.DataFrame(rows)


def write_report(report: SgaReport, path: PathLike) -> Dict[str, Path]:
    """
    Write the JSON report and its CSV tables next to each other.

    Args:
        report: SGA report
        path: Report path; a missing .json suffix is added

    Returns:
        Dictionary of written paths keyed by "json", "csv", "summary"
    """
    path = Path(path)
    json_path = path if path.suffix == ".json" else path.with_suffix(".json")
    json_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path = json_path.with_suffix(".csv")
    summary_path = json_path.with_name(f"{json_path.stem}_summary.csv")

    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(report_to_dict(report), f, indent=2)
    situation_table(report).to_csv(csv_path, index=False)
    summary_table(report).to_csv(summary_path, index=False)

    logger.info("Report written to %s", json_path)
    return {"json": json_path, "csv": csv_path, "summary": summary_path}


def load_report(path: PathLike) -> SgaReport:
    """Read a JSON report and recompute its aggregates from the situations array."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        situations = [SituationResult.from_dict(item) for item in data["situations"]]
    except FileNotFoundError as e:
        raise DataError(f"Report not found: {path}") from e
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise DataError(f"Malformed report {path}: {e}") from e
    return aggregate(situations, data.get("class_names"))


def write_record(record: Dict[str, Any], path: PathLike) -> Path:
    """Write a single-evaluation metrics record as JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(record, f, indent=2)
    return path
