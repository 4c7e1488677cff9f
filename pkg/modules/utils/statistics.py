"""
Summary statistics over per-situation results.
"""

from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Optional

import numpy as np

from modules.errors import EmptyInputError


@dataclass(frozen=True)
class MetricAggregate:
    """Mean, population variance and range of one metric over all situations."""

    mean: float
    variance: float
    range: float
    minimum: float
    maximum: float
    count: int

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def aggregate_values(values: Iterable[float]) -> MetricAggregate:
    """
    Summarize a list of metric values.

    Variance divides by N (population variance).

    Args:
        values: One value per situation

    Returns:
        MetricAggregate
    """
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise EmptyInputError("Cannot aggregate an empty list of values")
    if not np.all(np.isfinite(arr)):
        raise EmptyInputError("Values to aggregate must be finite")

    lo, hi = float(arr.min()), float(arr.max())
    mean = float(arr.mean())
    # mean can round a hair outside [lo, hi] for near-constant inputs
    mean = min(max(mean, lo), hi)
    return MetricAggregate(
        mean=mean,
        variance=float(arr.var(ddof=0)),
        range=hi - lo,
        minimum=lo,
        maximum=hi,
        count=int(arr.size),
    )


def per_class_means(per_class: List[List[Optional[float]]]) -> List[Optional[float]]:
    """Column means over situations, skipping undefined (None) entries."""
    if not per_class:
        return []
    num_classes = max(len(row) for row in per_class)
    means: List[Optional[float]] = []
    for c in range(num_classes):
        column = [row[c] for row in per_class if c < len(row) and row[c] is not None]
        means.append(sum(column) / len(column) if column else None)
    return means
