"""Input checks shared by the estimator classes and the CLI."""

from __future__ import annotations

import numbers
import os
from pathlib import Path

import numpy as np

from .exceptions import DimMismatch, EmptyRecords, SpacingMismatch
from .records import MetricRecord, MetricTable, load_metric_table
from .volume_io import LabelVolume, read_nifti


def check_label_volume(volume, spacing=(1.0, 1.0, 1.0)) -> LabelVolume:
    """Accept a LabelVolume, an integer array, or a path to a NIfTI file."""
    if isinstance(volume, LabelVolume):
        return volume
    if isinstance(volume, (str, os.PathLike)):
        return read_nifti(volume)
    arr = np.asarray(volume)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8)
    if arr.dtype.kind == "f":
        if not np.array_equal(arr, np.rint(arr)):
            raise ValueError("label arrays must hold integral values")
        arr = arr.astype(np.int32)
    return LabelVolume(arr, spacing)


def check_same_grid(gt: LabelVolume, pred: LabelVolume) -> None:
    if gt.dims != pred.dims:
        raise DimMismatch(f"grid {pred.dims} does not match reference {gt.dims}")
    if not np.allclose(gt.spacing, pred.spacing, rtol=1e-5, atol=0):
        raise SpacingMismatch(f"spacing {pred.spacing} does not match reference {gt.spacing}")


def check_metric_table(X, hd_column: str = "hd95") -> MetricTable:
    """Accept a MetricTable, an iterable of MetricRecord, or a metrics CSV path."""
    if isinstance(X, MetricTable):
        table = X
    elif isinstance(X, (str, os.PathLike)):
        table = load_metric_table(Path(X), hd_column)
    else:
        records = list(X)
        if records and not all(isinstance(r, MetricRecord) for r in records):
            raise TypeError("expected MetricRecord items")
        table = MetricTable.from_records(records)
    if not table.teams or not table.cases:
        raise EmptyRecords("metric table has no teams or cases")
    return table


def check_percentile(q) -> float:
    if not isinstance(q, numbers.Real) or not 0 < q <= 100:
        raise ValueError(f"percentile must lie in (0, 100], got {q!r}")
    return float(q)


def check_alpha(alpha) -> float:
    if not isinstance(alpha, numbers.Real) or not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    return float(alpha)


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
