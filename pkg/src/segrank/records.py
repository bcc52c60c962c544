"""Metric records and the dense (metric, team, case, label) table built from them."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exceptions import EmptyRecords, SchemaError
from .metrics import LabelMetrics

METRICS = ("DSC", "HD95", "VS")
HIGHER_BETTER = {"DSC": True, "HD95": False, "VS": True}

NA = "NA"
MISSING = "MISSING"

CSV_COLUMNS = (
    "team", "case", "label_code", "label_name", "dsc", "vs", "hd", "hd95",
    "gt_present", "pred_present", "gt_voxels", "pred_voxels",
)


@dataclass(frozen=True)
class MetricRecord:
    """One metric value for a (team, case, label); ``value=None`` marks a missing result."""

    team: str
    case: str
    label_code: int
    metric: str
    value: float | None


@dataclass(frozen=True, eq=False)
class MetricTable:
    """Dense metric values indexed ``values[metric, team, case, label]``.

    ``NaN`` with ``missing == False`` is a cell that does not apply (label
    absent from the reference); ``missing == True`` marks results that must
    be replaced by the worst-value rule before aggregation.
    """

    teams: tuple[str, ...]
    cases: tuple[str, ...]
    labels: tuple[int, ...]
    values: np.ndarray
    missing: np.ndarray
    metrics: tuple[str, ...] = METRICS

    def __post_init__(self):
        shape = (len(self.metrics), len(self.teams), len(self.cases), len(self.labels))
        if self.values.shape != shape or self.missing.shape != shape:
            raise SchemaError(f"value array shape {self.values.shape} does not match axes {shape}")
        for m in self.metrics:
            if m not in HIGHER_BETTER:
                raise SchemaError(f"unknown metric {m!r}")

    @classmethod
    def from_records(cls, records: Iterable[MetricRecord], metrics: Sequence[str] = METRICS) -> "MetricTable":
        """Build a table; a team lacking a cell that another team reported counts as missing."""
        records = list(records)
        if not records:
            raise EmptyRecords("no metric records")
        teams = tuple(sorted({r.team for r in records}))
        cases = tuple(sorted({r.case for r in records}))
        labels = tuple(sorted({int(r.label_code) for r in records}))
        metrics = tuple(metrics)
        ti = {t: i for i, t in enumerate(teams)}
        ci = {c: i for i, c in enumerate(cases)}
        li = {c: i for i, c in enumerate(labels)}
        mi = {m: i for i, m in enumerate(metrics)}
        shape = (len(metrics), len(teams), len(cases), len(labels))
        values = np.full(shape, np.nan)
        missing = np.zeros(shape, dtype=bool)
        seen = np.zeros(shape, dtype=bool)
        for r in records:
            if r.metric not in mi:
                raise SchemaError(f"unknown metric {r.metric!r}")
            idx = (mi[r.metric], ti[r.team], ci[r.case], li[int(r.label_code)])
            seen[idx] = True
            if r.value is None:
                missing[idx] = True
            else:
                values[idx] = float(r.value)
        applicable = seen.any(axis=1, keepdims=True)
        missing |= applicable & ~seen
        return cls(teams, cases, labels, values, missing, metrics)

    def records(self) -> list[MetricRecord]:
        out = []
        for m_i, m in enumerate(self.metrics):
            for t_i, t in enumerate(self.teams):
                for c_i, c in enumerate(self.cases):
                    for l_i, lab in enumerate(self.labels):
                        if self.missing[m_i, t_i, c_i, l_i]:
                            out.append(MetricRecord(t, c, lab, m, None))
                        elif not np.isnan(self.values[m_i, t_i, c_i, l_i]):
                            out.append(MetricRecord(t, c, lab, m, float(self.values[m_i, t_i, c_i, l_i])))
        return out

    def metric_index(self, metric: str) -> int:
        try:
            return self.metrics.index(metric)
        except ValueError:
            raise SchemaError(f"metric {metric!r} not in table") from None

    def _replace(self, **kw) -> "MetricTable":
        fields = dict(
            teams=self.teams, cases=self.cases, labels=self.labels,
            values=self.values, missing=self.missing, metrics=self.metrics,
        )
        fields.update(kw)
        return MetricTable(**fields)

    def take_cases(self, idx: Sequence[int]) -> "MetricTable":
        """Select cases by position; repeats are allowed (bootstrap resamples)."""
        idx = np.asarray(idx, dtype=np.intp)
        return self._replace(
            cases=tuple(self.cases[i] for i in idx),
            values=self.values[:, :, idx, :],
            missing=self.missing[:, :, idx, :],
        )

    def select(self, cases=None, labels=None, teams=None, metrics=None) -> "MetricTable":
        """Restrict to the given case ids, label codes, teams and metrics (order kept from ``self``)."""
        t = self
        if metrics is not None:
            keep = [self.metric_index(m) for m in metrics]
            t = t._replace(metrics=tuple(t.metrics[i] for i in keep), values=t.values[keep], missing=t.missing[keep])
        if teams is not None:
            wanted = set(teams)
            keep = [i for i, x in enumerate(t.teams) if x in wanted]
            t = t._replace(teams=tuple(t.teams[i] for i in keep), values=t.values[:, keep], missing=t.missing[:, keep])
        if cases is not None:
            wanted = set(cases)
            t = t.take_cases([i for i, x in enumerate(t.cases) if x in wanted])
        if labels is not None:
            wanted = {int(x) for x in labels}
            keep = [i for i, x in enumerate(t.labels) if x in wanted]
            t = t._replace(
                labels=tuple(t.labels[i] for i in keep), values=t.values[..., keep], missing=t.missing[..., keep]
            )
        return t


def label_metrics_to_row(team: str, case: str, m: LabelMetrics, hd_missing: bool | None = None) -> dict:
    """Serialise one :class:`LabelMetrics` to the metrics-CSV row layout."""

    def fmt(x, missing_marker):
        if x is not None:
            return repr(float(x))
        return missing_marker

    if hd_missing is None:
        hd_missing = m.gt_present and not m.pred_present
    hd_marker = MISSING if hd_missing else NA
    return {
        "team": team,
        "case": case,
        "label_code": m.label_code,
        "label_name": m.label_name,
        "dsc": fmt(m.dsc, NA),
        "vs": fmt(m.vs, NA),
        "hd": fmt(m.hd, hd_marker),
        "hd95": fmt(m.hd95, hd_marker),
        "gt_present": int(m.gt_present),
        "pred_present": int(m.pred_present),
        "gt_voxels": m.gt_volume,
        "pred_voxels": m.pred_volume,
    }


def write_metrics_csv(rows: Iterable[dict], path: str | os.PathLike) -> None:
    rows = sorted(rows, key=lambda r: (r["team"], r["case"], int(r["label_code"])))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def read_metrics_csv(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing_cols = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing_cols:
            raise SchemaError(f"{path}: missing columns {sorted(missing_cols)}")
        return list(reader)


def _parse_cell(text: str, where: str) -> float | None | str:
    text = text.strip()
    if text == NA or text == "":
        return NA
    if text == MISSING:
        return None
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"{where}: cannot parse {text!r}") from None


def rows_to_records(rows: Iterable[dict], hd_column: str = "hd95") -> list[MetricRecord]:
    """Convert metrics-CSV rows to long-form records.

    ``hd_column`` picks which surface distance feeds the HD95 ranking metric
    (``"hd"`` reproduces rankings built on the maximum distance).
    """
    if hd_column not in ("hd", "hd95"):
        raise ValueError("hd_column must be 'hd' or 'hd95'")
    out = []
    for n, row in enumerate(rows, start=2):
        try:
            team, case, label = row["team"], row["case"], int(row["label_code"])
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"row {n}: {exc}") from None
        for metric, col in (("DSC", "dsc"), ("HD95", hd_column), ("VS", "vs")):
            value = _parse_cell(row[col], f"row {n} column {col}")
            if value == NA:
                continue
            out.append(MetricRecord(team, case, label, metric, value))
    return out


def load_metric_table(path: str | os.PathLike, hd_column: str = "hd95") -> MetricTable:
    return MetricTable.from_records(rows_to_records(read_metrics_csv(path), hd_column))
