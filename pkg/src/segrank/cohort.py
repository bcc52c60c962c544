"""Per-case metadata and the case filters used for subset analyses.

Manifest files are CSV or JSON with one entry per case and the columns
``case_id, ga_weeks, pathological, sr_method, quality_r1..quality_rN, split``.
A single ``quality`` column may replace the per-rater columns.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .exceptions import DuplicateCase, EmptySplit, ParseError
from .stats import QUALITY_LEVELS, KsResult, ks_two_sample, median_ordinal

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
SR_METHODS = ("mialSR", "IRTK")
GA_BANDS = {"Young": (21, 28), "Old": (29, 35)}
_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f"}


@dataclass(frozen=True)
class CaseMeta:
    case_id: str
    ga_weeks: float | None = None
    pathological: bool | None = None
    sr_method: str | None = None
    quality: str | None = None
    split: str = "test"
    ratings: tuple[str, ...] = field(default=())

    @property
    def ga_band(self) -> str | None:
        """``Young`` (21-28) or ``Old`` (29-35) by completed gestational week."""
        if self.ga_weeks is None:
            return None
        week = math.floor(self.ga_weeks)
        for band, (lo, hi) in GA_BANDS.items():
            if lo <= week <= hi:
                return band
        return None


@dataclass(frozen=True)
class Manifest:
    cases: tuple[CaseMeta, ...]

    def __post_init__(self):
        seen = set()
        for c in self.cases:
            if c.case_id in seen:
                raise DuplicateCase(f"case {c.case_id!r} listed twice")
            seen.add(c.case_id)

    def __len__(self):
        return len(self.cases)

    def __iter__(self):
        return iter(self.cases)

    @property
    def case_ids(self) -> tuple[str, ...]:
        return tuple(c.case_id for c in self.cases)

    def get(self, case_id: str) -> CaseMeta:
        for c in self.cases:
            if c.case_id == case_id:
                return c
        raise KeyError(case_id)


def _parse_bool(value, where: str) -> bool | None:
    if value is None or isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("", "na"):
        return None
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ParseError(f"{where}: not a boolean: {value!r}")


def _parse_ga(value, where: str) -> float | None:
    if value is None or str(value).strip() in ("", "NA"):
        return None
    try:
        ga = float(value)
    except ValueError:
        raise ParseError(f"{where}: bad gestational age {value!r}") from None
    if not 20 <= ga <= 40:
        raise ParseError(f"{where}: gestational age {ga} outside 20-40 weeks")
    if ga > 35:
        log.warning("%s: gestational age %.1f is above the 20-35 week range of the challenge data", where, ga)
    return ga


def _case_from_entry(entry: dict, where: str) -> CaseMeta:
    case_id = str(entry.get("case_id") or "").strip()
    if not case_id:
        raise ParseError(f"{where}: missing case_id")
    sr = entry.get("sr_method")
    sr = str(sr).strip() if sr not in (None, "", "NA") else None
    if sr is not None and sr not in SR_METHODS:
        raise ParseError(f"{where}: unknown sr_method {sr!r}")
    raters = sorted(k for k in entry if k.startswith("quality_r"))
    ratings = tuple(str(entry[k]).strip() for k in raters if entry[k] not in (None, "", "NA"))
    for r in ratings:
        if r not in QUALITY_LEVELS:
            raise ParseError(f"{where}: unknown quality rating {r!r}")
    quality = entry.get("quality")
    quality = str(quality).strip() if quality not in (None, "", "NA") else None
    if quality is None and ratings:
        quality = median_ordinal(ratings)
    if quality is not None and quality not in QUALITY_LEVELS:
        raise ParseError(f"{where}: unknown quality {quality!r}")
    split = str(entry.get("split") or "test").strip()
    if split not in ("train", "test"):
        raise ParseError(f"{where}: split must be train or test, got {split!r}")
    return CaseMeta(
        case_id=case_id,
        ga_weeks=_parse_ga(entry.get("ga_weeks"), where),
        pathological=_parse_bool(entry.get("pathological"), where),
        sr_method=sr,
        quality=quality,
        split=split,
        ratings=ratings,
    )


def load_manifest(path: str | os.PathLike) -> Manifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read manifest {path}: {exc}") from exc
    if not text.strip():
        raise ParseError(f"manifest {path} is empty")
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        entries = doc["cases"] if isinstance(doc, dict) else doc
    else:
        reader = csv.DictReader(text.splitlines())
        if not reader.fieldnames or "case_id" not in reader.fieldnames:
            raise ParseError(f"{path}: no case_id column")
        entries = list(reader)
    cases = tuple(_case_from_entry(e, f"{path.name} entry {i + 1}") for i, e in enumerate(entries))
    if not cases:
        raise ParseError(f"manifest {path} lists no cases")
    return Manifest(cases)


def write_manifest(manifest: Manifest, path: str | os.PathLike) -> None:
    n_raters = max((len(c.ratings) for c in manifest), default=0)
    rater_cols = [f"quality_r{i + 1}" for i in range(n_raters)]
    rows = []
    for c in manifest:
        row = {
            "case_id": c.case_id,
            "ga_weeks": "" if c.ga_weeks is None else c.ga_weeks,
            "pathological": "" if c.pathological is None else int(c.pathological),
            "sr_method": c.sr_method or "",
            "split": c.split,
        }
        if rater_cols:
            row.update({col: (c.ratings[i] if i < len(c.ratings) else "") for i, col in enumerate(rater_cols)})
        else:
            row["quality"] = c.quality or ""
        rows.append(row)
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps({"version": MANIFEST_VERSION, "cases": rows}, indent=1) + "\n")
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def filter_cases(
    manifest: Manifest,
    pathological: bool | None = None,
    sr_method: str | None = None,
    quality: str | None = None,
    ga_band: str | None = None,
    split: str | None = None,
) -> set[str]:
    """Case ids satisfying every criterion given (``None`` means unconstrained)."""
    if ga_band is not None and ga_band not in GA_BANDS:
        raise ValueError(f"ga_band must be one of {list(GA_BANDS)}")
    out = set()
    for c in manifest:
        if pathological is not None and c.pathological != pathological:
            continue
        if sr_method is not None and c.sr_method != sr_method:
            continue
        if quality is not None and c.quality != quality:
            continue
        if ga_band is not None and c.ga_band != ga_band:
            continue
        if split is not None and c.split != split:
            continue
        out.add(c.case_id)
    return out


# Named subsets as plotted in the subset ranking figure.
STANDARD_SUBSETS = {
    "all": {},
    "non_pathological": {"pathological": False},
    "pathological": {"pathological": True},
    "mialSR": {"sr_method": "mialSR"},
    "IRTK": {"sr_method": "IRTK"},
    "excellent_quality": {"quality": "Excellent"},
    "good_quality": {"quality": "Good"},
    "poor_quality": {"quality": "Poor"},
    "ga_young": {"ga_band": "Young"},
    "ga_old": {"ga_band": "Old"},
}


def standard_subsets(manifest: Manifest, names: Iterable[str] | None = None, split: str | None = "test") -> dict[str, set[str]]:
    names = list(STANDARD_SUBSETS) if names is None else list(names)
    out = {}
    for name in names:
        if name not in STANDARD_SUBSETS:
            raise ValueError(f"unknown subset {name!r}; choose from {list(STANDARD_SUBSETS)}")
        out[name] = filter_cases(manifest, split=split, **STANDARD_SUBSETS[name])
    return out


def compare_splits(manifest: Manifest, attribute: str) -> KsResult:
    """Two-sample KS test of ``ga_weeks`` or ``pathological`` between train and test cases."""
    if attribute not in ("ga_weeks", "pathological"):
        raise ValueError("attribute must be 'ga_weeks' or 'pathological'")

    def values(split):
        vals = [getattr(c, attribute) for c in manifest if c.split == split]
        return [float(v) for v in vals if v is not None]

    train, test = values("train"), values("test")
    if not train or not test:
        raise EmptySplit(f"both splits need {attribute} values (train={len(train)}, test={len(test)})")
    return ks_two_sample(train, test)
