"""Plot-ready data files, minimal SVG renderings and the checksummed output index."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import os
from html import escape
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.stats import rankdata

from .ranking import RankingTable
from .records import HIGHER_BETTER, MetricTable
from .stats import SignificanceMatrix, per_case_scores

INDEX_NAME = "index.json"


def _write_rows(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def case_ranks(table: MetricTable, metric: str) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Per-case scores and per-case competition ranks (team x case)."""
    scores, cases = per_case_scores(table, metric)
    key = -scores if HIGHER_BETTER[metric] else scores
    ranks = rankdata(key, method="min", axis=0).astype(int) if scores.size else np.zeros_like(scores, dtype=int)
    return scores, ranks, cases


def write_dotbox(table: MetricTable, metric: str, path: Path) -> Path:
    scores, _, cases = case_ranks(table, metric)
    rows = [(t, c, repr(float(scores[i, j]))) for i, t in enumerate(table.teams) for j, c in enumerate(cases)]
    return _write_rows(path, ["team", "case", "value"], rows)


def write_podium(table: MetricTable, metric: str, path: Path) -> Path:
    scores, ranks, cases = case_ranks(table, metric)
    rows = [
        (c, t, repr(float(scores[i, j])), int(ranks[i, j]))
        for j, c in enumerate(cases)
        for i, t in enumerate(table.teams)
    ]
    return _write_rows(path, ["case", "team", "value", "rank"], rows)


def heatmap_counts(table: MetricTable, metric: str) -> np.ndarray:
    """Team x rank matrix: number of cases in which each team achieved each rank."""
    _, ranks, _ = case_ranks(table, metric)
    n = len(table.teams)
    return np.stack([np.bincount(r - 1, minlength=n)[:n] for r in ranks]) if ranks.size else np.zeros((n, n), int)


def write_heatmap(table: MetricTable, metric: str, path: Path) -> Path:
    counts = heatmap_counts(table, metric)
    rows = [(t, r + 1, int(counts[i, r])) for i, t in enumerate(table.teams) for r in range(counts.shape[1])]
    return _write_rows(path, ["team", "rank", "count"], rows)


def write_blob(summary: dict, path: Path) -> Path:
    """Bootstrap rank frequencies from a :meth:`BootstrapSummary.to_dict` document."""
    rows = []
    for i, t in enumerate(summary["teams"]):
        lo, hi = summary["interval_95"][i]
        for r, f in enumerate(summary["frequency"][i]):
            if f > 0:
                rows.append((t, r + 1, repr(float(f)), summary["median_rank"][i], lo, hi))
    return _write_rows(path, ["team", "rank", "frequency", "median_rank", "lo95", "hi95"], rows)


def write_lines(sweep: Mapping[str, RankingTable], path: Path) -> Path:
    rows = [(scheme, t, r) for scheme, table in sweep.items() for t, _, r in table.rows()]
    return _write_rows(path, ["scheme", "team", "rank"], rows)


# SVG

def _svg(width, height, body) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )


def svg_boxplot(table: MetricTable, metric: str, order: list[str] | None = None) -> str:
    scores, _, _ = case_ranks(table, metric)
    teams = list(table.teams)
    order = order or teams
    lo, hi = float(np.nanmin(scores)), float(np.nanmax(scores))
    if hi == lo:
        hi = lo + 1.0
    w, h, left, top, plot_h, step = 40 + 30 * len(order), 320, 40, 20, 220, 30
    y = lambda v: top + plot_h * (1 - (v - lo) / (hi - lo))  # noqa: E731
    body = [f'<text x="{left}" y="12">{escape(metric)} per case</text>']
    for k, team in enumerate(order):
        vals = np.sort(scores[teams.index(team)])
        q1, med, q3 = np.quantile(vals, [0.25, 0.5, 0.75])
        x = left + step * k + 15
        body.append(f'<line x1="{x}" x2="{x}" y1="{y(vals[0]):.2f}" y2="{y(vals[-1]):.2f}" stroke="#555"/>')
        body.append(
            f'<rect x="{x - 8}" y="{y(q3):.2f}" width="16" height="{max(y(q1) - y(q3), 0.5):.2f}" '
            f'fill="#9cc" stroke="#333"/>'
        )
        body.append(f'<line x1="{x - 8}" x2="{x + 8}" y1="{y(med):.2f}" y2="{y(med):.2f}" stroke="#000" stroke-width="2"/>')
        body.append(
            f'<text x="{x}" y="{top + plot_h + 12}" transform="rotate(60 {x} {top + plot_h + 12})">{escape(team)}</text>'
        )
    return _svg(w, h, body)


def svg_blob(summary: dict) -> str:
    teams = list(summary["teams"])
    order = [t for _, t in sorted(zip(summary["full_rank"], teams))]
    freq, med = np.asarray(summary["frequency"]), summary["median_rank"]
    n = len(teams)
    cell, left, top = 20, 40, 20
    body = [f'<text x="{left}" y="12">bootstrap ranks ({escape(summary["target"])}, b={summary["b"]})</text>']
    for k, team in enumerate(order):
        i = teams.index(team)
        x = left + cell * k + cell / 2
        for r in range(n):
            if freq[i, r] > 0:
                radius = (cell / 2) * np.sqrt(freq[i, r])
                body.append(f'<circle cx="{x}" cy="{top + cell * r + cell / 2}" r="{radius:.2f}" fill="#48a"/>')
        ym = top + cell * (med[i] - 1) + cell / 2
        body.append(f'<text x="{x - 3}" y="{ym + 3:.2f}" fill="#000">x</text>')
    return _svg(left + cell * n + 20, top + cell * n + 20, body)


def svg_significance(sig: SignificanceMatrix) -> str:
    n = len(sig.teams)
    cell, left, top = 14, 120, 20
    body = [f'<text x="4" y="12">significance map {escape(sig.metric)} (alpha={sig.alpha})</text>']
    for j in range(n):
        body.append(f'<text x="4" y="{top + cell * j + 11}">{escape(sig.teams[j])}</text>')
        for i in range(n):
            color = "#eee" if i == j else ("#fd0" if sig.superior[i, j] else "#36c")
            body.append(f'<rect x="{left + cell * i}" y="{top + cell * j}" width="{cell}" height="{cell}" fill="{color}"/>')
    return _svg(left + cell * n + 10, top + cell * n + 10, body)


# index

def sha256(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_index(out_dir: str | os.PathLike, timestamp: str | None = None) -> Path:
    """List every file under ``out_dir`` with size and SHA-256.

    The wall-clock timestamp lives only under ``metadata`` so the file list
    itself is reproducible.
    """
    out_dir = Path(out_dir)
    files = sorted(p for p in out_dir.rglob("*") if p.is_file() and p.name != INDEX_NAME)
    entries = [
        {"path": p.relative_to(out_dir).as_posix(), "bytes": p.stat().st_size, "sha256": sha256(p)} for p in files
    ]
    ts = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    doc = {"version": 1, "metadata": {"generated": ts}, "files": entries}
    path = out_dir / INDEX_NAME
    path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return path


def verify_index(out_dir: str | os.PathLike) -> list[str]:
    """Paths whose checksum no longer matches the index (empty when all verify)."""
    out_dir = Path(out_dir)
    doc = json.loads((out_dir / INDEX_NAME).read_text(encoding="utf-8"))
    bad = []
    for e in doc["files"]:
        p = out_dir / e["path"]
        if not p.is_file() or sha256(p) != e["sha256"]:
            bad.append(e["path"])
    return bad
