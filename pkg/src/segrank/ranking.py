"""Challenge-style rankings: worst-value substitution, aggregation, competition ranks.

The default pipeline, per metric: replace missing results by the worst value,
average every (case, label) value per team, rank the averages (ties share the
smallest rank, the following rank is skipped), then rank teams by the mean of
their per-metric ranks.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .exceptions import AllMissing, EmptyRecords, EmptySubset, TeamSetMismatch, UnknownLabel
from .records import HIGHER_BETTER, METRICS, MetricTable

AGGREGATE_THEN_RANK = "aggregate_then_rank"
RANK_THEN_AGGREGATE = "rank_then_aggregate"


@dataclass(frozen=True)
class RankScheme:
    order: str = AGGREGATE_THEN_RANK
    aggregator: str = "mean"

    def __post_init__(self):
        if self.order not in (AGGREGATE_THEN_RANK, RANK_THEN_AGGREGATE):
            raise ValueError(f"unknown ranking order {self.order!r}")
        if self.aggregator not in ("mean", "median"):
            raise ValueError(f"unknown aggregator {self.aggregator!r}")

    @property
    def name(self) -> str:
        if self.order == AGGREGATE_THEN_RANK:
            return f"{self.aggregator}-then-rank"
        return f"rank-then-{self.aggregator}"

    @classmethod
    def parse(cls, text: str) -> "RankScheme":
        """Parse ``mean-then-rank``, ``rank-then-median`` and the like."""
        for scheme in ALL_SCHEMES:
            if scheme.name == text:
                return scheme
        raise ValueError(f"unknown rank scheme {text!r}; choose from {[s.name for s in ALL_SCHEMES]}")


CHALLENGE_SCHEME = RankScheme()
ALL_SCHEMES = (
    RankScheme(AGGREGATE_THEN_RANK, "mean"),
    RankScheme(AGGREGATE_THEN_RANK, "median"),
    RankScheme(RANK_THEN_AGGREGATE, "mean"),
    RankScheme(RANK_THEN_AGGREGATE, "median"),
)


@dataclass(frozen=True, eq=False)
class RankingTable:
    """Per-team aggregate and rank for one metric (or the combined ranking)."""

    teams: tuple[str, ...]
    values: np.ndarray
    ranks: np.ndarray
    name: str = "combined"
    subset: str = "all"
    higher_better: bool = False
    meta: dict = field(default_factory=dict)

    def rank_of(self) -> dict[str, int]:
        return {t: int(r) for t, r in zip(self.teams, self.ranks)}

    def value_of(self) -> dict[str, float]:
        return {t: float(v) for t, v in zip(self.teams, self.values)}

    def rows(self) -> list[tuple[str, float, int]]:
        """Rows ordered best first; equal ranks are ordered by team name."""
        order = sorted(range(len(self.teams)), key=lambda i: (self.ranks[i], self.teams[i]))
        return [(self.teams[i], float(self.values[i]), int(self.ranks[i])) for i in order]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "subset": self.subset,
            "higher_better": self.higher_better,
            **self.meta,
            "rows": [{"team": t, "aggregate": v, "rank": r} for t, v, r in self.rows()],
        }

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["team", "aggregate", "rank"])
            for t, v, r in self.rows():
                w.writerow([t, repr(v), r])

    def write_json(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def competition_rank(values: Sequence[float], higher_better: bool = True, eps: float = 0.0, names=None) -> np.ndarray:
    """Competition ("min") ranks: 1, 2, 2, 4, ...

    Values within ``eps`` of the first value of a tie group share its rank.
    ``names`` only fixes the order of iteration, never a rank.
    """
    v = np.asarray(values, dtype=float)
    if np.isnan(v).any():
        raise ValueError("cannot rank NaN aggregates")
    n = len(v)
    names = list(names) if names is not None else list(range(n))
    key = -v if higher_better else v
    order = sorted(range(n), key=lambda i: (key[i], names[i]))
    ranks = np.empty(n, dtype=np.int64)
    group_start = None
    for pos, i in enumerate(order):
        if group_start is not None and abs(key[i] - key[group_start]) <= eps:
            ranks[i] = ranks[group_start]
        else:
            ranks[i] = pos + 1
            group_start = i
    return ranks


def _worst_hd(values: np.ndarray, missing: np.ndarray) -> np.ndarray:
    """Per-team replacement: twice the largest present value among the other teams."""
    present = np.where(missing, np.nan, values)
    with np.errstate(all="ignore"):
        per_team = np.array([np.nanmax(p) if np.isfinite(p).any() else -np.inf for p in present])
    if not np.isfinite(per_team).any():
        raise AllMissing("no present HD95 value to derive the worst-value substitute from")
    overall = per_team.max()
    out = np.empty(len(per_team))
    for t in range(len(per_team)):
        others = np.delete(per_team, t)
        best_other = others.max() if others.size else -np.inf
        out[t] = 2.0 * (best_other if np.isfinite(best_other) else overall)
    return out


def substitute_missing(table: MetricTable) -> MetricTable:
    """Replace missing results by the worst value for their metric.

    DSC and VS become 0.  A missing HD95 becomes twice the largest HD95 any
    other team achieved anywhere in ``table``.  Present values are untouched.
    """
    if not table.missing.any():
        return table
    values = table.values.copy()
    for m_i, metric in enumerate(table.metrics):
        miss = table.missing[m_i]
        if not miss.any():
            continue
        if HIGHER_BETTER[metric]:
            values[m_i][miss] = 0.0
        else:
            fill = _worst_hd(values[m_i], miss)
            values[m_i] = np.where(miss, fill[:, None, None], values[m_i])
    return table._replace(values=values, missing=np.zeros_like(table.missing))


def _aggregate(x: np.ndarray, aggregator: str) -> np.ndarray:
    """Aggregate the trailing axes of ``(team, ...)``, skipping NaN cells."""
    flat = x.reshape(x.shape[0], -1)
    if not np.isfinite(flat).any(axis=1).all():
        raise EmptyRecords("a team has no applicable values to aggregate")
    return np.nanmean(flat, axis=1) if aggregator == "mean" else np.nanmedian(flat, axis=1)


def aggregate_metric(table: MetricTable, metric: str, scheme: RankScheme = CHALLENGE_SCHEME) -> np.ndarray:
    """One aggregate per team (aligned with ``table.teams``).

    Aggregate-then-rank pools every (case, label) value.  Rank-then-aggregate
    first ranks teams within each (case, label) cell, so its aggregates are
    ranks and lower is always better.
    """
    if table.values.size == 0:
        raise EmptyRecords("empty metric table")
    m_i = table.metric_index(metric)
    if table.missing[m_i].any():
        raise ValueError("substitute missing values before aggregating")
    x = table.values[m_i]
    if scheme.order == AGGREGATE_THEN_RANK:
        return _aggregate(x, scheme.aggregator)
    cells = x.reshape(x.shape[0], -1)
    applicable = np.isfinite(cells).all(axis=0)
    key = -cells[:, applicable] if HIGHER_BETTER[metric] else cells[:, applicable]
    ranks = rankdata(key, method="min", axis=0) if key.size else key
    return _aggregate(ranks, scheme.aggregator)


def aggregate_higher_better(metric: str, scheme: RankScheme = CHALLENGE_SCHEME) -> bool:
    return HIGHER_BETTER[metric] if scheme.order == AGGREGATE_THEN_RANK else False


def rank_values(
    values: Mapping[str, float] | Sequence[float],
    higher_better: bool,
    teams: Sequence[str] | None = None,
    eps: float = 0.0,
    name: str = "metric",
    subset: str = "all",
) -> RankingTable:
    if isinstance(values, Mapping):
        teams, values = tuple(values), [values[t] for t in values]
    elif teams is None:
        teams = tuple(str(i) for i in range(len(values)))
    if len(teams) == 0:
        raise EmptyRecords("nothing to rank")
    v = np.asarray(values, dtype=float)
    ranks = competition_rank(v, higher_better, eps, names=teams)
    return RankingTable(tuple(teams), v, ranks, name, subset, higher_better)


def combined_ranking(tables: Sequence[RankingTable], eps: float = 0.0) -> RankingTable:
    """Rank teams by the mean of their per-metric ranks (lower is better)."""
    if not tables:
        raise EmptyRecords("no per-metric rankings to combine")
    teams = tables[0].teams
    team_set = set(teams)
    rank_sum = np.zeros(len(teams))
    for t in tables:
        if set(t.teams) != team_set or len(t.teams) != len(teams):
            raise TeamSetMismatch(f"ranking {t.name!r} covers a different team set")
        lookup = t.rank_of()
        rank_sum += [lookup[x] for x in teams]
    mean_rank = rank_sum / len(tables)
    ranks = competition_rank(mean_rank, higher_better=False, eps=eps, names=teams)
    return RankingTable(teams, mean_rank, ranks, "combined", tables[0].subset, False)


@dataclass(frozen=True, eq=False)
class ChallengeRanking:
    per_metric: dict[str, RankingTable]
    combined: RankingTable

    def table(self, target: str) -> RankingTable:
        return self.combined if target == "combined" else self.per_metric[target]


def challenge_ranking(
    table: MetricTable,
    scheme: RankScheme = CHALLENGE_SCHEME,
    eps: float = 0.0,
    subset: str = "all",
) -> ChallengeRanking:
    """Full pipeline: substitute, aggregate and rank each metric, then combine."""
    if len(table.teams) == 0 or len(table.cases) == 0:
        raise EmptyRecords("metric table has no teams or no cases")
    table = substitute_missing(table)
    per_metric = {}
    for metric in table.metrics:
        agg = aggregate_metric(table, metric, scheme)
        per_metric[metric] = rank_values(
            agg, aggregate_higher_better(metric, scheme), table.teams, eps, name=metric, subset=subset
        )
    combined = combined_ranking(list(per_metric.values()), eps)
    combined = RankingTable(combined.teams, combined.values, combined.ranks, "combined", subset, False)
    return ChallengeRanking(per_metric, combined)


def per_label_ranking(table: MetricTable, label_code: int, scheme: RankScheme = CHALLENGE_SCHEME, eps: float = 0.0) -> ChallengeRanking:
    if int(label_code) not in table.labels:
        raise UnknownLabel(f"label {label_code} has no records")
    return challenge_ranking(table.select(labels=[label_code]), scheme, eps, subset=f"label={label_code}")


def subset_ranking(
    table: MetricTable, case_ids, scheme: RankScheme = CHALLENGE_SCHEME, eps: float = 0.0, subset: str = "subset"
) -> ChallengeRanking:
    sub = table.select(cases=set(case_ids))
    if len(sub.cases) == 0:
        raise EmptySubset(f"subset {subset!r} selects no cases")
    return challenge_ranking(sub, scheme, eps, subset=subset)


def ranking_method_sweep(table: MetricTable, target: str = "combined", eps: float = 0.0) -> dict[str, RankingTable]:
    """The ``target`` ranking under each aggregation/order variant, keyed by scheme name."""
    if target != "combined" and target not in METRICS:
        raise ValueError(f"unknown ranking target {target!r}")
    return {s.name: challenge_ranking(table, s, eps).table(target) for s in ALL_SCHEMES}


def rank_matrix(rankings: Mapping[str, RankingTable]) -> tuple[list[str], list[str], np.ndarray]:
    """Team x column rank matrix, e.g. one column per subset."""
    columns = list(rankings)
    teams = sorted({t for r in rankings.values() for t in r.teams})
    mat = np.zeros((len(teams), len(columns)), dtype=np.int64)
    for j, col in enumerate(columns):
        lookup = rankings[col].rank_of()
        for i, t in enumerate(teams):
            mat[i, j] = lookup.get(t, 0)
    return teams, columns, mat


def write_rank_matrix(rankings: Mapping[str, RankingTable], path: str | os.PathLike) -> None:
    teams, columns, mat = rank_matrix(rankings)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["team", *columns])
        for t, row in zip(teams, mat):
            w.writerow([t, *[int(x) if x else "NA" for x in row]])
