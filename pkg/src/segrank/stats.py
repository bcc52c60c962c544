"""Statistics behind the stability and agreement analyses.

Covers case-level bootstrap of rankings, Kendall's tau-b, the one-sided
Wilcoxon signed-rank test with Holm adjustment, pairwise significance maps,
Gwet's AC1/AC2 agreement coefficients, ordinal medians and the two-sample
Kolmogorov-Smirnov test.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special
from scipy.stats import norm, rankdata

from .exceptions import DegenerateCategories, EmptySample, NoCases
from .records import HIGHER_BETTER, MetricTable
from .ranking import CHALLENGE_SCHEME, RankScheme, challenge_ranking, substitute_missing

QUALITY_LEVELS = ("Poor", "Good", "Excellent")


# Kendall's tau

def kendall_tau(rank_a: Sequence[float], rank_b: Sequence[float]) -> float:
    """Tau-b between two rankings of the same items; NaN when undefined."""
    a = np.asarray(rank_a, dtype=float)
    b = np.asarray(rank_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("rankings must cover the same items")
    n = len(a)
    if n < 2:
        return float("nan")
    iu = np.triu_indices(n, k=1)
    sa = np.sign(a[:, None] - a[None, :])[iu]
    sb = np.sign(b[:, None] - b[None, :])[iu]
    prod = sa * sb
    concordant = np.count_nonzero(prod > 0)
    discordant = np.count_nonzero(prod < 0)
    # pairs tied in exactly one ranking
    ties_a = np.count_nonzero((sa == 0) & (sb != 0))
    ties_b = np.count_nonzero((sb == 0) & (sa != 0))
    denom = math.sqrt((concordant + discordant + ties_a) * (concordant + discordant + ties_b))
    if denom == 0:
        return float("nan")
    return (concordant - discordant) / denom


# Wilcoxon signed rank

def _exact_upper_tail(doubled_ranks: np.ndarray, observed: int) -> float:
    """P(sum of a random subset of ``doubled_ranks`` >= ``observed``), all subsets equally likely."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled_ranks:
        r = int(r)
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    return float(counts[observed:].sum() / counts.sum())


def wilcoxon_one_sided(
    x: Sequence[float],
    y: Sequence[float],
    higher_better: bool = True,
    zero_method: str = "wilcox",
    exact_max_n: int = 12,
) -> float:
    """p-value for "x is superior to y" from paired samples.

    Differences are oriented so that positive favours ``x``.  Zero
    differences are dropped (``zero_method="wilcox"``) or kept for ranking
    only (``"pratt"``).  Absolute differences get midranks.  The null
    distribution is enumerated exactly when at most ``exact_max_n`` non-zero
    differences remain, otherwise a normal approximation with tie-corrected
    variance and continuity correction is used.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be paired 1D samples of equal length")
    if len(x) == 0:
        raise EmptySample("no paired observations")
    d = x - y if higher_better else y - x
    if zero_method == "wilcox":
        d = d[d != 0]
        ranks = rankdata(np.abs(d))
    elif zero_method == "pratt":
        ranks = rankdata(np.abs(d))
        keep = d != 0
        d, ranks = d[keep], ranks[keep]
    else:
        raise ValueError(f"unknown zero_method {zero_method!r}")
    n = len(d)
    if n == 0:
        return 1.0
    w_plus = ranks[d > 0].sum()
    if n <= exact_max_n:
        doubled = np.rint(2 * ranks).astype(np.int64)
        return _exact_upper_tail(doubled, int(round(2 * w_plus)))
    mean = ranks.sum() / 2.0
    var = (ranks**2).sum() / 4.0
    z = (w_plus - mean - 0.5) / math.sqrt(var)
    return float(min(1.0, norm.sf(z)))


def holm_adjust(p: Sequence[float]) -> np.ndarray:
    """Holm step-down adjusted p-values, returned in input order."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    scaled = p[order] * (m - np.arange(m))
    adjusted = np.minimum(np.maximum.accumulate(scaled), 1.0)
    out = np.empty(m)
    out[order] = adjusted
    return out


@dataclass(frozen=True, eq=False)
class SignificanceMatrix:
    """``superior[i, j]``: team i is significantly better than team j."""

    teams: tuple[str, ...]
    raw_p: np.ndarray
    adjusted_p: np.ndarray
    superior: np.ndarray
    alpha: float
    metric: str

    def write_csv(self, path: str | os.PathLike, boolean: bool = False) -> None:
        """Rows are the inferior team, columns the superior one."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["inferior\\superior", *self.teams])
            for j, tj in enumerate(self.teams):
                row = []
                for i in range(len(self.teams)):
                    if i == j:
                        row.append("NA")
                    elif boolean:
                        row.append(int(self.superior[i, j]))
                    else:
                        row.append(repr(float(self.adjusted_p[i, j])))
                w.writerow([tj, *row])


def per_case_scores(table: MetricTable, metric: str) -> tuple[np.ndarray, tuple[str, ...]]:
    """Team x case matrix of label-averaged values after worst-value substitution."""
    table = substitute_missing(table)
    x = table.values[table.metric_index(metric)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN cases are dropped below
        scores = np.nanmean(x, axis=2)
    keep = np.isfinite(scores).all(axis=0)
    return scores[:, keep], tuple(c for c, k in zip(table.cases, keep) if k)


def significance_matrix(
    table: MetricTable,
    metric: str,
    alpha: float = 0.05,
    family: str = "row",
    zero_method: str = "wilcox",
    exact_max_n: int = 12,
) -> SignificanceMatrix:
    """Pairwise one-sided Wilcoxon tests on per-case scores with Holm adjustment.

    ``family="row"`` adjusts the n-1 tests of each team against the others
    separately; ``family="pooled"`` adjusts all n(n-1) tests together.
    """
    scores, cases = per_case_scores(table, metric)
    if len(cases) == 0:
        raise NoCases("no case has scores for every team")
    hb = HIGHER_BETTER[metric]
    n = len(table.teams)
    raw = np.full((n, n), np.nan)
    for i in range(n):
        for j in range(n):
            if i != j:
                raw[i, j] = wilcoxon_one_sided(scores[i], scores[j], hb, zero_method, exact_max_n)
    adjusted = np.full((n, n), np.nan)
    off = ~np.eye(n, dtype=bool)
    if family == "row":
        for i in range(n):
            adjusted[i, off[i]] = holm_adjust(raw[i, off[i]])
    elif family == "pooled":
        adjusted[off] = holm_adjust(raw[off])
    else:
        raise ValueError(f"unknown family {family!r}")
    superior = np.zeros((n, n), dtype=bool)
    superior[off] = adjusted[off] <= alpha
    return SignificanceMatrix(table.teams, raw, adjusted, superior, alpha, metric)


# Agreement

@dataclass(frozen=True)
class AgreementResult:
    coefficient: float
    pa: float
    pe: float
    weights: np.ndarray
    categories: tuple


def agreement_weights(q: int, kind: str = "ordinal") -> np.ndarray:
    k = np.arange(q)
    dist = np.abs(k[:, None] - k[None, :]).astype(float)
    if kind == "identity":
        return np.eye(q)
    if q < 2:
        return np.ones((q, q))
    if kind in ("ordinal", "quadratic"):
        return 1.0 - (dist / (q - 1)) ** 2
    if kind == "linear":
        return 1.0 - dist / (q - 1)
    raise ValueError(f"unknown weights {kind!r}")


def gwet_ac(ratings, categories: Sequence | None = None, weights="ordinal") -> AgreementResult:
    """Gwet's agreement coefficient for an items x raters table of category labels.

    ``weights="identity"`` gives AC1; ``"ordinal"`` (quadratic) gives AC2 with
    categories in the given order.  Missing ratings (``None``) are allowed;
    only items with two or more ratings contribute to observed agreement.
    """
    rows = [list(r) for r in ratings]
    if not rows:
        raise EmptySample("no rated items")
    if categories is None:
        categories = sorted({c for r in rows for c in r if c is not None})
    categories = tuple(categories)
    q = len(categories)
    if q < 2:
        raise DegenerateCategories("agreement needs at least two categories")
    index = {c: k for k, c in enumerate(categories)}
    counts = np.zeros((len(rows), q))
    for i, r in enumerate(rows):
        for c in r:
            if c is None:
                continue
            if c not in index:
                raise ValueError(f"rating {c!r} not among categories {categories}")
            counts[i, index[c]] += 1
    w = agreement_weights(q, weights) if isinstance(weights, str) else np.asarray(weights, dtype=float)
    if w.shape != (q, q):
        raise ValueError("weight matrix does not match the category count")

    per_item = counts.sum(axis=1)
    multi = per_item >= 2
    if not multi.any():
        raise EmptySample("no item was rated by two or more raters")
    weighted = counts @ w.T
    agree = (counts * (weighted - 1)).sum(axis=1)
    pa = float(np.mean(agree[multi] / (per_item[multi] * (per_item[multi] - 1))))
    rated = per_item > 0
    pi = (counts[rated] / per_item[rated, None]).mean(axis=0)
    pe = float(w.sum() / (q * (q - 1)) * np.sum(pi * (1 - pi)))
    if pe >= 1:
        raise DegenerateCategories("chance agreement is 1")
    return AgreementResult((pa - pe) / (1 - pe), pa, pe, w, categories)


def median_ordinal(ratings: Sequence[str], levels: Sequence[str] = QUALITY_LEVELS):
    """Median of ordinal ratings; with an even count the worse middle value wins.

    ``levels`` lists the categories from worst to best.
    """
    if len(ratings) == 0:
        raise EmptySample("no ratings")
    pos = {lvl: k for k, lvl in enumerate(levels)}
    try:
        ordered = sorted(ratings, key=lambda r: pos[r])
    except KeyError as exc:
        raise ValueError(f"unknown ordinal level {exc.args[0]!r}") from None
    n = len(ordered)
    return ordered[(n - 1) // 2]


# Kolmogorov-Smirnov

@dataclass(frozen=True)
class KsResult:
    d_statistic: float
    p_value: float
    n1: int
    n2: int
    method: str


def _ks_numerators(indicator: np.ndarray, last_of_tie: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """n1*n2*D for each row of a (perm, pooled) 0/1 membership matrix of sample one."""
    cum1 = np.cumsum(indicator, axis=-1)[..., last_of_tie]
    diff = np.abs(cum1 * n2 - (last_of_tie + 1 - cum1) * n1)
    return diff.max(axis=-1)


def ks_two_sample(a: Sequence[float], b: Sequence[float], exact_max_total: int = 16) -> KsResult:
    """Two-sided two-sample KS test.

    The p-value comes from enumerating every split of the pooled sample when
    ``n1 + n2 <= exact_max_total`` (exact, tie-aware), otherwise from the
    asymptotic Kolmogorov distribution at ``sqrt(n1*n2/(n1+n2)) * D``.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise EmptySample("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    order = np.argsort(pooled, kind="stable")
    sorted_vals = pooled[order]
    last_of_tie = np.flatnonzero(np.append(sorted_vals[1:] != sorted_vals[:-1], True))
    membership = (order < n1).astype(np.int64)
    observed = int(_ks_numerators(membership, last_of_tie, n1, n2))
    d = observed / (n1 * n2)
    n = n1 + n2
    if n <= exact_max_total:
        combos = np.array(list(itertools.combinations(range(n), n1)), dtype=np.intp)
        ind = np.zeros((len(combos), n), dtype=np.int64)
        np.put_along_axis(ind, combos, 1, axis=1)
        stats = _ks_numerators(ind, last_of_tie, n1, n2)
        return KsResult(d, float(np.mean(stats >= observed)), n1, n2, "exact")
    en = n1 * n2 / n
    return KsResult(d, float(special.kolmogorov(math.sqrt(en) * d)), n1, n2, "asymptotic")


# Bootstrap

def _targets(table: MetricTable) -> tuple[str, ...]:
    return (*table.metrics, "combined")


def _ranks_for(table: MetricTable, scheme: RankScheme, eps: float) -> np.ndarray:
    res = challenge_ranking(table, scheme, eps)
    return np.stack([res.table(t).ranks for t in _targets(table)])


def _bootstrap_chunk(table: MetricTable, scheme: RankScheme, eps: float, seed: int, indices) -> np.ndarray:
    n_cases = len(table.cases)
    out = []
    for i in indices:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(i),)))
        out.append(_ranks_for(table.take_cases(rng.integers(0, n_cases, n_cases)), scheme, eps))
    return np.stack(out)


@dataclass(frozen=True, eq=False)
class BootstrapSummary:
    target: str
    teams: tuple[str, ...]
    full_ranks: np.ndarray
    ranks: np.ndarray  # (b, team)
    b: int
    seed: int

    @property
    def frequency(self) -> np.ndarray:
        """Team x rank (1..n) relative frequencies."""
        n = len(self.teams)
        freq = np.zeros((n, n))
        for t in range(n):
            freq[t] = np.bincount(self.ranks[:, t] - 1, minlength=n)[:n]
        return freq / self.b

    @property
    def median_rank(self) -> np.ndarray:
        return np.median(self.ranks, axis=0)

    @property
    def interval_95(self) -> np.ndarray:
        return np.quantile(self.ranks, [0.025, 0.975], axis=0).T

    @property
    def taus(self) -> np.ndarray:
        return np.array([kendall_tau(self.full_ranks, r) for r in self.ranks])

    def tau_summary(self) -> dict[str, float]:
        t = self.taus
        t = t[np.isfinite(t)]
        if t.size == 0:
            return {k: float("nan") for k in ("mean", "median", "q25", "q75")}
        q25, med, q75 = np.quantile(t, [0.25, 0.5, 0.75])
        return {"mean": float(t.mean()), "median": float(med), "q25": float(q25), "q75": float(q75)}

    def to_dict(self) -> dict:
        freq = self.frequency
        interval = self.interval_95
        return {
            "target": self.target,
            "b": self.b,
            "seed": self.seed,
            "teams": list(self.teams),
            "full_rank": [int(r) for r in self.full_ranks],
            "median_rank": [float(x) for x in self.median_rank],
            "interval_95": [[float(lo), float(hi)] for lo, hi in interval],
            "frequency": [[float(x) for x in row] for row in freq],
            "taus": [float(x) for x in self.taus],
            "tau_summary": self.tau_summary(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=True) + "\n"


def bootstrap_rank_samples(
    table: MetricTable,
    scheme: RankScheme = CHALLENGE_SCHEME,
    b: int = 1000,
    seed: int = 0,
    eps: float = 0.0,
    n_jobs: int = 1,
) -> np.ndarray:
    """Ranks of every team for every target in each of ``b`` case resamples.

    Resample ``i`` draws from its own generator seeded by ``(seed, i)``, so
    the result does not depend on ``n_jobs``.  Shape ``(b, target, team)``
    with targets ordered as ``table.metrics + ("combined",)``.
    """
    if len(table.cases) == 0:
        raise NoCases("bootstrap needs at least one case")
    if b < 1:
        raise ValueError("b must be at least 1")
    if n_jobs <= 1:
        return _bootstrap_chunk(table, scheme, eps, seed, range(b))
    chunks = [c for c in np.array_split(np.arange(b), n_jobs * 4) if len(c)]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        parts = pool.map(_bootstrap_chunk, *zip(*[(table, scheme, eps, seed, c) for c in chunks]))
        return np.concatenate(list(parts))


def bootstrap_ranking(
    table: MetricTable,
    scheme: RankScheme = CHALLENGE_SCHEME,
    b: int = 1000,
    seed: int = 0,
    eps: float = 0.0,
    n_jobs: int = 1,
) -> dict[str, BootstrapSummary]:
    """Bootstrap summaries for each metric ranking and the combined ranking."""
    samples = bootstrap_rank_samples(table, scheme, b, seed, eps, n_jobs)
    full = _ranks_for(table, scheme, eps)
    return {
        target: BootstrapSummary(target, table.teams, full[k], samples[:, k, :], b, seed)
        for k, target in enumerate(_targets(table))
    }
