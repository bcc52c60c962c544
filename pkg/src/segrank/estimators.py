"""Estimator-style wrappers (``get_params``/``set_params``, ``fit``/``transform``).

They hold configuration as constructor parameters and expose results as
trailing-underscore attributes, so runs can be cloned, parameter-swept and
logged the same way as any scikit-learn object.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import _validation as val
from .metrics import evaluate_case
from .ranking import RankScheme, challenge_ranking, ranking_method_sweep
from .records import label_metrics_to_row
from .stats import bootstrap_ranking, significance_matrix
from .volume_io import DEFAULT_SCHEME


class SegmentationScorer(TransformerMixin, BaseEstimator):
    """Turn (team, case, reference, prediction) tuples into metrics-CSV rows.

    Stateless: ``fit`` only validates parameters.
    """

    def __init__(self, scheme=DEFAULT_SCHEME, hd_percentile=95, units="voxels", pooled_hd=False):
        self.scheme = scheme
        self.hd_percentile = hd_percentile
        self.units = units
        self.pooled_hd = pooled_hd

    def fit(self, X=None, y=None):
        val.check_percentile(self.hd_percentile)
        if self.units not in ("voxels", "mm"):
            raise ValueError(f"units must be 'voxels' or 'mm', got {self.units!r}")
        self.n_labels_ = len(self.scheme.foreground)
        return self

    def score_case(self, gt, pred):
        gt = val.check_label_volume(gt)
        pred = val.check_label_volume(pred, gt.spacing)
        val.check_same_grid(gt, pred)
        return evaluate_case(gt, pred, self.scheme, self.hd_percentile, self.units, self.pooled_hd)

    def transform(self, X):
        if not hasattr(self, "n_labels_"):
            self.fit()
        rows = []
        for team, case, gt, pred in X:
            rows.extend(label_metrics_to_row(team, case, m) for m in self.score_case(gt, pred))
        return rows


class ChallengeRanker(BaseEstimator):
    """Per-metric and combined challenge ranking of the teams in a metric table."""

    def __init__(self, order="aggregate_then_rank", aggregator="mean", tie_eps=0.0):
        self.order = order
        self.aggregator = aggregator
        self.tie_eps = tie_eps

    def _scheme(self):
        return RankScheme(self.order, self.aggregator)

    def fit(self, X, y=None):
        table = val.check_metric_table(X)
        self.ranking_ = challenge_ranking(table, self._scheme(), self.tie_eps)
        self.teams_ = table.teams
        return self

    def transform(self, X):
        """Combined ranks of ``X``'s teams (aligned with ``X.teams``) under this ranker's scheme."""
        check_is_fitted(self, "ranking_")
        table = val.check_metric_table(X)
        return challenge_ranking(table, self._scheme(), self.tie_eps).combined.ranks

    def fit_transform(self, X, y=None):
        return self.fit(X).ranking_.combined.ranks

    def sweep(self, X, target="combined"):
        return ranking_method_sweep(val.check_metric_table(X), target, self.tie_eps)


class RankingStability(BaseEstimator):
    """Bootstrap rank distributions and pairwise significance maps for a metric table."""

    def __init__(
        self,
        n_bootstrap=1000,
        random_state=0,
        alpha=0.05,
        holm_family="row",
        order="aggregate_then_rank",
        aggregator="mean",
        tie_eps=0.0,
        n_jobs=1,
    ):
        self.n_bootstrap = n_bootstrap
        self.random_state = random_state
        self.alpha = alpha
        self.holm_family = holm_family
        self.order = order
        self.aggregator = aggregator
        self.tie_eps = tie_eps
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        table = val.check_metric_table(X)
        b = val.check_positive_int(self.n_bootstrap, "n_bootstrap")
        alpha = val.check_alpha(self.alpha)
        scheme = RankScheme(self.order, self.aggregator)
        self.bootstrap_ = bootstrap_ranking(table, scheme, b, int(self.random_state), self.tie_eps, self.n_jobs)
        self.significance_ = (
            {m: significance_matrix(table, m, alpha, self.holm_family) for m in table.metrics}
            if len(table.teams) >= 2
            else {}
        )
        self.teams_ = table.teams
        return self
