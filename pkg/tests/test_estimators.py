import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import synthetic_table
from segrank.estimators import ChallengeRanker, RankingStability, SegmentationScorer
from segrank.ranking import challenge_ranking
from segrank.records import load_metric_table, write_metrics_csv
from segrank.volume_io import LabelVolume, write_nifti


def test_get_set_params_and_clone():
    r = ChallengeRanker(order="rank_then_aggregate", aggregator="median", tie_eps=1e-9)
    assert r.get_params() == {"order": "rank_then_aggregate", "aggregator": "median", "tie_eps": 1e-9}
    c = clone(r).set_params(aggregator="mean")
    assert c.aggregator == "mean" and r.aggregator == "median"
    assert set(RankingStability().get_params()) >= {"n_bootstrap", "random_state", "alpha", "n_jobs"}


def test_ranker_matches_function(small_table):
    r = ChallengeRanker().fit(small_table)
    assert np.array_equal(r.ranking_.combined.ranks, challenge_ranking(small_table).combined.ranks)
    assert np.array_equal(r.transform(small_table), r.fit_transform(small_table))
    assert len(r.sweep(small_table)) == 4


def test_ranker_accepts_records(small_table):
    from_records = ChallengeRanker().fit(small_table.records())
    assert from_records.teams_ == small_table.teams
    with pytest.raises(NotFittedError):
        ChallengeRanker().transform(small_table)


def test_scorer_on_arrays_and_paths(tmp_path):
    gt = np.zeros((8, 8, 8), np.uint8)
    gt[2:6, 2:6, 2:6] = 3
    write_nifti(LabelVolume(gt), tmp_path / "gt.nii.gz")
    rows = SegmentationScorer().fit().transform([("T", "c1", tmp_path / "gt.nii.gz", gt)])
    assert len(rows) == 7
    wm = [r for r in rows if int(r["label_code"]) == 3][0]
    assert float(wm["dsc"]) == 1.0
    write_metrics_csv(rows, tmp_path / "m.csv")
    assert load_metric_table(tmp_path / "m.csv").teams == ("T",)
    with pytest.raises(ValueError):
        SegmentationScorer(hd_percentile=0).fit()
    with pytest.raises(ValueError):
        SegmentationScorer(units="inches").fit()


def test_stability_estimator():
    t = synthetic_table(4, 10, 2, seed=5)
    est = RankingStability(n_bootstrap=30, random_state=3).fit(t)
    assert set(est.bootstrap_) == {"DSC", "HD95", "VS", "combined"}
    assert set(est.significance_) == {"DSC", "HD95", "VS"}
    again = clone(est).fit(t)
    assert est.bootstrap_["combined"].to_json() == again.bootstrap_["combined"].to_json()
    with pytest.raises(ValueError):
        RankingStability(n_bootstrap=0).fit(t)
    with pytest.raises(ValueError):
        RankingStability(alpha=1.5).fit(t)
