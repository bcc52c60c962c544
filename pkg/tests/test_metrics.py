import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from oracles import (
    boundary_oracle,
    dice_oracle,
    hd_oracle,
    hd_percentile_oracle,
    squared_edt_oracle,
    vs_oracle,
)
from segrank.exceptions import BothEmpty, DimMismatch, EitherEmpty, EmptyMask, EmptyReference, SpacingMismatch, UnknownLabel
from segrank.metrics import (
    Status,
    boundary,
    directed_hausdorff,
    distance_transform,
    dsc,
    evaluate_case,
    extract_mask,
    hausdorff,
    hausdorff_percentile,
    icv_percent_difference,
    intracranial_volume,
    nearest_rank,
    squared_distance_transform,
    volume_similarity,
)
from segrank.volume_io import LabelScheme, LabelVolume

masks = hnp.arrays(np.bool_, (6, 6, 6))


def nonempty_pair(draw_shape=(6, 6, 6)):
    return st.tuples(hnp.arrays(np.bool_, draw_shape), hnp.arrays(np.bool_, draw_shape)).filter(
        lambda p: p[0].any() and p[1].any()
    )


def cube(shape, lo, hi):
    m = np.zeros(shape, bool)
    m[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]] = True
    return m


# masks

def test_extract_mask():
    zero = LabelVolume(np.zeros((4, 4, 4), np.uint8))
    assert not extract_mask(zero, 3).any()
    assert extract_mask(LabelVolume(np.full((4, 4, 4), 3, np.uint8)), 3).all()
    checker = (np.indices((4, 4, 4)).sum(axis=0) % 2 * 3).astype(np.uint8)
    assert extract_mask(LabelVolume(checker), 3).sum() == 32
    with pytest.raises(UnknownLabel):
        extract_mask(zero, 9)


# overlap metrics

def test_dsc_examples():
    a = np.zeros((3, 3, 3), bool)
    a[0, 0, :3] = True
    a[1, 0, 0] = True
    b = np.zeros((3, 3, 3), bool)
    b[0, 0, :2] = True
    assert dsc(a, a) == 1.0
    assert dsc(a, ~a) == 0.0
    assert dsc(a, b) == pytest.approx(2 * 2 / 6)
    with pytest.raises(BothEmpty):
        dsc(np.zeros((2, 2, 2), bool), np.zeros((2, 2, 2), bool))
    with pytest.raises(DimMismatch):
        dsc(a, a[:2])


def test_vs_examples():
    a = np.zeros(1000, bool)
    a[:100] = True
    b = np.zeros(1000, bool)
    b[500:550] = True
    shape = (10, 10, 10)
    a, b = a.reshape(shape), b.reshape(shape)
    assert volume_similarity(a, np.roll(a, 300)) == 1.0
    assert volume_similarity(a, b) == pytest.approx(1 - 50 / 150)
    assert volume_similarity(a, np.zeros(shape, bool)) == 0.0
    with pytest.raises(BothEmpty):
        volume_similarity(np.zeros(shape, bool), np.zeros(shape, bool))


@settings(max_examples=60, deadline=None)
@given(nonempty_pair())
def test_overlap_oracle_and_symmetry(pair):
    a, b = pair
    assert dsc(a, b) == dice_oracle(a, b) == dsc(b, a)
    assert volume_similarity(a, b) == vs_oracle(a, b) == volume_similarity(b, a)
    assert 0 <= dsc(a, b) <= 1
    assert (dsc(a, b) == 1) == bool(np.array_equal(a, b))
    assert (volume_similarity(a, b) == 1) == (a.sum() == b.sum())


# boundary

def test_boundary_examples():
    one = np.zeros((5, 5, 5), bool)
    one[2, 2, 2] = True
    assert boundary(one).tolist() == [[2, 2, 2]]
    solid = cube((5, 5, 5), (1, 1, 1), (4, 4, 4))
    pts = {tuple(p) for p in boundary(solid)}
    assert len(pts) == 26 and (2, 2, 2) not in pts
    assert len(boundary(np.ones((4, 4, 4), bool))) == 56
    with pytest.raises(EmptyMask):
        boundary(np.zeros((3, 3, 3), bool))


@settings(max_examples=60, deadline=None)
@given(masks.filter(lambda m: m.any()))
def test_boundary_matches_loop_oracle(m):
    assert np.array_equal(boundary(m), boundary_oracle(m))


# distance transform

def test_distance_transform_examples():
    dt = distance_transform(np.array([[0, 0, 0]]), (4, 4, 4))
    assert dt[3, 0, 0] == 3.0
    assert dt[1, 1, 0] == pytest.approx(math.sqrt(2), abs=1e-12)
    assert dt[0, 0, 0] == 0.0
    with pytest.raises(EmptyMask):
        distance_transform(np.zeros((0, 3), int), (4, 4, 4))


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.bool_, hnp.array_shapes(min_dims=3, max_dims=3, max_side=9)).filter(lambda m: m.any()))
def test_edt_exact_integers(src):
    d2 = squared_distance_transform(np.argwhere(src), src.shape)
    assert np.array_equal(d2, squared_edt_oracle(src))
    assert (d2[src] == 0).all()


def test_edt_anisotropic():
    src = np.zeros((5, 6, 7), bool)
    src[1, 2, 3] = src[4, 0, 6] = True
    sp = (0.5, 2.0, 1.25)
    got = squared_distance_transform(np.argwhere(src), src.shape, sp)
    grid = np.indices(src.shape).reshape(3, -1).T * sp
    pts = np.argwhere(src) * sp
    want = ((grid[:, None] - pts[None]) ** 2).sum(-1).min(1).reshape(src.shape)
    assert np.allclose(got, want, rtol=0, atol=1e-9)


# Hausdorff

def test_directed_hausdorff_examples():
    dims = (8, 2, 2)
    dt_origin = distance_transform(np.array([[0, 0, 0]]), dims)
    assert directed_hausdorff(np.array([[3, 0, 0]]), dt_origin) == 3.0
    assert directed_hausdorff(np.array([[0, 0, 0], [5, 0, 0]]), dt_origin) == 5.0
    dt_two = distance_transform(np.array([[0, 0, 0], [5, 0, 0]]), dims)
    assert directed_hausdorff(np.array([[0, 0, 0]]), dt_two) == 0.0


def test_hausdorff_examples():
    a = np.zeros((8, 8, 8), bool)
    b = a.copy()
    a[0, 0, 0] = b[3, 0, 0] = True
    assert hausdorff(a, a) == 0.0
    assert hausdorff(a, b) == 3.0
    big = cube((7, 7, 7), (0, 0, 0), (5, 5, 5))
    centre = np.zeros_like(big)
    centre[2, 2, 2] = True
    assert hausdorff(big, centre) == pytest.approx(math.sqrt(12), abs=1e-12)
    with pytest.raises(EitherEmpty):
        hausdorff(a, np.zeros_like(a))


def test_hd95_nearest_rank_example():
    # 19 MS voxels at distance 1 from NS, one at distance 10
    ms = np.zeros((40, 12, 1), bool)
    ns = np.zeros_like(ms)
    for k in range(19):
        ms[2 * k, 0, 0] = True
        ns[2 * k, 1, 0] = True
    ms[0, 11, 0] = True
    d_ms = sorted(min(math.dist(p, q) for q in np.argwhere(ns)) for p in np.argwhere(ms))
    assert d_ms == [1.0] * 19 + [10.0]
    assert nearest_rank(np.array(d_ms), 95) == 1.0
    assert hausdorff_percentile(ms, ns, 95) == 1.0
    assert hausdorff(ms, ns) == 10.0


def test_nearest_rank_index():
    v = np.arange(1, 21, dtype=float)
    assert nearest_rank(v, 95) == 19.0
    assert nearest_rank(v, 100) == 20.0
    assert nearest_rank(v, 0.1) == 1.0
    with pytest.raises(ValueError):
        hausdorff_percentile(np.ones((2, 2, 2), bool), np.ones((2, 2, 2), bool), 0)


@settings(max_examples=40, deadline=None)
@given(nonempty_pair((7, 7, 7)), st.sampled_from([50, 90, 95, 99, 100]))
def test_hausdorff_matches_all_pairs(pair, q):
    a, b = pair
    assert abs(hausdorff(a, b) - hd_oracle(a, b)) <= 1e-9
    assert abs(hausdorff_percentile(a, b, q) - hd_percentile_oracle(a, b, q)) <= 1e-9
    assert hausdorff(a, b) == hausdorff(b, a)
    assert hausdorff_percentile(a, b, 100) == hausdorff(a, b)


@settings(max_examples=30, deadline=None)
@given(nonempty_pair())
def test_hd_percentile_monotone(pair):
    a, b = pair
    vals = [hausdorff_percentile(a, b, q) for q in (10, 50, 75, 95, 100)]
    assert vals == sorted(vals)


@settings(max_examples=30, deadline=None)
@given(nonempty_pair(), st.sampled_from([0.5, 2.0, 3.0]))
def test_spacing_covariance(pair, s):
    a, b = pair
    assert hausdorff(a, b, (s, s, s)) == pytest.approx(s * hausdorff(a, b), abs=1e-9)
    assert hausdorff_percentile(a, b, 95, (s, s, s)) == pytest.approx(s * hausdorff_percentile(a, b, 95), abs=1e-9)


def test_pooled_mode():
    a = cube((10, 10, 10), (1, 1, 1), (4, 4, 4))
    b = cube((10, 10, 10), (2, 2, 2), (8, 8, 8))
    pooled = hausdorff_percentile(a, b, 95, pooled=True)
    assert pooled <= hausdorff_percentile(a, b, 95) + 1e-12


# evaluate_case

def test_evaluate_identical():
    rng = np.random.default_rng(0)
    vox = rng.integers(0, 8, (10, 10, 10)).astype(np.uint8)
    gt = LabelVolume(vox)
    for m in evaluate_case(gt, gt):
        assert (m.dsc, m.vs, m.hd, m.hd95) == (1.0, 1.0, 0.0, 0.0)
        assert m.status is Status.OK


def test_evaluate_missing_and_absent_labels():
    vox = np.zeros((12, 12, 12), np.uint8)
    vox[2:5, 2:5, 2:5] = 5
    vox[6:9, 6:9, 6:9] = 3
    pred = vox.copy()
    pred[pred == 5] = 0
    out = {m.label_code: m for m in evaluate_case(LabelVolume(vox), LabelVolume(pred))}
    assert len(out) == 7
    m5 = out[5]
    assert (m5.dsc, m5.vs, m5.hd, m5.hd95) == (0.0, 0.0, None, None)
    assert m5.status is Status.MISSING_PREDICTION and m5.gt_volume == 27 and m5.pred_volume == 0
    m1 = out[1]
    assert (m1.dsc, m1.vs, m1.hd, m1.hd95) == (None, None, None, None)
    assert m1.status is Status.NOT_APPLICABLE
    assert out[3].dsc == 1.0


def test_evaluate_matches_oracle_16cube():
    rng = np.random.default_rng(7)
    gt = np.zeros((16, 16, 16), np.uint8)
    pred = np.zeros_like(gt)
    for code in range(1, 8):
        for arr in (gt, pred):
            lo = rng.integers(0, 12, 3)
            hi = lo + rng.integers(1, 5, 3)
            arr[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]] = code
    for m in evaluate_case(LabelVolume(gt), LabelVolume(pred)):
        a, b = gt == m.label_code, pred == m.label_code
        if a.any() and b.any():
            assert m.dsc == dice_oracle(a, b)
            assert m.vs == vs_oracle(a, b)
            assert abs(m.hd - hd_oracle(a, b)) <= 1e-9
            assert abs(m.hd95 - hd_percentile_oracle(a, b)) <= 1e-9
            assert m.hd95 <= m.hd


def test_evaluate_units_mm():
    vox = np.zeros((10, 10, 10), np.uint8)
    vox[1:4, 1:4, 1:4] = 2
    pred = np.zeros_like(vox)
    pred[5:8, 1:4, 1:4] = 2
    gt_v, pr_v = LabelVolume(vox, (0.5,) * 3), LabelVolume(pred, (0.5,) * 3)
    vox_m = [m for m in evaluate_case(gt_v, pr_v) if m.label_code == 2][0]
    mm_m = [m for m in evaluate_case(gt_v, pr_v, units="mm") if m.label_code == 2][0]
    assert mm_m.hd == pytest.approx(0.5 * vox_m.hd)


def test_evaluate_grid_errors():
    a = LabelVolume(np.zeros((4, 4, 4), np.uint8))
    with pytest.raises(DimMismatch):
        evaluate_case(a, LabelVolume(np.zeros((4, 4, 5), np.uint8)))
    with pytest.raises(SpacingMismatch):
        evaluate_case(a, LabelVolume(np.zeros((4, 4, 4), np.uint8), (1, 1, 2)))


def test_custom_scheme():
    scheme = LabelScheme(((0, "bg"), (9, "thing")))
    vox = np.zeros((4, 4, 4), np.uint8)
    vox[1:3, 1:3, 1:3] = 9
    (m,) = evaluate_case(LabelVolume(vox), LabelVolume(vox), scheme)
    assert m.label_code == 9 and m.label_name == "thing" and m.dsc == 1.0


# ICV

def test_icv():
    assert intracranial_volume(LabelVolume(np.zeros((4, 4, 4), np.uint8))) == (0, 0.0)
    vox = np.zeros((10, 10, 20), np.uint8)
    vox.reshape(-1)[:1000] = 3
    assert intracranial_volume(LabelVolume(vox, (0.5,) * 3)) == (1000, 125.0)
    gt = LabelVolume(vox)
    assert icv_percent_difference(gt, gt) == 0.0
    less = vox.copy()
    less.reshape(-1)[:10] = 0
    more = vox.copy()
    more.reshape(-1)[1000:1010] = 1
    assert icv_percent_difference(gt, LabelVolume(less)) == pytest.approx(-1.0)
    assert icv_percent_difference(gt, LabelVolume(more)) == pytest.approx(1.0)
    with pytest.raises(EmptyReference):
        icv_percent_difference(LabelVolume(np.zeros((2, 2, 2), np.uint8)), gt)
