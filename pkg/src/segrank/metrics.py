"""Per-label overlap, volume and surface-distance metrics for 3D label maps.

Masks are plain boolean arrays indexed ``[x, y, z]``; surface point sets are
``(n, 3)`` integer arrays of voxel coordinates.  Hausdorff-type distances are
in voxel units unless a ``spacing`` is supplied, in which case every axis is
scaled by its spacing (millimetres for NIfTI input).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._edt import squared_edt
from .exceptions import (
    BothEmpty,
    DimMismatch,
    EitherEmpty,
    EmptyMask,
    EmptyReference,
    SpacingMismatch,
    UnknownLabel,
)
from .volume_io import DEFAULT_SCHEME, LabelScheme, LabelVolume

UNIT_SPACING = (1.0, 1.0, 1.0)


class Status(str, enum.Enum):
    """Presence pattern of one label in a (reference, prediction) pair."""

    OK = "ok"
    MISSING_PREDICTION = "missing_prediction"  # label in reference only
    NOT_APPLICABLE = "not_applicable"  # label absent from reference


@dataclass(frozen=True)
class LabelMetrics:
    label_code: int
    label_name: str
    dsc: float | None
    vs: float | None
    hd: float | None
    hd95: float | None
    gt_present: bool
    pred_present: bool
    gt_volume: int
    pred_volume: int

    @property
    def status(self) -> Status:
        if not self.gt_present:
            return Status.NOT_APPLICABLE
        if not self.pred_present:
            return Status.MISSING_PREDICTION
        return Status.OK


def _check_pair(ms: np.ndarray, ns: np.ndarray) -> None:
    if ms.shape != ns.shape:
        raise DimMismatch(f"mask shapes differ: {ms.shape} vs {ns.shape}")


def extract_mask(volume: LabelVolume, code: int, scheme: LabelScheme | None = DEFAULT_SCHEME) -> np.ndarray:
    if scheme is not None and code not in scheme:
        raise UnknownLabel(f"label code {code} not in scheme")
    return volume.voxels == code


def dsc(ms: np.ndarray, ns: np.ndarray) -> float:
    """Dice overlap ``2|MS ∩ NS| / (|MS| + |NS|)``."""
    _check_pair(ms, ns)
    a, b = int(np.count_nonzero(ms)), int(np.count_nonzero(ns))
    if a + b == 0:
        raise BothEmpty("Dice is undefined for two empty masks")
    return 2.0 * int(np.count_nonzero(ms & ns)) / (a + b)


def volume_similarity(ms: np.ndarray, ns: np.ndarray) -> float:
    _check_pair(ms, ns)
    a, b = int(np.count_nonzero(ms)), int(np.count_nonzero(ns))
    if a + b == 0:
        raise BothEmpty("volume similarity is undefined for two empty masks")
    return 1.0 - abs(a - b) / (a + b)


def _interior(mask: np.ndarray) -> np.ndarray:
    """Voxels whose six face neighbours are all set (out of grid counts as unset)."""
    inner = np.zeros_like(mask)
    core = mask[1:-1, 1:-1, 1:-1].copy()
    core &= mask[:-2, 1:-1, 1:-1]
    core &= mask[2:, 1:-1, 1:-1]
    core &= mask[1:-1, :-2, 1:-1]
    core &= mask[1:-1, 2:, 1:-1]
    core &= mask[1:-1, 1:-1, :-2]
    core &= mask[1:-1, 1:-1, 2:]
    inner[1:-1, 1:-1, 1:-1] = core
    return inner


def boundary_mask(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    return mask & ~_interior(mask)


def boundary(mask: np.ndarray) -> np.ndarray:
    """Surface voxels of ``mask`` as an ``(n, 3)`` coordinate array."""
    surf = boundary_mask(mask)
    if not surf.any():
        raise EmptyMask("boundary of an empty mask")
    return np.argwhere(surf)


def _weights(spacing) -> tuple[float, float, float]:
    sp = UNIT_SPACING if spacing is None else tuple(float(s) for s in spacing)
    return sp[0] ** 2, sp[1] ** 2, sp[2] ** 2


def squared_distance_transform(surface: np.ndarray, dims: Sequence[int], spacing=None) -> np.ndarray:
    """Squared distance to the nearest surface point; exact integers at unit spacing."""
    surface = np.asarray(surface)
    if surface.size == 0:
        raise EmptyMask("distance transform of an empty surface")
    sources = np.zeros(tuple(dims), dtype=np.bool_)
    sources[surface[:, 0], surface[:, 1], surface[:, 2]] = True
    return squared_edt(sources, *_weights(spacing))


def distance_transform(surface: np.ndarray, dims: Sequence[int], spacing=None) -> np.ndarray:
    return np.sqrt(squared_distance_transform(surface, dims, spacing))


def directed_distances(a: np.ndarray, dt_b: np.ndarray) -> np.ndarray:
    """Distance from each point of ``a`` to the set the field ``dt_b`` was built from."""
    a = np.asarray(a)
    if a.size == 0:
        raise EmptyMask("directed distance from an empty set")
    return dt_b[a[:, 0], a[:, 1], a[:, 2]]


def directed_hausdorff(a: np.ndarray, dt_b: np.ndarray) -> float:
    return float(directed_distances(a, dt_b).max())


def nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    """Nearest-rank percentile: the element at 1-based index ``ceil(q/100 * n)``."""
    n = len(sorted_values)
    k = max(1, math.ceil(Fraction(str(q)) * n / 100))
    return float(sorted_values[k - 1])


def _check_q(q: float) -> None:
    if not 0 < q <= 100:
        raise ValueError(f"percentile must lie in (0, 100], got {q}")


def _cropped(ms: np.ndarray, ns: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Restrict both masks to the bounding box of their union."""
    union = ms | ns
    slices = []
    for axis in range(3):
        other = tuple(i for i in range(3) if i != axis)
        idx = np.flatnonzero(union.any(axis=other))
        slices.append(slice(idx[0], idx[-1] + 1))
    sl = tuple(slices)
    return ms[sl], ns[sl]


def surface_distances(ms: np.ndarray, ns: np.ndarray, spacing=None) -> tuple[np.ndarray, np.ndarray]:
    """Directed boundary-to-boundary distances ``(MS -> NS, NS -> MS)``.

    Both masks must be non-empty.  Cropping to the union bounding box leaves
    every distance unchanged because all sources and queries lie inside it,
    and voxels outside the box are background in the full grid too.
    """
    ms = np.asarray(ms, dtype=bool)
    ns = np.asarray(ns, dtype=bool)
    _check_pair(ms, ns)
    if not ms.any() or not ns.any():
        raise EitherEmpty("surface distances need two non-empty masks")
    ms, ns = _cropped(ms, ns)
    w = _weights(spacing)
    sa, sb = np.ascontiguousarray(boundary_mask(ms)), np.ascontiguousarray(boundary_mask(ns))
    pa, pb = np.argwhere(sa), np.argwhere(sb)
    d_ab = np.sqrt(directed_distances(pa, squared_edt(sb, *w)))
    d_ba = np.sqrt(directed_distances(pb, squared_edt(sa, *w)))
    return d_ab, d_ba


def hausdorff(ms: np.ndarray, ns: np.ndarray, spacing=None) -> float:
    d_ab, d_ba = surface_distances(ms, ns, spacing)
    return float(max(d_ab.max(), d_ba.max()))


def _percentile_from(d_ab: np.ndarray, d_ba: np.ndarray, q: float, pooled: bool) -> float:
    if pooled:
        return nearest_rank(np.sort(np.concatenate([d_ab, d_ba])), q)
    return max(nearest_rank(np.sort(d_ab), q), nearest_rank(np.sort(d_ba), q))


def hausdorff_percentile(ms: np.ndarray, ns: np.ndarray, q: float = 95, spacing=None, pooled: bool = False) -> float:
    """Percentile Hausdorff distance.

    By default each direction's nearest-rank ``q``-th percentile is taken and
    the larger one returned.  ``pooled=True`` instead takes the percentile of
    both directions' distances concatenated.  ``q=100`` equals :func:`hausdorff`.
    """
    _check_q(q)
    d_ab, d_ba = surface_distances(ms, ns, spacing)
    return _percentile_from(d_ab, d_ba, q, pooled)


def _check_grid(gt: LabelVolume, pred: LabelVolume) -> None:
    if gt.dims != pred.dims:
        raise DimMismatch(f"grid {pred.dims} does not match reference {gt.dims}")
    if not np.allclose(gt.spacing, pred.spacing, rtol=1e-5, atol=0):
        raise SpacingMismatch(f"spacing {pred.spacing} does not match reference {gt.spacing}")


def evaluate_case(
    gt: LabelVolume,
    pred: LabelVolume,
    scheme: LabelScheme = DEFAULT_SCHEME,
    q: float = 95,
    units: str = "voxels",
    pooled: bool = False,
) -> list[LabelMetrics]:
    """Metrics for every foreground label of ``scheme``.

    A label present in the reference but not the prediction scores DSC = VS = 0
    and leaves both Hausdorff values as ``None``: the worst-value substitute
    depends on the other submissions and is applied at ranking time.  Labels
    absent from the reference are not applicable and carry no metrics.
    """
    _check_q(q)
    _check_grid(gt, pred)
    if units not in ("voxels", "mm"):
        raise ValueError(f"units must be 'voxels' or 'mm', got {units!r}")
    spacing = gt.spacing if units == "mm" else None
    results = []
    for code, name in scheme.foreground:
        ms = gt.voxels == code
        ns = pred.voxels == code
        a, b = int(np.count_nonzero(ms)), int(np.count_nonzero(ns))
        d = v = hd = hd_q = None
        if a and b:
            d, v = dsc(ms, ns), volume_similarity(ms, ns)
            d_ab, d_ba = surface_distances(ms, ns, spacing)
            hd = float(max(d_ab.max(), d_ba.max()))
            hd_q = _percentile_from(d_ab, d_ba, q, pooled)
        elif a:
            d, v = 0.0, 0.0
        results.append(LabelMetrics(code, name, d, v, hd, hd_q, a > 0, b > 0, a, b))
    return results


def intracranial_volume(volume: LabelVolume, scheme: LabelScheme = DEFAULT_SCHEME) -> tuple[int, float]:
    """Non-background voxel count and the matching volume in mm³."""
    count = int(np.count_nonzero(volume.voxels != scheme.background_code))
    return count, count * float(np.prod(volume.spacing))


def icv_percent_difference(gt: LabelVolume, pred: LabelVolume, scheme: LabelScheme = DEFAULT_SCHEME) -> float:
    ref, _ = intracranial_volume(gt, scheme)
    if ref == 0:
        raise EmptyReference("reference intracranial volume is zero")
    got, _ = intracranial_volume(pred, scheme)
    return 100.0 * (got - ref) / ref
