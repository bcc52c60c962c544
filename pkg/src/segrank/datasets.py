"""Synthetic label maps shaped loosely like a fetal brain.

Nothing here is anatomically faithful; the volumes only need nested,
differently sized structures for all seven tissue codes so that evaluation,
ranking and timing code paths get realistic work.
"""

from __future__ import annotations

import numpy as np

from .volume_io import LabelVolume

_SHAPES = {
    # code: (centre offset as fraction of half-size, radii as fraction of half-size)
    "brain": ((0.0, 0.0, 0.05), (0.62, 0.55, 0.50)),
    "ventricle_l": ((-0.12, 0.05, 0.12), (0.07, 0.20, 0.08)),
    "ventricle_r": ((0.12, 0.05, 0.12), (0.07, 0.20, 0.08)),
    "deep_gm": ((0.0, -0.02, 0.0), (0.20, 0.14, 0.10)),
    "cerebellum": ((0.0, 0.34, -0.28), (0.25, 0.12, 0.12)),
    "brainstem": ((0.0, 0.18, -0.38), (0.08, 0.08, 0.16)),
}


def _ellipsoid(grid, centre, radii):
    x, y, z = grid
    return ((x - centre[0]) / radii[0]) ** 2 + ((y - centre[1]) / radii[1]) ** 2 + ((z - centre[2]) / radii[2]) ** 2


def make_brain(
    size: int = 256,
    spacing: tuple[float, float, float] = (0.5, 0.5, 0.5),
    jitter: float = 0.0,
    rng: np.random.Generator | int | None = None,
) -> LabelVolume:
    """Build a label map on a ``size``³ grid.

    ``jitter`` perturbs every structure's centre and radii by up to that many
    voxels, which is how synthetic "predictions" are derived from a reference.
    """
    rng = np.random.default_rng(rng)
    half = size / 2.0
    grid = tuple(g.astype(np.float32) for g in np.ogrid[:size, :size, :size])

    def params(name):
        c, r = _SHAPES[name]
        centre = np.array([half + f * half for f in c])
        radii = np.array([f * half for f in r])
        if jitter:
            centre = centre + rng.uniform(-jitter, jitter, 3)
            radii = np.maximum(radii + rng.uniform(-jitter, jitter, 3), 1.0)
        return centre, radii

    vox = np.zeros((size, size, size), dtype=np.uint8)
    c, r = params("brain")
    shell = _ellipsoid(grid, c, r)
    vox[shell <= 1.0] = 1  # eCSF rim
    rim = 1.0 - 5.0 / r.mean()
    vox[shell <= rim**2] = 2  # cortex
    vox[shell <= (rim - 4.0 / r.mean()) ** 2] = 3  # white matter
    del shell
    for name, code in (("deep_gm", 6), ("ventricle_l", 4), ("ventricle_r", 4), ("cerebellum", 5), ("brainstem", 7)):
        c, r = params(name)
        vox[_ellipsoid(grid, c, r) <= 1.0] = code
    return LabelVolume(vox, spacing)


def make_prediction(gt_seed: int, team_seed: int, size: int = 256, quality: float = 1.5) -> LabelVolume:
    """Jittered re-draw of ``make_brain``; larger ``quality`` means a worse team."""
    return make_brain(size, jitter=quality, rng=np.random.default_rng([gt_seed, team_seed]))


def make_metric_cube(n_teams: int, n_cases: int, n_labels: int = 7, seed: int = 0) -> np.ndarray:
    """Random ``(metric, team, case, label)`` values for DSC, HD95, VS with team effects."""
    rng = np.random.default_rng(seed)
    skill = np.linspace(0.0, 1.0, n_teams)[:, None, None]
    case_eff = rng.normal(0, 0.05, (1, n_cases, n_labels))
    noise = lambda: rng.normal(0, 0.04, (n_teams, n_cases, n_labels))  # noqa: E731
    d = np.clip(0.85 - 0.25 * skill + case_eff + noise(), 0, 1)
    h = np.abs(10 + 20 * skill + 60 * case_eff + 10 * noise())
    v = np.clip(0.9 - 0.1 * skill + case_eff + noise(), 0, 1)
    return np.stack([d, h, v])
