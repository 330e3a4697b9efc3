"""Collocation point sets and the discretized (root-mean-square) norm."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, ShapeError


@dataclass(frozen=True)
class SampleSet:
    """N points in a box, with the box kept for provenance."""

    points: np.ndarray   # (N, d)
    box: np.ndarray      # (d, 2) rows of (lo, hi)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]


def _as_box(box, d):
    arr = np.asarray(box, dtype=np.float64)
    if arr.ndim == 1:
        if arr.shape != (2,):
            raise ShapeError(f"box must be (lo, hi) or per-dimension pairs, got {arr.shape}")
        arr = np.tile(arr, (d, 1))
    if arr.shape != (d, 2):
        raise ShapeError(f"box must have shape ({d}, 2), got {arr.shape}")
    if np.any(arr[:, 0] >= arr[:, 1]):
        raise ShapeError(f"invalid box, lo >= hi in some dimension: {arr.tolist()}")
    return arr


def lhs_sample(n, d, box, seed):
    """Latin hypercube sample: one point per equal-width stratum per dimension.

    Within-stratum placement is uniform random; the draw order (per dimension,
    permutation then offsets) is fixed, so a given seed always produces the
    same set.
    """
    if n < 1 or d < 1:
        raise ShapeError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    bounds = _as_box(box, d)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pts = np.empty((n, d))
    for j in range(d):
        order = rng.permutation(n)
        offsets = rng.random(n)
        unit = (order + offsets) / n
        pts[:, j] = bounds[j, 0] + (bounds[j, 1] - bounds[j, 0]) * unit
    return SampleSet(pts, bounds)


def uniform_grid(n_h, d, box):
    """Interior tensor grid of n_h points per axis with spacing 1/(n_h + 1).

    Matches the finite-difference unknowns: on the unit box the coordinates
    are i*h for i = 1..n_h.  The first coordinate varies slowest in the row
    ordering, the same ordering the matrix assembly uses.
    """
    if n_h < 2:
        raise ShapeError(f"need n_h >= 2, got {n_h}")
    bounds = _as_box(box, d)
    h = 1.0 / (n_h + 1)
    unit = h * np.arange(1, n_h + 1)
    axes = [bounds[j, 0] + (bounds[j, 1] - bounds[j, 0]) * unit for j in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return SampleSet(pts, bounds)


def grid_spacing(n_h):
    """The shared h = 1/(n_h + 1) used by both the grid and the stencils."""
    return 1.0 / (n_h + 1)


def discrete_norm(values):
    """sqrt(mean(v^2)): the normalization used for all eigenfunction samples."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ShapeError("discrete_norm of an empty vector")
    return float(np.sqrt(np.mean(v * v)))


def normalize(values):
    """values / discrete_norm(values); degenerate when the norm underflows."""
    v = np.asarray(values, dtype=np.float64)
    nrm = discrete_norm(v)
    if nrm < 1e-30:
        raise DegeneracyError(f"cannot normalize: discrete norm {nrm:.3e}")
    return v / nrm


def samples_to_csv(samples, path):
    """One row per point, columns x0..x{d-1}, 17 significant digits."""
    with open(path, "w") as fh:
        fh.write(",".join(f"x{j}" for j in range(samples.d)) + "\n")
        for row in samples.points:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
