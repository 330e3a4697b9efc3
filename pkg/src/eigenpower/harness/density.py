"""Density-of-values diagnostics for visualizing high-dimensional eigenfunctions.

The density of a function u is the probability density of u(X) with X uniform
on the domain.  Comparisons evaluate both functions on the same uniform draw
and histogram them over shared bin edges, so sampling noise largely cancels
and the max-bin discrepancy reflects genuine function mismatch.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError


def _edges(values, bins):
    lo = float(np.min(values))
    hi = float(np.max(values))
    if lo == hi:
        # all values identical: center one occupied bin around the value
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, bins + 1)


def density_histogram(values, bins):
    """(edges, heights) with heights integrating to one."""
    values = np.asarray(values, dtype=np.float64)
    if bins < 2:
        raise ShapeError(f"need bins >= 2, got {bins}")
    if values.size == 0:
        raise ShapeError("density_histogram of an empty sample")
    edges = _edges(values, bins)
    heights, _ = np.histogram(values, bins=edges, density=True)
    return edges, heights


def compare_densities(predicted, exact, bins):
    """Max-bin difference of the two density histograms over shared edges.

    Both inputs must be values on the same uniform point set, normalized and
    sign-aligned by the caller.
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    if predicted.shape != exact.shape:
        raise ShapeError(
            f"sample shapes differ: {predicted.shape} vs {exact.shape}")
    edges = _edges(np.concatenate([predicted, exact]), bins)
    hp, _ = np.histogram(predicted, bins=edges, density=True)
    he, _ = np.histogram(exact, bins=edges, density=True)
    return float(np.max(np.abs(hp - he)))
