"""Quadrature rules and bounded 1-D maximization, vectorized over pixels."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import NumericError
from .priors import EXPONENTIAL, ContinuousPart

DEFAULT_NODES = 64
GRID_POINTS = 256
ARGMAX_TOL = 1e-8

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@lru_cache(maxsize=32)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(lo: float, hi: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the ``n``-point Gauss-Legendre rule on ``[lo, hi]``."""
    x, w = _leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def exponential_breakpoints(epsilon: float, upper: float) -> np.ndarray:
    """Panel edges ``eps * (0, 1, 2, 4, 8, ...)`` clipped to ``upper``."""
    edges = [0.0]
    width = epsilon
    while edges[-1] + width < upper:
        edges.append(edges[-1] + width)
        width = edges[-1]
    edges.append(upper)
    return np.array(edges)


def density_rule(part: ContinuousPart, a_max: float, n_nodes: int = DEFAULT_NODES):
    """Nodes and density-weighted weights for one continuous prior part on ``[0, a_max]``.

    The uniform part uses a single Gauss-Legendre rule.  The exponential part
    is sharply peaked at zero when ``eps`` is small, so it is split into
    geometrically growing panels scaled by ``eps`` with a smaller rule on
    each.
    """
    end = part.support_end(a_max)
    if part.kind == EXPONENTIAL:
        edges = exponential_breakpoints(part.epsilon, end)
        per_panel = max(8, n_nodes // 4)
        rules = [gauss_legendre(lo, hi, per_panel) for lo, hi in zip(edges[:-1], edges[1:])]
        nodes = np.concatenate([r[0] for r in rules])
        weights = np.concatenate([r[1] for r in rules])
    else:
        nodes, weights = gauss_legendre(0.0, end, n_nodes)
    return nodes, weights * part.weight * part.density(nodes)


def abundance_grid(a_max: float, n: int = GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, a_max, n)


def maximize_bounded(f, a_max: float, n_pixels: int, grid_points: int = GRID_POINTS,
                     tol: float = ARGMAX_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel maximizer of ``f`` over ``[0, a_max]``.

    ``f(a)`` must accept either a scalar abundance (evaluated for every pixel)
    or an array with one abundance per pixel, and return one value per pixel.
    A coarse grid locates the best bracket (ties go to the smaller ``a``), then
    golden-section search refines it to width ``tol``.  The refined point is
    kept only if it beats the best grid point.
    """
    grid = abundance_grid(a_max, grid_points)
    values = np.empty((n_pixels, grid.size))
    for j, a in enumerate(grid):
        values[:, j] = f(a)
    if np.any(np.isnan(values)):
        bad = grid[np.nonzero(np.isnan(values).any(axis=0))[0][0]]
        raise NumericError(f"objective is not a number at a={bad!r}")
    best = np.argmax(values, axis=1)
    rows = np.arange(n_pixels)
    a_best = grid[best]
    f_best = values[rows, best]

    lo = grid[np.maximum(best - 1, 0)]
    hi = grid[np.minimum(best + 1, grid.size - 1)]
    # Iteration count fixed by the grid, never by the batch, so results do not
    # depend on how pixels are partitioned.
    width = 2.0 * (grid[1] - grid[0])
    if n_pixels and width > tol:
        n_iter = int(math.ceil(math.log(tol / width) / math.log(_INV_PHI)))
        c = hi - _INV_PHI * (hi - lo)
        d = lo + _INV_PHI * (hi - lo)
        fc, fd = f(c), f(d)
        for _ in range(n_iter):
            # Ties move left, toward the null.
            left = fc >= fd
            new_hi = np.where(left, d, hi)
            new_lo = np.where(left, lo, c)
            new_c = np.where(left, new_hi - _INV_PHI * (new_hi - new_lo), d)
            new_d = np.where(left, c, new_lo + _INV_PHI * (new_hi - new_lo))
            f_probe = f(np.where(left, new_c, new_d))
            fc, fd = np.where(left, f_probe, fd), np.where(left, fc, f_probe)
            lo, hi, c, d = new_lo, new_hi, new_c, new_d
        a_ref = 0.5 * (lo + hi)
        f_ref = f(a_ref)
        better = f_ref > f_best
        a_best = np.where(better, a_ref, a_best)
        f_best = np.where(better, f_ref, f_best)
    if not np.all(np.isfinite(f_best)):
        i = int(np.nonzero(~np.isfinite(f_best))[0][0])
        raise NumericError(f"objective is not finite at a={a_best[i]!r}")
    return a_best, f_best
