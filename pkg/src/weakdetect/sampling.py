"""Seeded random streams and synthetic pixel draws.

Streams come from numpy's ``SeedSequence`` feeding a ``PCG64`` generator.  A
master seed is split into independent substreams keyed by fixed labels, so a
given (seed, label) pair always yields the same draws no matter which other
streams were used or in what order.
"""

from __future__ import annotations

import zlib

import numpy as np

from .errors import ConfigError
from .models import BEERS_LAW, _check_abundance, _forward

RNG_FAMILY = "numpy.random.PCG64 via SeedSequence(seed, spawn_key=labels)"
MAX_REJECTION_RATE = 0.5


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label)
    return zlib.crc32(str(label).encode("utf-8"))


def substream(seed: int, *labels) -> np.random.Generator:
    """Independent generator for ``labels`` under master ``seed``."""
    key = tuple(_label_key(lab) for lab in labels)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def draw_background(problem, rng: np.random.Generator, n: int) -> tuple[np.ndarray, int]:
    """``n`` background pixels and the number of draws rejected.

    Under Beer's law any draw with a nonpositive channel is rejected and
    redrawn.  A rejection rate above one half is treated as a configuration
    error, since the background mean should sit well inside the positive
    orthant.
    """
    bg = problem.background
    if problem.model.kind != BEERS_LAW:
        return bg.sample(rng, n), 0
    kept = []
    have = rejected = drawn = 0
    while have < n:
        batch = bg.sample(rng, max(n - have, 16))
        ok = np.all(batch > 0, axis=1)
        drawn += batch.shape[0]
        rejected += int(np.count_nonzero(~ok))
        if rejected > MAX_REJECTION_RATE * drawn:
            raise ConfigError(
                f"Beer's law background rejects {rejected}/{drawn} draws with nonpositive radiance; "
                "shift the background mean further from zero")
        good = batch[ok][: n - have]
        kept.append(good)
        have += good.shape[0]
    return np.concatenate(kept) if kept else np.empty((0, bg.dim)), rejected


def draw_targets(problem, rng: np.random.Generator, abundances) -> tuple[np.ndarray, int]:
    """One target pixel per entry of ``abundances`` (background draw, then embed)."""
    a = np.asarray(abundances, dtype=float).reshape(-1)
    _check_abundance(problem.model, a)
    Z, rejected = draw_background(problem, rng, a.size)
    return _forward(problem.model, a, Z), rejected
