"""Row-blocked evaluation, so a pixel's arithmetic never depends on its batch."""

from __future__ import annotations

import numpy as np

ROW_BLOCK = 64


def by_rows(fn, *arrays):
    """``fn`` applied to zero-padded blocks of exactly ``ROW_BLOCK`` rows.

    BLAS chooses kernels, and with them summation orders, by matrix shape, so
    one pixel can round differently in a batch of 1 than in a batch of 100.
    Only ever handing it blocks of a single shape keeps each row's result
    bit-identical however the pixels are partitioned.
    """
    n = arrays[0].shape[0]
    pad = (-n) % ROW_BLOCK if n else ROW_BLOCK
    if pad:
        arrays = tuple(np.concatenate([A, np.zeros((pad,) + A.shape[1:])]) for A in arrays)
    out = [fn(*(A[i:i + ROW_BLOCK] for A in arrays)) for i in range(0, n + pad, ROW_BLOCK)]
    return np.concatenate(out)[:n]
