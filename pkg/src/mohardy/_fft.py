"""Linear convolution helpers on zero-extended grid arrays."""

from __future__ import annotations

import os

import numpy as np
from scipy import fft as sfft

THREADS_ENV = "MOHARDY_THREADS"


def workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def convolve_same(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """``out[i] = sum_j values[j] kernel[i - j + c]`` with ``kernel`` centred.

    ``kernel`` has odd length per axis.  Zero padding makes the product of
    transforms a linear (not circular) convolution.
    """
    full = [s + k - 1 for s, k in zip(values.shape, kernel.shape)]
    fshape = [sfft.next_fast_len(m, real=True) for m in full]
    axes = tuple(range(values.ndim))
    w = workers()
    if np.iscomplexobj(values) or np.iscomplexobj(kernel):
        out = sfft.ifftn(sfft.fftn(values, fshape, axes=axes, workers=w)
                         * sfft.fftn(kernel, fshape, axes=axes, workers=w), axes=axes, workers=w)
    else:
        out = sfft.irfftn(sfft.rfftn(values, fshape, axes=axes, workers=w)
                          * sfft.rfftn(kernel, fshape, axes=axes, workers=w), fshape, axes=axes, workers=w)
    sl = tuple(slice((k - 1) // 2, (k - 1) // 2 + s) for s, k in zip(values.shape, kernel.shape))
    return out[sl]


def offsets(radius_cells: int, n: int) -> np.ndarray:
    """Integer offsets ``[-r, r]^n`` as an array of shape ``(2r+1,)*n + (n,)``."""
    ax = np.arange(-radius_cells, radius_cells + 1)
    return np.stack(np.meshgrid(*([ax] * n), indexing="ij"), -1)
