"""Pure-numpy implementations of the hot stencil and prox kernels.

Same contracts as the compiled backend (``spilab._kernels._ops``); used
when the extension is unavailable or ``SPILAB_PURE_PYTHON`` is set.
"""

import numpy as np


def grad2(x):
    """Periodic forward differences: returns (gx, gy).

    gx[i, j] = x[i, (j+1) % W] - x[i, j]
    gy[i, j] = x[(i+1) % H, j] - x[i, j]
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    gx = np.roll(x, -1, axis=1) - x
    gy = np.roll(x, -1, axis=0) - x
    return gx, gy


def div2(gx, gy):
    """Adjoint of grad2: <grad2(x), (gx, gy)> == <x, div2(gx, gy)>."""
    gx = np.ascontiguousarray(gx, dtype=np.float64)
    gy = np.ascontiguousarray(gy, dtype=np.float64)
    out = np.roll(gx, 1, axis=1) - gx
    out += np.roll(gy, 1, axis=0) - gy
    return out


def gram_tv(x):
    """div2(grad2(x)) fused: the positive-semidefinite periodic 5-point stencil."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = 4.0 * x
    out -= np.roll(x, -1, axis=1)
    out -= np.roll(x, 1, axis=1)
    out -= np.roll(x, -1, axis=0)
    out -= np.roll(x, 1, axis=0)
    return out


def soft_threshold(v, tau):
    """Elementwise sign(v) * max(|v| - tau, 0) for tau >= 0."""
    if tau < 0:
        raise ValueError("soft_threshold requires tau >= 0, got %r" % (tau,))
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)
