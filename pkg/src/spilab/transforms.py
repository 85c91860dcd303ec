"""Linear operators for the sparsity priors.

Provides the orthonormal 2-D DCT, the periodic forward-difference gradient
and its adjoint (the TV operator pair), circular convolution realized as a
frequency-domain Hadamard product, and the l1 proximal (soft-threshold)
operator. All boundary handling is periodic, which keeps the convolution
and TV operators diagonal in frequency space.

The gradient stack layout is (2, H, W): index 0 holds horizontal
differences gx, index 1 vertical differences gy.
"""

import numpy as np
import scipy.fft

from . import _kernels


def dct2_forward(image):
    """Orthonormal type-II 2-D DCT coefficients of an H x W grid."""
    arr = _as_grid(image)
    return scipy.fft.dctn(arr, type=2, norm="ortho")


def dct2_inverse(coeffs):
    """Exact inverse of dct2_forward."""
    arr = _as_grid(coeffs)
    return scipy.fft.idctn(arr, type=2, norm="ortho")


def gradient(image):
    """Periodic forward differences, returned as a (2, H, W) stack.

    out[0][i, j] = x[i, (j+1) mod W] - x[i, j]
    out[1][i, j] = x[(i+1) mod H, j] - x[i, j]
    """
    arr = _as_grid(image)
    gx, gy = _kernels.grad2(arr)
    return np.stack([gx, gy])


def divergence(stack):
    """Adjoint of ``gradient``: <gradient(x), p> == <x, divergence(p)>.

    This is the transpose of the forward-difference operator (the negative
    of the conventional backward-difference divergence).
    """
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3 or stack.shape[0] != 2:
        raise ValueError("gradient stack must have shape (2, H, W), got %r"
                         % (stack.shape,))
    return _kernels.div2(stack[0], stack[1])


def gradient_gram(image):
    """divergence(gradient(x)) in one fused pass (periodic 5-point stencil)."""
    return _kernels.gram_tv(_as_grid(image))


def pad_kernel(kernel, shape):
    """Zero-pad a small kernel to ``shape`` with its origin at index (0, 0)."""
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 2:
        raise ValueError("kernel must be 2-D, got shape %r" % (kernel.shape,))
    h, w = shape
    if kernel.shape[0] > h or kernel.shape[1] > w:
        raise ValueError("kernel %r larger than target %r"
                         % (kernel.shape, (h, w)))
    padded = np.zeros((h, w))
    padded[:kernel.shape[0], :kernel.shape[1]] = kernel
    return padded


def conv_circular(grid, kernel):
    """Circular 2-D convolution of an H x W grid with a small kernel.

    The kernel is zero-padded to H x W (anchored at index (0, 0)), both
    operands go through a real FFT, and the product is transformed back.
    Equivalent to direct circular convolution to roundoff.
    """
    arr = _as_grid(grid)
    padded = pad_kernel(kernel, arr.shape)
    spec = scipy.fft.rfft2(arr) * scipy.fft.rfft2(padded)
    return scipy.fft.irfft2(spec, s=arr.shape)


def soft_threshold(values, tau):
    """Elementwise l1 prox: sign(v) * max(|v| - tau, 0); requires tau >= 0."""
    return _kernels.soft_threshold(values, tau)


def _as_grid(x):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D grid, got shape %r" % (arr.shape,))
    return arr
