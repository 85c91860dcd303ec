"""Independent reference implementations used as test oracles.

Nothing here may call into the code paths it checks: convolutions are
direct summations, the prox oracle is a grid search, SNR is estimated
empirically from the realized noise.
"""

import numpy as np


def conv_circular_direct(grid, kernel):
    """Quadruple-loop circular convolution. Small inputs only."""
    grid = np.asarray(grid, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    h, w = grid.shape
    kh, kw = kernel.shape
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for p in range(kh):
                for q in range(kw):
                    acc += kernel[p, q] * grid[(i - p) % h, (j - q) % w]
            out[i, j] = acc
    return out


def conv_circular_roll(grid, kernel):
    """Roll-based direct circular convolution; no FFT, any size."""
    grid = np.asarray(grid, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    out = np.zeros_like(grid)
    for p in range(kernel.shape[0]):
        for q in range(kernel.shape[1]):
            out += kernel[p, q] * np.roll(grid, (p, q), axis=(0, 1))
    return out


def measure_direct(image, rows):
    """Bucket values as explicit per-pixel summations."""
    flat = np.asarray(image, dtype=float).ravel()
    values = []
    for row in rows:
        acc = 0.0
        for a, b in zip(row, flat):
            acc += a * b
        values.append(acc)
    return np.array(values)


def prox_l1_grid_search(v, tau, span=5.0, steps=200001):
    """argmin_z tau*|z| + 0.5*(z - v)^2 located by dense scalar grid search."""
    zs = np.linspace(v - span, v + span, steps)
    obj = tau * np.abs(zs) + 0.5 * (zs - v) ** 2
    return zs[int(np.argmin(obj))]


def empirical_snr_db(clean, noisy):
    """Realized SNR: 10*log10(mean(clean^2) / mean(noise^2))."""
    clean = np.asarray(clean, dtype=float)
    noise = np.asarray(noisy, dtype=float) - clean
    return 10.0 * np.log10(np.mean(clean ** 2) / np.mean(noise ** 2))


def csc_objective_direct(images, kernels, map_sets, beta):
    """Dictionary-learning objective evaluated with roll-based convolutions.

    images: list of H x W arrays; kernels: (K, m, m); map_sets: list of
    (K, H, W) arrays aligned with images.
    """
    total = 0.0
    for img, maps in zip(images, map_sets):
        recon = np.zeros_like(np.asarray(img, dtype=float))
        for k in range(len(kernels)):
            recon += conv_circular_roll(maps[k], kernels[k])
        total += 0.5 * np.sum((np.asarray(img, dtype=float) - recon) ** 2)
        total += beta * np.sum(np.abs(maps))
    return total
