"""Reconstruction quality metrics and the per-run record type.

PSNR uses a fixed peak of 1.0 (images are normalized rasters), never a
per-image maximum, so values are comparable across images and sweeps.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

ALGORITHMS = ("LS", "TV", "DCT", "TV_CSC", "DCT_CSC")


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("image dimension mismatch: %r vs %r" % (a.shape, b.shape))
    return a, b


def rmse(a, b):
    """Root mean square error sqrt(mean((a - b)^2)) over all pixels."""
    a, b = _check_pair(a, b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def psnr(reference, candidate):
    """Peak signal-to-noise ratio in dB with peak fixed at 1.0.

    Returns 10*log10(1 / mse), or math.inf when the images are identical
    (mse == 0).
    """
    a, b = _check_pair(reference, candidate)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


@dataclass
class MetricsRecord:
    """One reconstruction outcome inside a benchmark sweep.

    ``snr_db`` is None for noiseless runs. ``seed`` is the derived
    measurement seed that reproduces the patterns and noise of this row.
    """

    algorithm_id: str
    compression_ratio: float
    snr_db: Optional[float]
    psnr_db: float
    rmse: float
    image_id: str
    wall_time: float
    seed: int
    rep: int = 0
    iterations: int = 0
    converged: bool = True
    dictionary_id: str = ""

    def __post_init__(self):
        if self.algorithm_id not in ALGORITHMS:
            raise ValueError("unknown algorithm_id %r" % (self.algorithm_id,))
        if not 0.0 < self.compression_ratio <= 1.0:
            raise ValueError("compression_ratio must be in (0, 1], got %r"
                             % (self.compression_ratio,))
        if self.rmse < 0.0:
            raise ValueError("rmse must be non-negative")
