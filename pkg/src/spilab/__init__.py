"""spilab: single-pixel imaging simulation and reconstruction.

Learns a convolutional sparse coding dictionary from natural images and
reconstructs scenes from compressive bucket-detector measurements by
combining a global sparsity prior (TV or DCT) with the learned local
prior, solved with ADMM.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
