"""Hot numeric kernels with a compiled core and a pure-numpy fallback.

The Cython extension ``_ops`` is preferred when importable; setting the
environment variable ``SPILAB_PURE_PYTHON`` (to any non-empty value) forces
the numpy implementation. ``BACKEND`` records which one is active.

Both backends implement identical contracts and agree to floating-point
roundoff; ``benchmarks/bench_kernels.py`` compares their speed.
"""

import os

from . import _ops_py

if os.environ.get("SPILAB_PURE_PYTHON"):
    _impl = _ops_py
    BACKEND = "python"
else:
    try:
        from . import _ops as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _ops_py
        BACKEND = "python"

grad2 = _impl.grad2
div2 = _impl.div2
gram_tv = _impl.gram_tv
soft_threshold = _impl.soft_threshold

__all__ = ["BACKEND", "grad2", "div2", "gram_tv", "soft_threshold"]
