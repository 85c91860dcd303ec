"""Synthetic single-pixel camera.

Generates illumination patterns, computes bucket measurements as inner
products with the scene, injects Gaussian measurement noise at a target
SNR, and models multi-sampling averaging. Everything stochastic flows
from explicit integer seeds through numpy's PCG64 generator, so patterns
and noise regenerate bit-identically from metadata and measurement files
only need to store seeds, never the pattern matrix.

Signal power convention: SNR is defined on the measurement vector as
mean(values^2) of the clean measurement over the noise variance.
"""

import json
import struct
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .imageio import validate_image

PATTERN_KINDS = ("bernoulli01", "rademacher", "gaussian")
_KIND_CODES = {"bernoulli01": 0, "rademacher": 1, "gaussian": 2}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}
RNG_NAME = "numpy-pcg64"

_SPIM_MAGIC = b"SPIM"
_SPIM_VERSION = 1


@dataclass
class PatternSet:
    """M illumination patterns; ``rows`` has shape (M, H*W)."""

    kind: str
    count: int
    height: int
    width: int
    seed: int
    rows: np.ndarray = field(repr=False)

    @property
    def compression_ratio(self):
        return self.count / float(self.height * self.width)


@dataclass
class Measurement:
    """Bucket readings plus the metadata needed to replay them.

    ``snr_db`` is None for noiseless measurements. ``samplings`` is the
    number of independent noisy samplings averaged into ``values``.
    """

    values: np.ndarray = field(repr=False)
    pattern_kind: str = "bernoulli01"
    pattern_count: int = 0
    height: int = 0
    width: int = 0
    pattern_seed: int = 0
    snr_db: Optional[float] = None
    noise_seed: Optional[int] = None
    samplings: int = 1
    rng: str = RNG_NAME

    def noise_meta(self):
        return {"snr_db": self.snr_db, "noise_seed": self.noise_seed,
                "samplings": self.samplings, "rng": self.rng}


def pattern_count_for_cr(cr, height, width):
    """Pattern count M for a compression ratio, M = round(cr * H * W)."""
    if not 0.0 < cr <= 1.0:
        raise ValueError("compression ratio must be in (0, 1], got %r" % (cr,))
    return max(1, int(round(cr * height * width)))


def gen_patterns(count, height, width, kind="bernoulli01", seed=0):
    """Generate a deterministic PatternSet.

    bernoulli01: i.i.d. {0,1} with p=0.5 (binary DMD model, the default);
    rademacher: i.i.d. {-1,+1}; gaussian: i.i.d. N(0,1).
    """
    if count < 1 or height < 1 or width < 1:
        raise ValueError("pattern count and dimensions must be positive")
    if kind not in PATTERN_KINDS:
        raise ValueError("unknown pattern kind %r (choose from %s)"
                         % (kind, ", ".join(PATTERN_KINDS)))
    if not 0 <= int(seed) < 2 ** 64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    rng = np.random.default_rng(int(seed))
    n = height * width
    if kind == "bernoulli01":
        rows = rng.integers(0, 2, size=(count, n)).astype(np.float64)
    elif kind == "rademacher":
        rows = 2.0 * rng.integers(0, 2, size=(count, n)).astype(np.float64) - 1.0
    else:
        rows = rng.standard_normal((count, n))
    rows.flags.writeable = False
    return PatternSet(kind=kind, count=count, height=height, width=width,
                      seed=int(seed), rows=rows)


def regenerate_patterns(measurement):
    """Rebuild the PatternSet a measurement was taken with (bit-identical)."""
    return gen_patterns(measurement.pattern_count, measurement.height,
                        measurement.width, measurement.pattern_kind,
                        measurement.pattern_seed)


def measure(image, patterns):
    """Noiseless bucket values: values[i] = <row_i, vec(image)>."""
    arr = validate_image(image)
    if arr.shape != (patterns.height, patterns.width):
        raise ValueError("image shape %r does not match pattern dimensions %r"
                         % (arr.shape, (patterns.height, patterns.width)))
    values = patterns.rows @ arr.ravel()
    return Measurement(values=values, pattern_kind=patterns.kind,
                       pattern_count=patterns.count, height=patterns.height,
                       width=patterns.width, pattern_seed=patterns.seed)


def add_noise(measurement, snr_db, noise_seed):
    """Additive white Gaussian noise at the target SNR.

    Noise variance is mean(values^2) / 10^(snr_db/10), with values taken
    from the input measurement (apply to clean measurements).
    """
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    values = np.asarray(measurement.values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot add noise to an empty measurement")
    variance = float(np.mean(values ** 2)) / 10.0 ** (snr_db / 10.0)
    rng = np.random.default_rng(int(noise_seed))
    noisy = values + rng.normal(0.0, np.sqrt(variance), size=values.shape)
    noisy.flags.writeable = False
    return replace(measurement, values=noisy, snr_db=float(snr_db),
                   noise_seed=int(noise_seed), samplings=1)


def average_samplings(image, patterns, snr_db, n, seed):
    """Mean of n independent noisy samplings of the same scene.

    Effective SNR improves by 10*log10(n) dB over a single sampling.
    Per-sampling noise seeds are derived deterministically from ``seed``.
    """
    if n < 1:
        raise ValueError("sampling count must be >= 1, got %r" % (n,))
    clean = measure(image, patterns)
    draw_seeds = np.random.SeedSequence(int(seed)).generate_state(n, dtype=np.uint64)
    acc = np.zeros_like(clean.values)
    for i in range(n):
        acc += add_noise(clean, snr_db, int(draw_seeds[i])).values
    acc /= n
    acc.flags.writeable = False
    return replace(clean, values=acc, snr_db=float(snr_db),
                   noise_seed=int(seed), samplings=int(n))


def save_measurement(measurement, path):
    """Write the little-endian SPIM container (values + seeds, no patterns)."""
    values = np.asarray(measurement.values, dtype=np.float64)
    header = _SPIM_MAGIC + struct.pack(
        "<IIIIBQ", _SPIM_VERSION, measurement.pattern_count,
        measurement.height, measurement.width,
        _KIND_CODES[measurement.pattern_kind], measurement.pattern_seed)
    trailer = json.dumps(measurement.noise_meta(), sort_keys=True).encode("utf-8")
    with open(str(path), "wb") as fh:
        fh.write(header)
        fh.write(values.astype("<f8").tobytes())
        fh.write(trailer)


def load_measurement(path):
    """Read a SPIM container written by save_measurement."""
    with open(str(path), "rb") as fh:
        data = fh.read()
    if data[:4] != _SPIM_MAGIC:
        raise ValueError("not a SPIM file: %r" % (str(path),))
    header_size = struct.calcsize("<IIIIBQ")
    version, count, height, width, kind_code, pattern_seed = struct.unpack(
        "<IIIIBQ", data[4:4 + header_size])
    if version != _SPIM_VERSION:
        raise ValueError("unsupported SPIM version %d" % version)
    if kind_code not in _CODE_KINDS:
        raise ValueError("unknown SPIM pattern kind code %d" % kind_code)
    offset = 4 + header_size
    values = np.frombuffer(data[offset:offset + 8 * count], dtype="<f8").copy()
    if values.size != count:
        raise ValueError("truncated SPIM value block in %r" % (str(path),))
    meta = json.loads(data[offset + 8 * count:].decode("utf-8"))
    values.flags.writeable = False
    return Measurement(values=values, pattern_kind=_CODE_KINDS[kind_code],
                       pattern_count=count, height=height, width=width,
                       pattern_seed=pattern_seed, snr_db=meta.get("snr_db"),
                       noise_seed=meta.get("noise_seed"),
                       samplings=meta.get("samplings", 1),
                       rng=meta.get("rng", RNG_NAME))
