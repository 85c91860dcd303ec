"""Convolutional sparse coding: dictionary learning, encoding, decoding.

The image model is x ~ sum_k d_k (*) s_k with small kernels d_k constrained
to the unit l2 ball and sparse feature maps s_k, all convolutions circular.
Learning alternates a sparse-coding step and a dictionary step, both solved
with ADMM whose least-squares subproblems are diagonalized per frequency:
the coding system is identity-plus-rank-one (Sherman-Morrison closed form),
the kernel system is a K x K Hermitian solve per frequency, batched.

Training images are mean-subtracted internally; the reconstruction side
adds a separately estimated DC component back (see spilab.solver).
"""

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.fft

from .imageio import validate_image
from ._kernels import soft_threshold

logger = logging.getLogger(__name__)

_CSCD_MAGIC = b"CSCD"
_CSCD_VERSION = 1

# fraction threshold used when reporting map sparsity
_ACTIVE_EPS = 1e-8


@dataclass
class LearnConfig:
    """Hyperparameters for learning and encoding.

    ``beta`` weighs the l1 penalty on the feature maps (1.0 trades
    sparsity against data fit well for normalized natural images).
    ``inner_iterations`` caps each ADMM subproblem solve; the loop also
    stops early once relative primal and dual residuals drop below
    ``inner_tolerance``.
    """

    beta: float = 1.0
    outer_iterations: int = 20
    admm_rho: float = 1.0
    inner_tolerance: float = 1e-5
    inner_iterations: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.beta <= 0 or self.admm_rho <= 0:
            raise ValueError("beta and admm_rho must be positive")
        if self.outer_iterations < 1 or self.inner_iterations < 1:
            raise ValueError("iteration counts must be >= 1")


@dataclass
class Dictionary:
    """K learned kernels of size m x m, each with ||d_k||_2 <= 1."""

    kernel_count: int
    kernel_size: int
    kernels: np.ndarray = field(repr=False)  # (K, m, m)
    training_meta: dict = field(default_factory=dict)

    def dict_id(self):
        """Stable content hash of the kernel values."""
        return hashlib.sha256(
            np.ascontiguousarray(self.kernels, dtype="<f8").tobytes()
        ).hexdigest()[:12]

    def validate(self):
        if self.kernels.shape != (self.kernel_count, self.kernel_size,
                                  self.kernel_size):
            raise ValueError("kernel array shape %r inconsistent with (K, m, m)"
                             % (self.kernels.shape,))
        if not np.all(np.isfinite(self.kernels)):
            raise ValueError("dictionary contains non-finite values")
        norms = np.linalg.norm(self.kernels.reshape(self.kernel_count, -1), axis=1)
        if np.any(norms > 1.0 + 1e-9):
            raise ValueError("kernel norm exceeds the unit ball: max %g"
                             % norms.max())
        return self


@dataclass
class FeatureMapSet:
    """Sparse maps for one image against one dictionary."""

    maps: np.ndarray = field(repr=False)  # (K, H, W)
    dictionary_id: str = ""
    objective: float = 0.0
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    iterations: int = 0
    converged: bool = True

    @property
    def sparsity(self):
        """Fraction of entries with magnitude above 1e-8."""
        return float(np.mean(np.abs(self.maps) > _ACTIVE_EPS))


def init_dictionary(kernel_count, kernel_size, seed):
    """Random initial kernels: i.i.d. normal, projected to the unit l2 ball."""
    if kernel_count < 1 or kernel_size < 2:
        raise ValueError("need kernel_count >= 1 and kernel_size >= 2")
    rng = np.random.default_rng(int(seed))
    kernels = rng.standard_normal((kernel_count, kernel_size, kernel_size))
    kernels = _project_unit_ball(kernels)
    meta = {"seed": int(seed), "beta": None, "iterations": 0, "corpus_ids": [],
            "rng": "numpy-pcg64"}
    return Dictionary(kernel_count=kernel_count, kernel_size=kernel_size,
                      kernels=kernels, training_meta=meta)


def decode(maps, dictionary):
    """Linear synthesis sum_k conv_circular(s_k, d_k); no clamping."""
    maps = np.asarray(maps.maps if isinstance(maps, FeatureMapSet) else maps,
                      dtype=np.float64)
    if maps.ndim != 3:
        raise ValueError("maps must have shape (K, H, W), got %r" % (maps.shape,))
    if maps.shape[0] != dictionary.kernel_count:
        raise ValueError("map count %d does not match dictionary kernel count %d"
                         % (maps.shape[0], dictionary.kernel_count))
    dhat = kernel_spectra(dictionary, maps.shape[1:])
    return synthesize(scipy.fft.rfft2(maps), dhat, maps.shape[1:])


def encode(image, dictionary, beta=None, cfg=None):
    """Sparse-code one image against a fixed dictionary.

    Approximately minimizes 0.5*||x - sum_k d_k (*) s_k||^2 + beta*sum ||s_k||_1
    by ADMM with frequency-domain least-squares solves. The returned maps are
    the exactly-sparse ADMM copy. Deterministic; safe to call concurrently
    with a shared read-only dictionary.
    """
    cfg = cfg or LearnConfig()
    beta = cfg.beta if beta is None else float(beta)
    arr = validate_image(image)
    if min(arr.shape) < dictionary.kernel_size:
        raise ValueError("image %r smaller than kernel size %d"
                         % (arr.shape, dictionary.kernel_size))
    dhat = kernel_spectra(dictionary, arr.shape)
    state = _CodingState.zeros(1, dictionary.kernel_count, arr.shape)
    result = _sparse_code_admm(arr[None], dhat, beta, cfg.admm_rho,
                               cfg.inner_iterations, cfg.inner_tolerance, state)
    recon = synthesize(scipy.fft.rfft2(state.z), dhat, arr.shape)[0]
    objective = 0.5 * float(np.sum((arr - recon) ** 2)) \
        + beta * float(np.sum(np.abs(state.z)))
    return FeatureMapSet(maps=state.z[0].copy(), dictionary_id=dictionary.dict_id(),
                         objective=objective, primal_residual=result[0],
                         dual_residual=result[1], iterations=result[2],
                         converged=result[3])


def learn(corpus, kernel_count, kernel_size, cfg=None, corpus_ids=None):
    """Learn a convolutional dictionary from a list of same-size images.

    Alternates sparse coding over the whole corpus (batched in frequency
    space) with a dictionary update whose unit-ball/support constraint is
    enforced by projection. The objective after each outer iteration is
    recorded in training_meta["objective_history"] and is non-increasing
    up to inner-solve tolerance.
    """
    cfg = cfg or LearnConfig()
    images = [validate_image(img) for img in corpus]
    if not images:
        raise ValueError("training corpus is empty")
    shape = images[0].shape
    if any(img.shape != shape for img in images):
        raise ValueError("training images must share dimensions")
    if min(shape) < kernel_size:
        raise ValueError("images %r smaller than kernel size %d"
                         % (shape, kernel_size))

    # zero-mean training data; DC is handled separately at reconstruction
    x = np.stack([img - img.mean() for img in images])
    xhat = scipy.fft.rfft2(x)

    kernels_padded = _pad_kernels(
        _init_kernels_from_patches(x, kernel_count, kernel_size, cfg.seed),
        shape)
    coding = _CodingState.zeros(len(images), kernel_count, shape)
    dual_d = np.zeros_like(kernels_padded)
    d_free = kernels_padded.copy()

    history = []
    inner_converged = []
    for outer in range(cfg.outer_iterations):
        dhat = scipy.fft.rfft2(kernels_padded)
        code_res = _sparse_code_admm(x, dhat, cfg.beta, cfg.admm_rho,
                                     cfg.inner_iterations, cfg.inner_tolerance,
                                     coding, xhat=xhat)
        d_free, kernels_padded, dual_d, dict_res = _dictionary_admm(
            xhat, coding.z, kernels_padded, d_free, dual_d, kernel_size,
            cfg.admm_rho, cfg.inner_iterations, cfg.inner_tolerance, shape)

        objective = _corpus_objective(x, xhat, coding.z, kernels_padded, cfg.beta)
        history.append(float(objective))
        inner_converged.append(bool(code_res[3] and dict_res))

        kernels_padded = _reseed_dead_kernels(
            x, coding.z, kernels_padded, kernel_size, outer)

    if not all(inner_converged):
        logger.warning("dictionary learning: %d/%d outer iterations hit the "
                       "inner iteration cap before reaching tolerance %g",
                       len(inner_converged) - sum(inner_converged),
                       len(inner_converged), cfg.inner_tolerance)

    kernels = kernels_padded[:, :kernel_size, :kernel_size].copy()
    meta = {
        "corpus_ids": list(corpus_ids) if corpus_ids is not None
        else ["image-%03d" % i for i in range(len(images))],
        "beta": cfg.beta,
        "iterations": cfg.outer_iterations,
        "admm_rho": cfg.admm_rho,
        "inner_tolerance": cfg.inner_tolerance,
        "inner_iterations": cfg.inner_iterations,
        "seed": cfg.seed,
        "image_shape": [int(shape[0]), int(shape[1])],
        "objective_history": history,
        "inner_converged": inner_converged,
        "rng": "numpy-pcg64",
    }
    return Dictionary(kernel_count=kernel_count, kernel_size=kernel_size,
                      kernels=kernels, training_meta=meta).validate()


# --------------------------------------------------------------------------
# frequency-domain machinery shared by encode/learn (and the CSC solver)

def kernel_spectra(dictionary, shape):
    """rfft2 of the kernels zero-padded to ``shape`` (origin at (0, 0))."""
    return scipy.fft.rfft2(_pad_kernels(dictionary.kernels, shape))


def synthesize(maps_hat, dhat, shape):
    """Spatial-domain sum_k d_k (*) s_k from map spectra; batched over
    leading axes: maps_hat (..., K, Hf, Wf) -> (..., H, W)."""
    return scipy.fft.irfft2(np.sum(maps_hat * dhat, axis=-3), s=shape)


def correlate(residual_hat, dhat):
    """Adjoint of synthesize: per-kernel correlation spectra
    (..., Hf, Wf) -> (..., K, Hf, Wf)."""
    return np.conj(dhat) * residual_hat[..., None, :, :]


def _pad_kernels(kernels, shape):
    k, m, _ = kernels.shape
    padded = np.zeros((k, shape[0], shape[1]))
    padded[:, :m, :m] = kernels
    return padded


def _init_kernels_from_patches(x, kernel_count, kernel_size, seed):
    """Seed the alternation from normalized training patches.

    Data-driven starting points keep the kernels aligned with structure the
    corner-support projection can retain; pure-noise starts tend to settle
    on cyclically shifted kernels that the support crop then truncates.
    The first kernel takes the strongest patch, the rest random ones.
    """
    rng = np.random.default_rng(int(seed))
    n, h, w = x.shape
    kernels = np.empty((kernel_count, kernel_size, kernel_size))
    kernels[0] = _strongest_patch(x[int(rng.integers(n))], kernel_size)
    for k in range(1, kernel_count):
        j = int(rng.integers(n))
        i0 = int(rng.integers(h - kernel_size + 1))
        j0 = int(rng.integers(w - kernel_size + 1))
        patch = x[j, i0:i0 + kernel_size, j0:j0 + kernel_size].copy()
        norm = np.linalg.norm(patch)
        if norm < 1e-12:
            patch = rng.standard_normal((kernel_size, kernel_size))
            norm = np.linalg.norm(patch)
        kernels[k] = patch / norm
    return kernels


def _project_unit_ball(kernels):
    flat = kernels.reshape(kernels.shape[0], -1)
    norms = np.linalg.norm(flat, axis=1)
    scale = np.where(norms > 1.0, 1.0 / np.maximum(norms, 1e-300), 1.0)
    return kernels * scale[:, None, None]


class _CodingState:
    """Warm-startable ADMM state for the sparse-coding subproblem."""

    def __init__(self, s, z, dual):
        self.s, self.z, self.dual = s, z, dual

    @classmethod
    def zeros(cls, n_images, kernel_count, shape):
        full = (n_images, kernel_count, shape[0], shape[1])
        return cls(np.zeros(full), np.zeros(full), np.zeros(full))


def _sparse_code_admm(x, dhat, beta, rho, max_iter, tol, state, xhat=None):
    """ADMM for min_s 0.5||x - D s||^2 + beta sum||s||_1 over a batch.

    x: (J, H, W); dhat: (K, Hf, Wf); state arrays (J, K, H, W). The
    quadratic solve is closed-form per frequency via Sherman-Morrison.
    Returns (primal_rel, dual_rel, iterations, converged).
    """
    shape = x.shape[-2:]
    if xhat is None:
        xhat = scipy.fft.rfft2(x)
    dtx_hat = correlate(xhat, dhat)               # D^T x, frequency domain
    denom = rho + np.sum(np.abs(dhat) ** 2, axis=0)

    primal_rel = dual_rel = np.inf
    iterations = 0
    for it in range(max_iter):
        rhs_hat = dtx_hat + rho * scipy.fft.rfft2(state.z - state.dual)
        cross = np.sum(dhat * rhs_hat, axis=-3, keepdims=True)
        s_hat = (rhs_hat - np.conj(dhat) * cross / denom) / rho
        state.s = scipy.fft.irfft2(s_hat, s=shape)

        z_old = state.z
        state.z = soft_threshold(state.s + state.dual, beta / rho)
        state.dual = state.dual + state.s - state.z

        iterations = it + 1
        primal = np.linalg.norm(state.s - state.z)
        scale = max(np.linalg.norm(state.s), np.linalg.norm(state.z), 1e-12)
        primal_rel = primal / scale
        dual_rel = rho * np.linalg.norm(state.z - z_old) \
            / max(rho * np.linalg.norm(state.dual), 1e-12)
        if primal_rel < tol and dual_rel < tol:
            break
    return float(primal_rel), float(dual_rel), iterations, \
        bool(primal_rel < tol and dual_rel < tol)


def _dictionary_admm(xhat, maps, kernels_padded, d_free, dual_d, kernel_size,
                     rho, max_iter, tol, shape, chunk=4096):
    """ADMM for the kernel update with maps fixed.

    Solves min_d sum_j 0.5||x_j - sum_k s_jk (*) d_k||^2 subject to the
    m x m corner support and the unit l2 ball, by splitting d from its
    constrained copy. The quadratic solve is a K x K Hermitian system per
    frequency, batched and chunked.
    """
    zhat = scipy.fft.rfft2(maps)                  # (J, K, Hf, Wf)
    k = zhat.shape[1]
    nfreq = zhat.shape[-2] * zhat.shape[-1]
    zf = zhat.reshape(zhat.shape[0], k, nfreq)
    # normal matrix sum_j conj(z_j) z_j^T and data correlation per frequency
    gram = np.einsum("jkf,jlf->fkl", np.conj(zf), zf)
    gram += rho * np.eye(k)[None]
    xf = xhat.reshape(xhat.shape[0], nfreq)
    data = np.einsum("jkf,jf->fk", np.conj(zf), xf)

    g = kernels_padded
    converged = False
    for _ in range(max_iter):
        target_hat = scipy.fft.rfft2(g - dual_d).reshape(k, nfreq)
        rhs = data + rho * target_hat.T           # (F, K)
        d_hat = np.empty_like(rhs)
        for lo in range(0, nfreq, chunk):
            hi = min(lo + chunk, nfreq)
            d_hat[lo:hi] = np.linalg.solve(gram[lo:hi], rhs[lo:hi, :, None])[..., 0]
        d_free = scipy.fft.irfft2(
            d_hat.T.reshape(k, xhat.shape[-2], xhat.shape[-1]), s=shape)

        g_old = g
        g = _project_support_ball(d_free + dual_d, kernel_size, shape)
        dual_d = dual_d + d_free - g

        primal = np.linalg.norm(d_free - g)
        scale = max(np.linalg.norm(d_free), np.linalg.norm(g), 1e-12)
        dual_change = rho * np.linalg.norm(g - g_old) \
            / max(rho * np.linalg.norm(dual_d), 1e-12)
        if primal / scale < tol and dual_change < tol:
            converged = True
            break
    return d_free, g, dual_d, converged


def _project_support_ball(kernels_padded, kernel_size, shape):
    cropped = np.zeros_like(kernels_padded)
    block = kernels_padded[:, :kernel_size, :kernel_size]
    cropped[:, :kernel_size, :kernel_size] = block
    return _project_unit_ball(cropped)


def _corpus_objective(x, xhat, maps, kernels_padded, beta):
    recon = synthesize(scipy.fft.rfft2(maps), scipy.fft.rfft2(kernels_padded),
                       x.shape[-2:])
    return 0.5 * np.sum((x - recon) ** 2) + beta * np.sum(np.abs(maps))


def _reseed_dead_kernels(x, maps, kernels_padded, kernel_size, outer_index):
    """Replace kernels whose maps are all zero with the strongest residual
    patch; leaves the recorded objective unchanged (dead maps contribute
    nothing)."""
    activity = np.abs(maps).max(axis=(0, 2, 3))
    dead = np.flatnonzero(activity <= 1e-12)
    if dead.size == 0:
        return kernels_padded
    recon = synthesize(scipy.fft.rfft2(maps), scipy.fft.rfft2(kernels_padded),
                       x.shape[-2:])
    residual = x - recon
    worst = int(np.argmax(np.linalg.norm(residual, axis=(1, 2))))
    patch = _strongest_patch(residual[worst], kernel_size)
    for idx in dead:
        logger.debug("reseeding dead kernel %d at outer iteration %d",
                     idx, outer_index)
        kernels_padded[idx] = 0.0
        kernels_padded[idx, :kernel_size, :kernel_size] = patch
    return kernels_padded


def _strongest_patch(residual, m):
    energy = residual ** 2
    # valid-position box sum via cumulative sums
    csum = np.cumsum(np.cumsum(energy, axis=0), axis=1)
    padded = np.zeros((csum.shape[0] + 1, csum.shape[1] + 1))
    padded[1:, 1:] = csum
    h, w = residual.shape
    box = (padded[m:h + 1, m:w + 1] - padded[:h - m + 1, m:w + 1]
           - padded[m:h + 1, :w - m + 1] + padded[:h - m + 1, :w - m + 1])
    i, j = np.unravel_index(int(np.argmax(box)), box.shape)
    patch = residual[i:i + m, j:j + m].copy()
    norm = np.linalg.norm(patch)
    return patch / norm if norm > 0 else patch


# --------------------------------------------------------------------------
# CSCD container

def save_dictionary(dictionary, path):
    """Write the little-endian CSCD container (bit-exact round trip)."""
    dictionary.validate()
    header = _CSCD_MAGIC + struct.pack(
        "<III", _CSCD_VERSION, dictionary.kernel_count, dictionary.kernel_size)
    trailer = json.dumps(_jsonable(dictionary.training_meta),
                         sort_keys=True).encode("utf-8")
    with open(str(path), "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(dictionary.kernels, dtype="<f8").tobytes())
        fh.write(trailer)


def load_dictionary(path):
    """Read a CSCD container written by save_dictionary."""
    with open(str(path), "rb") as fh:
        data = fh.read()
    if data[:4] != _CSCD_MAGIC:
        raise ValueError("not a CSCD file: %r" % (str(path),))
    version, count, size = struct.unpack("<III", data[4:16])
    if version != _CSCD_VERSION:
        raise ValueError("unsupported CSCD version %d" % version)
    nbytes = count * size * size * 8
    kernels = np.frombuffer(data[16:16 + nbytes], dtype="<f8")
    if kernels.size != count * size * size:
        raise ValueError("truncated CSCD kernel block in %r" % (str(path),))
    kernels = kernels.reshape(count, size, size).copy()
    meta = json.loads(data[16 + nbytes:].decode("utf-8"))
    return Dictionary(kernel_count=count, kernel_size=size, kernels=kernels,
                      training_meta=meta).validate()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj
