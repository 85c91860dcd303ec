"""Reconstruction engines for single-pixel measurements.

Four families, all sharing the measurement model y = Phi x:

* ``reconstruct_ls``     -- minimum-norm least squares (prior-free baseline),
  conjugate gradient on the normal equations.
* ``reconstruct_global`` -- l1 prior in a fixed transform domain (TV or DCT):
  min ||Psi x||_1 + (mu/2)||Phi x - y||^2 via ADMM with the split v = Psi x.
* ``reconstruct_csc``    -- the combined solver: the global prior plus the
  learned convolutional sparse coding prior. ADMM over feature maps u_k with
  three couplings: sparse copies s_k = u_k, prior codes v = Psi(sum d_k*u_k),
  and a data copy w = Phi(sum d_k*u_k); the u-update is a conjugate-gradient
  solve coupling the convolution, Psi, and Phi terms, warm-started across
  iterations.

Conventions, fixed across the package:

* Measurements are normalized internally by rms(y), so with the SNR defined
  as mean(y^2)/noise variance the residual noise has variance 10^(-snr/10)
  in solver units and the data weight mu = 10^(snr_db/10) (clamped to
  [1, 1e6]) is the statistically matched choice; noiseless runs use 1e3.
* The scene mean rides on the projection of y onto the all-ones pattern
  direction (equivalently the measurement mean for Bernoulli 0/1 patterns)
  and is reconstructed separately; the CSC model represents the zero-mean
  residual, matching the mean-subtracted dictionary training.
* Exported images are clamped to [0, 1]; metrics are computed on the
  clamped copy. The unclamped grid is kept on the result.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.fft

from . import transforms
from .dictionary import Dictionary, kernel_spectra, synthesize, correlate
from ._kernels import gram_tv, soft_threshold

MU_NOISELESS = 1e3
MU_MIN, MU_MAX = 1.0, 1e6


@dataclass
class SolverConfig:
    """Reconstruction hyperparameters.

    ``mu`` is the data-fidelity weight; leave None to derive it from the
    measurement's SNR metadata (see module docstring). ``lam`` weighs the
    CSC l1 term (the lambda penalty of the combined objective).
    """

    prior: str = "TV"
    use_csc: bool = False
    lam: float = 0.05
    mu: Optional[float] = None
    rho: float = 1.0
    max_iterations: int = 200
    tolerance: float = 1e-4
    dictionary: Optional[Dictionary] = None
    cg_tolerance: float = 1e-8
    cg_max_iterations: int = 3000

    def __post_init__(self):
        if self.prior not in ("TV", "DCT"):
            raise ValueError("prior must be 'TV' or 'DCT', got %r" % (self.prior,))
        if self.use_csc and self.dictionary is None:
            raise ValueError("use_csc=True requires a dictionary")
        if not self.use_csc and self.dictionary is not None:
            raise ValueError("dictionary given but use_csc=False")
        if self.use_csc and self.lam <= 0:
            raise ValueError("lam must be positive for the CSC solver")
        if self.mu is not None and self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.rho <= 0:
            raise ValueError("rho must be positive")


@dataclass
class ReconResult:
    """Reconstruction output plus convergence diagnostics.

    ``image`` is clamped to [0, 1]; ``raw`` is the unclamped grid.
    History lists have one entry per ADMM (or CG, for LS) iteration.
    """

    image: np.ndarray = field(repr=False)
    raw: np.ndarray = field(repr=False)
    iterations_used: int = 0
    objective_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    feasibility_history: list = field(default_factory=list)
    converged: bool = False
    config_echo: Optional[SolverConfig] = None
    dc_estimate: float = 0.0


def effective_mu(cfg, measurement):
    """Resolve the data weight: explicit cfg.mu, else the SNR schedule."""
    if cfg.mu is not None:
        return float(cfg.mu)
    if measurement.snr_db is None:
        return MU_NOISELESS
    snr = measurement.snr_db
    if measurement.samplings > 1:
        snr = snr + 10.0 * math.log10(measurement.samplings)
    return float(min(max(10.0 ** (snr / 10.0), MU_MIN), MU_MAX))


def reconstruct_ls(measurement, patterns, tolerance=1e-10, max_iterations=None):
    """Minimum-norm least-squares baseline.

    Conjugate gradient on the normal equations Phi^T Phi x = Phi^T y from a
    zero start, which converges to the minimum-norm least-squares solution.
    """
    rows, y = _check_inputs(measurement, patterns)
    n = rows.shape[1]
    shape = (patterns.height, patterns.width)
    if max_iterations is None:
        max_iterations = max(2000, 8 * n)

    b = rows.T @ y
    bnorm = np.linalg.norm(b)
    objective, residuals = [], []

    def apply_normal(x):
        return rows.T @ (rows @ x)

    x = np.zeros(n)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    iterations = 0
    rel = 1.0 if bnorm > 0 else 0.0
    for it in range(max_iterations):
        if rel <= tolerance:
            break
        ap = apply_normal(p)
        denom = float(p @ ap)
        if denom <= 0:
            break
        alpha = rs / denom
        x += alpha * p
        r -= alpha * ap
        rs_new = float(r @ r)
        iterations = it + 1
        rel = math.sqrt(rs_new) / max(bnorm, 1e-300)
        data_res = y - rows @ x
        objective.append(0.5 * float(data_res @ data_res))
        residuals.append((math.sqrt(rs_new), 0.0))
        p = r + (rs_new / rs) * p
        rs = rs_new

    raw = x.reshape(shape)
    return ReconResult(image=np.clip(raw, 0.0, 1.0), raw=raw,
                       iterations_used=iterations,
                       objective_history=objective, residual_history=residuals,
                       feasibility_history=[], converged=bool(rel <= tolerance),
                       config_echo=None, dc_estimate=float(raw.mean()))


def reconstruct_global(measurement, patterns, cfg):
    """Global-prior solver: min ||Psi x||_1 + (mu/2)||Phi x - y||^2 by ADMM.

    Split v = Psi x; the x-update solves (mu Phi^T Phi + rho Psi^T Psi) x =
    rhs by warm-started conjugate gradient; the v-update is a soft threshold
    with 1/rho; then dual ascent.
    """
    if cfg.use_csc:
        raise ValueError("reconstruct_global requires use_csc=False")
    rows, y = _check_inputs(measurement, patterns)
    shape = (patterns.height, patterns.width)
    mu = effective_mu(cfg, measurement)
    rows, y = _normalize(rows, y)
    prior = _Prior(cfg.prior, shape)
    rho = cfg.rho

    phity = rows.T @ y

    def apply_system(xflat):
        x = xflat.reshape(shape)
        out = mu * (rows.T @ (rows @ xflat))
        out += rho * prior.gram(x).ravel()
        return out

    # circulant PCG preconditioner: exact frequency diagonal of the pattern
    # Gram plus the (exactly circulant) prior Gram
    gamma = mu * _pattern_gram_spectrum(rows, shape)
    gamma += rho * (_tv_spectrum(shape) if cfg.prior == "TV" else 1.0)
    gamma = np.maximum(gamma, 1e-12 * gamma.max())

    def precond(rflat):
        return scipy.fft.irfft2(scipy.fft.rfft2(rflat.reshape(shape)) / gamma,
                                s=shape).ravel()

    x = np.zeros(shape)
    v = prior.forward(x)
    dual = np.zeros_like(v)

    objective, residuals, feasibility = [], [], []
    converged = False
    iterations = 0
    for it in range(cfg.max_iterations):
        rhs = mu * phity + rho * prior.adjoint(v - dual).ravel()
        xflat, _ = _cg(apply_system, rhs, x.ravel(), cfg.cg_tolerance,
                       cfg.cg_max_iterations, precond=precond)
        x = xflat.reshape(shape)
        _ensure_finite(x, it)

        px = prior.forward(x)
        v_old = v
        v = soft_threshold(px + dual, 1.0 / rho)
        dual = dual + px - v

        iterations = it + 1
        data_res = rows @ x.ravel() - y
        objective.append(float(np.sum(np.abs(px)))
                         + 0.5 * mu * float(data_res @ data_res))
        primal = float(np.linalg.norm(px - v))
        dual_res = rho * float(np.linalg.norm(prior.adjoint(v - v_old)))
        residuals.append((primal, dual_res))
        feasibility.append((float(np.linalg.norm(data_res)), primal))

        # unit floors keep the relative test meaningful when the prior codes
        # are themselves near zero (e.g. constant scenes under TV)
        primal_rel = primal / max(np.linalg.norm(px), np.linalg.norm(v), 1.0)
        dual_rel = dual_res / max(rho * np.linalg.norm(prior.adjoint(dual)), 1.0)
        if primal_rel < cfg.tolerance and dual_rel < cfg.tolerance:
            converged = True
            break

    return ReconResult(image=np.clip(x, 0.0, 1.0), raw=x,
                       iterations_used=iterations, objective_history=objective,
                       residual_history=residuals,
                       feasibility_history=feasibility, converged=converged,
                       config_echo=replace(cfg, mu=mu),
                       dc_estimate=float(x.mean()))


def reconstruct_csc(measurement, patterns, cfg):
    """Combined global + convolutional sparse coding solver.

    ADMM per iteration: (1) sparse copies s_k by soft threshold with lam/rho
    against (u_k - dual); (2) feature maps u_k by a conjugate-gradient solve
    coupling the convolution, Psi, and Phi terms (warm-started); (3) prior
    codes v (and the data copy w) by their proximal maps; (4) dual updates
    for all three couplings. The scene is synthesized as sum_k d_k (*) u_k
    plus the separately estimated DC component.
    """
    if not cfg.use_csc:
        raise ValueError("reconstruct_csc requires use_csc=True")
    dictionary = cfg.dictionary.validate()
    rows, y = _check_inputs(measurement, patterns)
    shape = (patterns.height, patterns.width)
    if min(shape) < dictionary.kernel_size:
        raise ValueError("kernel size %d exceeds image size %r"
                         % (dictionary.kernel_size, shape))
    mu = effective_mu(cfg, measurement)
    rows, y = _normalize(rows, y)

    # DC component from the all-ones pattern direction; the CSC model then
    # fits the zero-mean residual.
    phi_ones = rows @ np.ones(shape[0] * shape[1])
    ones_energy = float(phi_ones @ phi_ones)
    dc = float(phi_ones @ y) / ones_energy if ones_energy > 0 else 0.0
    y_res = y - dc * phi_ones

    prior = _Prior(cfg.prior, shape)
    dhat = kernel_spectra(dictionary, shape)
    k = dictionary.kernel_count
    rho, lam = cfg.rho, cfg.lam
    # the data-copy coupling carries its own penalty so feasibility does not
    # ride on slow dual accumulation when mu >> rho, while staying far enough
    # below mu that the CG system stays tractable; geometric mean balances
    # the two (update forms are unchanged by per-coupling penalties)
    rho_w = max(rho, math.sqrt(mu * rho))

    def apply_d(u):
        return synthesize(scipy.fft.rfft2(u), dhat, shape)

    def apply_dt(img):
        return scipy.fft.irfft2(correlate(scipy.fft.rfft2(img), dhat), s=shape)

    def apply_system(uflat):
        u = uflat.reshape(k, *shape)
        du = apply_d(u)
        img_part = rho * prior.gram(du) \
            + rho_w * (rows.T @ (rows @ du.ravel())).reshape(shape)
        return (rho * u + apply_dt(img_part)).ravel()

    # circulant PCG preconditioner: per frequency the approximated system is
    # rho I + gamma_f conj(dhat_f) dhat_f^H, inverted by Sherman-Morrison
    gamma = rho_w * _pattern_gram_spectrum(rows, shape)
    gamma += rho * (_tv_spectrum(shape) if cfg.prior == "TV" else 1.0)
    denom = rho + gamma * np.sum(np.abs(dhat) ** 2, axis=0)

    def precond(rflat):
        rhat = scipy.fft.rfft2(rflat.reshape(k, *shape))
        cross = np.sum(dhat * rhat, axis=0)
        zhat = (rhat - np.conj(dhat) * (gamma * cross / denom)) / rho
        return scipy.fft.irfft2(zhat, s=shape).ravel()

    u = np.zeros((k, *shape))
    s = np.zeros_like(u)
    dual_s = np.zeros_like(u)
    du = apply_d(u)
    v = prior.forward(du)
    dual_v = np.zeros_like(v)
    w = np.zeros_like(y_res)
    dual_w = np.zeros_like(y_res)

    objective, residuals, feasibility = [], [], []
    converged = False
    iterations = 0
    for it in range(cfg.max_iterations):
        s = soft_threshold(u - dual_s, lam / rho)

        rhs = (rho * (s + dual_s)
               + apply_dt(rho * prior.adjoint(v + dual_v)
                          + rho_w * (rows.T @ (w + dual_w)).reshape(shape)))
        uflat, _ = _cg(apply_system, rhs.ravel(), u.ravel(), cfg.cg_tolerance,
                       cfg.cg_max_iterations, precond=precond)
        u = uflat.reshape(k, *shape)
        _ensure_finite(u, it)

        du = apply_d(u)
        pdu = prior.forward(du)
        phidu = rows @ du.ravel()

        v_old, w_old = v, w
        v = soft_threshold(pdu - dual_v, 1.0 / rho)
        w = (mu * y_res + rho_w * (phidu - dual_w)) / (mu + rho_w)

        dual_s = dual_s + s - u
        dual_v = dual_v + v - pdu
        dual_w = dual_w + w - phidu

        iterations = it + 1
        data_res = phidu - y_res
        w_res = w - y_res
        objective.append(float(np.sum(np.abs(v)))
                         + lam * float(np.sum(np.abs(s)))
                         + 0.5 * mu * float(w_res @ w_res))
        primal = math.sqrt(float(np.sum((s - u) ** 2))
                           + float(np.sum((v - pdu) ** 2))
                           + float(np.sum((w - phidu) ** 2)))
        dual_change = rho * math.sqrt(float(np.sum((v - v_old) ** 2))
                                      + float(np.sum((w - w_old) ** 2)))
        residuals.append((primal, dual_change))
        feasibility.append((float(np.linalg.norm(data_res)),
                            float(np.linalg.norm(pdu - v))))

        scale = max(np.linalg.norm(u), np.linalg.norm(v), np.linalg.norm(w),
                    1.0)
        dual_scale = max(rho * math.sqrt(float(np.sum(dual_s ** 2))
                                         + float(np.sum(dual_v ** 2))
                                         + float(np.sum(dual_w ** 2))), 1.0)
        if primal / scale < cfg.tolerance \
                and dual_change / dual_scale < cfg.tolerance:
            converged = True
            break

    # the scene is synthesized from the final sparse codes
    s = soft_threshold(u - dual_s, lam / rho)
    raw = apply_d(s) + dc
    return ReconResult(image=np.clip(raw, 0.0, 1.0), raw=raw,
                       iterations_used=iterations, objective_history=objective,
                       residual_history=residuals,
                       feasibility_history=feasibility, converged=converged,
                       config_echo=replace(cfg, mu=mu), dc_estimate=dc)


# --------------------------------------------------------------------------

class _Prior:
    """The sparsifying transform pair Psi / Psi^T plus its Gram operator."""

    def __init__(self, kind, shape):
        self.kind = kind
        self.shape = shape

    def forward(self, x):
        if self.kind == "TV":
            return transforms.gradient(x)
        return transforms.dct2_forward(x)

    def adjoint(self, v):
        if self.kind == "TV":
            return transforms.divergence(v)
        return transforms.dct2_inverse(v)

    def gram(self, x):
        if self.kind == "TV":
            return gram_tv(x)
        return x


def _check_inputs(measurement, patterns):
    y = np.asarray(measurement.values, dtype=np.float64)
    rows = patterns.rows
    if rows.shape[0] != y.size:
        raise ValueError("measurement count %d does not match pattern count %d"
                         % (y.size, rows.shape[0]))
    if rows.shape[1] != patterns.height * patterns.width:
        raise ValueError("pattern row length inconsistent with dimensions")
    return rows, y


def _normalize(rows, y):
    """Scale Phi and y by rms(y) so mu acts in unit-signal-power units."""
    scale = math.sqrt(float(np.mean(y ** 2)))
    if scale < 1e-300:
        return rows, y
    return rows / scale, y / scale


def _ensure_finite(arr, iteration):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(
            "non-finite solver state at ADMM iteration %d" % (iteration + 1,))


def _cg(apply_A, b, x0, tol, max_iter, precond=None):
    """(Preconditioned) conjugate gradient for SPD operators, warm-startable.

    Returns (x, iterations). Terminates on ||b - A x|| <= tol * ||b||.
    """
    x = x0.copy()
    r = b - apply_A(x)
    bnorm = max(np.linalg.norm(b), 1e-300)
    rnorm = np.linalg.norm(r)
    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = float(r @ z)
    it = 0
    while rnorm > tol * bnorm and it < max_iter:
        ap = apply_A(p)
        denom = float(p @ ap)
        if denom <= 0:
            break
        alpha = rz / denom
        x += alpha * p
        r -= alpha * ap
        rnorm = np.linalg.norm(r)
        z = precond(r) if precond is not None else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    return x, it


def _tv_spectrum(shape):
    """Frequency response of the periodic TV Gram operator (rfft2 layout)."""
    h, w = shape
    fy = 4.0 * np.sin(np.pi * np.arange(h) / h) ** 2
    fx = 4.0 * np.sin(np.pi * np.arange(w // 2 + 1) / w) ** 2
    return fy[:, None] + fx[None, :]


def _pattern_gram_spectrum(rows, shape):
    """Exact frequency-domain diagonal of Phi^T Phi.

    Entry f is sum_i |rfft2(row_i)(f)|^2, the circulant part of the pattern
    Gram operator; the off-diagonal remainder is what PCG iterates away.
    """
    spectra = scipy.fft.rfft2(rows.reshape(rows.shape[0], *shape))
    return np.sum(np.abs(spectra) ** 2, axis=0) / (shape[0] * shape[1])
