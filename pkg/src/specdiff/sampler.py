"""Generation: ancestral sampling with the heteroscedastic posterior and
Euler-Maruyama integration of the parallel reverse SDEs.

Samplers take the network as a callable ``eps_model(R, I, t) -> (eps_r, eps_i)``
(see :func:`specdiff.denoiser.make_eps_model`), so analytic or stub predictors
can be substituted in tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .noise import SpectralNoiseModel, sample_compressed_noise
from .objective import noise_to_score
from .schedule import NoiseSchedule
from .spectral import COMPRESSED, SpectralState, compressed_to_series

DDPM = "ddpm"
SDE = "sde"
SCORE_FACTORS = {"half": 0.5, "one": 1.0}


@dataclass(frozen=True)
class SamplerConfig:
    kind: str = DDPM
    sde_steps: int = 1000
    sde_score_factor: str = "one"
    final_denoise: bool = True

    def __post_init__(self):
        if self.kind not in (DDPM, SDE):
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if self.sde_score_factor not in SCORE_FACTORS:
            raise ValueError(f"sde_score_factor must be one of {sorted(SCORE_FACTORS)}")
        if self.kind == SDE and self.sde_steps < 2:
            raise ValueError("sde sampler needs sde_steps >= 2")


def posterior_params(x_t, eps_hat, t, schedule: NoiseSchedule):
    """Mean and variance scale of q(x_{t-1} | x_t, x_0) with x_0 implied by eps_hat.

    The per-coordinate reverse variance is ``variance_scale * v`` where v is the
    coordinate's noise variance.
    """
    a = schedule.alpha(t)
    ab = schedule.alpha_bar(t)
    ab_prev = schedule.alpha_bar(np.asarray(t) - 1)
    x_t = np.asarray(x_t, dtype=float)
    eps_hat = np.asarray(eps_hat, dtype=float)
    coef = (1 - a) / np.sqrt(1 - ab)
    nd = x_t.ndim
    shape = lambda c: np.reshape(c, np.shape(c) + (1,) * (nd - np.ndim(c))) if np.ndim(c) else c
    mean = (x_t - shape(coef) * eps_hat) / shape(np.sqrt(a))
    variance_scale = (1 - a) * (1 - ab_prev) / (1 - ab)
    return mean, variance_scale


def _mask(noise_model: SpectralNoiseModel):
    return (noise_model.var_real > 0)[:, None].astype(float), (noise_model.var_imag > 0)[:, None].astype(float)


def ddpm_sample_compressed(eps_model: Callable, schedule: NoiseSchedule, noise_model: SpectralNoiseModel, n: int, D: int, rng, *, final_denoise: bool = True) -> SpectralState:
    """Ancestral sampling on the compressed manifold, both quadratures in parallel."""
    prior = sample_compressed_noise(noise_model, D, rng, n)
    R, I = prior.real, prior.imag
    mask_r, mask_i = _mask(noise_model)
    for t in range(schedule.T, 0, -1):
        tt = np.full(n, t)
        er, ei = eps_model(R, I, tt)
        er, ei = er * mask_r, ei * mask_i
        R, var_scale = posterior_params(R, er, t, schedule)
        I, _ = posterior_params(I, ei, t, schedule)
        if t > 1 or not final_denoise:
            z = sample_compressed_noise(noise_model, D, rng, n)
            s = np.sqrt(var_scale)
            R = R + s * z.real
            I = I + s * z.imag
    return SpectralState(R, I, COMPRESSED, noise_model.length)


def ddpm_sample(eps_model, schedule, noise_model, n, D, rng, *, final_denoise: bool = True) -> np.ndarray:
    return compressed_to_series(ddpm_sample_compressed(eps_model, schedule, noise_model, n, D, rng, final_denoise=final_denoise))


def score_from_eps_model(eps_model: Callable, schedule: NoiseSchedule, noise_model: SpectralNoiseModel):
    """Wrap a noise predictor as a score function of continuous time."""
    mask_r, mask_i = _mask(noise_model)

    def score_fn(R, I, t):
        idx = schedule.index_for_time(t)
        tt = np.full(R.shape[0], idx)
        er, ei = eps_model(R, I, tt)
        return noise_to_score((er * mask_r, ei * mask_i), tt, schedule, noise_model)

    return score_fn


def reverse_sde(R, I, score_fn: Callable, beta_fn: Callable, noise_model: SpectralNoiseModel, steps: int, factor: float, rng, *, t_start: float = 1.0, t_end: float = 0.0, denoise_fn: Callable | None = None):
    """Euler-Maruyama for dX = [-beta X / 2 - c beta Sigma score] dt + sqrt(beta) dW_Sigma backward in time.

    Each branch uses only its own state and score. The diffusion increments are
    compressed spectral noise (covariance Sigma per unit time), so the score
    term carries Sigma and the two cancel into a noise-like correction.
    ``denoise_fn(R, I, t)``, if given, replaces the last step.
    """
    D = R.shape[-1]
    n = R.shape[0]
    v_r = noise_model.var_real[:, None]
    v_i = noise_model.var_imag[:, None]
    dt = (t_start - t_end) / steps
    for k in range(steps):
        t = t_start - k * dt
        if denoise_fn is not None and k == steps - 1:
            return denoise_fn(R, I, t)
        sr, si = score_fn(R, I, t)
        beta = float(beta_fn(t))
        drift_r = -0.5 * beta * R - factor * beta * v_r * sr
        drift_i = -0.5 * beta * I - factor * beta * v_i * si
        z = sample_compressed_noise(noise_model, D, rng, n)
        g = np.sqrt(beta * dt)
        R = R - drift_r * dt + g * z.real
        I = I - drift_i * dt + g * z.imag
    return R, I


def sde_sample_compressed(eps_model: Callable, schedule: NoiseSchedule, noise_model: SpectralNoiseModel, config: SamplerConfig, n: int, D: int, rng) -> SpectralState:
    prior = sample_compressed_noise(noise_model, D, rng, n)
    score_fn = score_from_eps_model(eps_model, schedule, noise_model)
    denoise_fn = None
    if config.final_denoise:
        v_r = noise_model.var_real[:, None]
        v_i = noise_model.var_imag[:, None]

        def denoise_fn(R, I, t):
            # posterior-mean estimate of X_0 from the predicted score
            sr, si = score_fn(R, I, t)
            ab = float(schedule.alpha_bar(schedule.index_for_time(t)))
            return (R + (1 - ab) * v_r * sr) / np.sqrt(ab), (I + (1 - ab) * v_i * si) / np.sqrt(ab)

    R, I = reverse_sde(
        prior.real,
        prior.imag,
        score_fn,
        schedule.beta_continuous,
        noise_model,
        config.sde_steps,
        SCORE_FACTORS[config.sde_score_factor],
        rng,
        denoise_fn=denoise_fn,
    )
    return SpectralState(R, I, COMPRESSED, noise_model.length)


def sde_sample(eps_model, schedule, noise_model, config: SamplerConfig, n, D, rng) -> np.ndarray:
    return compressed_to_series(sde_sample_compressed(eps_model, schedule, noise_model, config, n, D, rng))


def sample(eps_model, schedule, noise_model, config: SamplerConfig, n, D, rng) -> np.ndarray:
    if config.kind == DDPM:
        return ddpm_sample(eps_model, schedule, noise_model, n, D, rng, final_denoise=config.final_denoise)
    return sde_sample(eps_model, schedule, noise_model, config, n, D, rng)


def gaussian_score_fn(data_var_r, data_var_i, schedule: NoiseSchedule, noise_model: SpectralNoiseModel):
    """Exact marginal score when X_0 ~ N(0, diag(data_var)) per bin.

    q(X_t) = N(0, ab(t) V0 + (1 - ab(t)) v); uses the continuous-time alpha_bar
    so it matches the SDE being integrated.
    """
    V0r = np.asarray(data_var_r, dtype=float)[:, None]
    V0i = np.asarray(data_var_i, dtype=float)[:, None]
    v_r = noise_model.var_real[:, None]
    v_i = noise_model.var_imag[:, None]

    def score_fn(R, I, t):
        ab = float(schedule.alpha_bar_continuous(t))
        var_r = ab * V0r + (1 - ab) * v_r
        var_i = ab * V0i + (1 - ab) * v_i
        si = np.divide(-I, var_i, out=np.zeros_like(I), where=var_i > 0)
        return -R / var_r, si

    return score_fn
