"""Forward (noising) dynamics in the temporal and frequency domains."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .noise import SpectralNoiseModel, compress_noise, sample_spectral_noise, sample_temporal_noise
from .schedule import NoiseSchedule
from .spectral import COMPRESSED, SpectralFormError, SpectralState


@dataclass(frozen=True)
class DiffusedSample:
    """A noised compressed state together with the noise and origin that made it."""

    state: SpectralState
    t: np.ndarray
    noise: SpectralState
    origin: SpectralState


def _broadcast_coef(c, ndim: int) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    return c.reshape(c.shape + (1,) * (ndim - c.ndim)) if c.ndim else c


def _spectral_noise_like(state: SpectralState, model: SpectralNoiseModel, rng) -> SpectralState:
    if state.length != model.length:
        raise ValueError(f"state length {state.length} != noise model length {model.length}")
    batch = state.real.shape[:-2]
    D = state.real.shape[-1]
    noise = sample_spectral_noise(model, D, rng, batch)
    return compress_noise(noise, model) if state.form == COMPRESSED else noise


def forward_step(state_prev: SpectralState, t, schedule: NoiseSchedule, noise_model: SpectralNoiseModel, rng) -> SpectralState:
    """One Markov transition X_t = sqrt(1 - beta_t) X_{t-1} + sqrt(beta_t) E_t."""
    beta = schedule.beta(t)
    return _step_with_beta(state_prev, beta, noise_model, rng)


def _step_with_beta(state_prev, beta, noise_model, rng):
    noise = _spectral_noise_like(state_prev, noise_model, rng)
    nd = state_prev.real.ndim
    a = _broadcast_coef(np.sqrt(1 - beta), nd)
    b = _broadcast_coef(np.sqrt(beta), nd)
    return SpectralState(
        a * state_prev.real + b * noise.real,
        a * state_prev.imag + b * noise.imag,
        state_prev.form,
        state_prev.length,
    )


def forward_marginal(
    origin: SpectralState,
    t,
    schedule: NoiseSchedule,
    noise_model: SpectralNoiseModel,
    rng,
    noise: SpectralState | None = None,
) -> DiffusedSample:
    """Closed-form q(X_t | X_0) on the compressed manifold.

    ``t`` is a scalar or one step per leading batch element. ``noise`` may be
    supplied to make the draw deterministic.
    """
    if origin.form != COMPRESSED:
        raise SpectralFormError("forward_marginal works on compressed states")
    t = np.asarray(t)
    if noise is None:
        noise = _spectral_noise_like(origin, noise_model, rng)
    nd = origin.real.ndim
    ab = schedule.alpha_bar(t)
    s = _broadcast_coef(np.sqrt(ab), nd)
    n = _broadcast_coef(np.sqrt(1 - ab), nd)
    state = SpectralState(
        s * origin.real + n * noise.real,
        s * origin.imag + n * noise.imag,
        COMPRESSED,
        origin.length,
    )
    return DiffusedSample(state, t, noise, origin)


def temporal_forward_marginal(x0, t, schedule: NoiseSchedule, rng, sigma: float = 1.0) -> np.ndarray:
    """sqrt(ab_t) x0 + sqrt(1 - ab_t) eps with eps ~ N(0, sigma^2 I); t = 0 returns x0."""
    x0 = np.asarray(x0, dtype=float)
    ab = schedule.alpha_bar(t)
    eps = sample_temporal_noise(x0.shape[-2], x0.shape[-1], sigma, rng, x0.shape[:-2])
    nd = x0.ndim
    return _broadcast_coef(np.sqrt(ab), nd) * x0 + _broadcast_coef(np.sqrt(1 - ab), nd) * eps
