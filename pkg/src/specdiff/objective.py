"""Heteroscedastic training losses, score-noise identity and the training step."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import denoiser
from .forward import forward_marginal
from .noise import SpectralNoiseModel
from .schedule import ELBO, SIMPLE, NoiseSchedule, continuous_weight_at_step, elbo_weight
from .spectral import SpectralState, compress, dft


@dataclass
class LossReport:
    loss_real: float
    loss_imag: float
    total: float
    weighting: str
    t: np.ndarray


def _pair(x):
    if isinstance(x, SpectralState):
        return x.real, x.imag
    r, i = x
    return np.asarray(r, dtype=float), np.asarray(i, dtype=float)


def _per_sample(coef, arr):
    coef = np.asarray(coef, dtype=float)
    return coef.reshape(coef.shape + (1,) * (arr.ndim - coef.ndim)) if coef.ndim else coef


def _weighted_sq(res, weights):
    return np.sum(weights[:, None] * res**2, axis=(-2, -1))


def _report(per_r, per_i, weighting, t) -> LossReport:
    lr = float(np.mean(per_r))
    li = float(np.mean(per_i))
    return LossReport(lr, li, lr + li, weighting, np.asarray(t))


def discrete_loss(eps_hat, eps_true, t, schedule: NoiseSchedule, noise_model: SpectralNoiseModel, weighting: str = SIMPLE, *, weight=None) -> LossReport:
    """lambda_t * ||eps_hat - eps||^2 in the compressed precision metric, batch mean."""
    hr, hi = _pair(eps_hat)
    er, ei = _pair(eps_true)
    if hr.shape != er.shape or hi.shape != ei.shape:
        raise ValueError(f"prediction shape {hr.shape} does not match target {er.shape}")
    lam = elbo_weight(schedule, t, weighting) if weight is None else weight
    per_r = lam * _weighted_sq(hr - er, noise_model.weight_real)
    per_i = lam * _weighted_sq(hi - ei, noise_model.weight_imag)
    return _report(per_r, per_i, weighting, t)


def noise_to_score(eps, t, schedule: NoiseSchedule, noise_model: SpectralNoiseModel):
    """Score of q(X_t | X_0): -Sigma^{-1} eps / sqrt(1 - alpha_bar_t), per branch.

    The zero-variance imaginary Nyquist coordinate gets score 0.
    """
    er, ei = _pair(eps)
    ab = schedule.alpha_bar(t)
    if np.any(ab >= 1.0):
        raise ZeroDivisionError("score undefined where alpha_bar_t = 1")
    scale = _per_sample(1.0 / np.sqrt(1.0 - ab), er)
    return (
        -noise_model.weight_real[:, None] * er * scale,
        -noise_model.weight_imag[:, None] * ei * scale,
    )


def score_to_noise(score, t, schedule: NoiseSchedule, noise_model: SpectralNoiseModel):
    """Inverse of :func:`noise_to_score` on positively weighted coordinates."""
    sr, si = _pair(score)
    ab = schedule.alpha_bar(t)
    scale = _per_sample(np.sqrt(1.0 - ab), sr)
    return -noise_model.var_real[:, None] * sr * scale, -noise_model.var_imag[:, None] * si * scale


def continuous_loss(score_hat, eps_true, t, schedule: NoiseSchedule, noise_model: SpectralNoiseModel, weighting: str = ELBO, *, weight=None) -> LossReport:
    """lambda(t) * ||s_hat - grad log p_{t|0}||^2_Sigma with lambda(t) = lambda_t (1 - alpha_bar_t).

    ``weight`` overrides lambda(t), e.g. to build a deliberately mismatched control.
    """
    shr, shi = _pair(score_hat)
    sr, si = noise_to_score(eps_true, t, schedule, noise_model)
    if shr.shape != sr.shape:
        raise ValueError(f"score shape {shr.shape} does not match target {sr.shape}")
    lam = continuous_weight_at_step(schedule, t, weighting) if weight is None else weight
    per_r = lam * _weighted_sq(shr - sr, noise_model.var_real)
    per_i = lam * _weighted_sq(shi - si, noise_model.var_imag)
    return _report(per_r, per_i, weighting, t)


# ---------------------------------------------------------------- optimisation


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_init(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    return AdamState(lr, beta1, beta2, eps, 0, denoiser.zeros_like_params(params), denoiser.zeros_like_params(params))


def adam_update(params, grads, state: AdamState):
    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_p, new_m, new_v = {}, {}, {}
    c1 = 1 - b1**step
    c2 = 1 - b2**step
    for k, p in params.items():
        g = grads[k]
        m = b1 * state.m[k] + (1 - b1) * g
        v = b2 * state.v[k] + (1 - b2) * g * g
        new_m[k], new_v[k] = m, v
        new_p[k] = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return new_p, AdamState(state.lr, b1, b2, state.eps, step, new_m, new_v)


def loss_and_grads(params, cfg, diffused, schedule, noise_model, weighting=SIMPLE):
    """Discrete loss of the network on a DiffusedSample batch and its parameter gradients."""
    R, I = diffused.state.real, diffused.state.imag
    t = diffused.t
    (hr, hi), cache = denoiser.forward(params, cfg, R, I, t, return_cache=True)
    report = discrete_loss((hr, hi), diffused.noise, t, schedule, noise_model, weighting)
    B = R.shape[0]
    lam = _per_sample(elbo_weight(schedule, t, weighting), hr)
    gr = 2.0 * lam * noise_model.weight_real[:, None] * (hr - diffused.noise.real) / B
    gi = 2.0 * lam * noise_model.weight_imag[:, None] * (hi - diffused.noise.imag) / B
    grads = denoiser.backward(params, cache, gr, gi)
    return report, grads


def training_step(params, cfg, batch, schedule: NoiseSchedule, noise_model: SpectralNoiseModel, opt_state: AdamState, rng, weighting: str = SIMPLE):
    """One Adam step on a batch of centered series of shape (B, L, D).

    Draws t uniformly from 1..T per element, noises the compressed spectrum
    in closed form and regresses the injected noise.
    """
    batch = np.asarray(batch, dtype=float)
    origin = compress(dft(batch))
    t = rng.integers(1, schedule.T + 1, size=batch.shape[0])
    diffused = forward_marginal(origin, t, schedule, noise_model, rng)
    report, grads = loss_and_grads(params, cfg, diffused, schedule, noise_model, weighting)
    if not np.isfinite(report.total) or not all(np.all(np.isfinite(g)) for g in grads.values()):
        bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
        raise FloatingPointError(
            f"non-finite loss at optimizer step {opt_state.step + 1}: "
            f"real={report.loss_real} imag={report.loss_imag}; non-finite grads in {bad[:5]}"
        )
    new_params, new_state = adam_update(params, grads, opt_state)
    return new_params, new_state, report
