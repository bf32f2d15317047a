"""Variance-preserving noise schedules (discrete chain and continuous limit)."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

LINEAR = "linear"
COSINE = "cosine"
ELBO = "elbo"
SIMPLE = "simple"


@dataclass(frozen=True)
class NoiseSchedule:
    """beta_t, alpha_t and alpha_bar_t for steps t = 1..T.

    Arrays are stored 0-based (``betas[t - 1]``); use the accessor methods,
    which also apply the ``alpha_bar_0 = 1`` convention.
    """

    kind: str
    T: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    def _check(self, t):
        t = np.asarray(t)
        if np.any(t < 1) or np.any(t > self.T):
            raise ValueError(f"diffusion step out of range 1..{self.T}: {t}")
        return t.astype(int)

    def beta(self, t):
        return self.betas[self._check(t) - 1]

    def alpha(self, t):
        return self.alphas[self._check(t) - 1]

    def alpha_bar(self, t):
        """alpha_bar_t for t in 0..T, with alpha_bar_0 = 1."""
        t = np.asarray(t).astype(int)
        if np.any(t < 0) or np.any(t > self.T):
            raise ValueError(f"diffusion step out of range 0..{self.T}: {t}")
        padded = np.concatenate([[1.0], self.alpha_bars])
        return padded[t]

    # continuous view: beta(t) on [0, 1] with beta_i = beta(t_i) * dt, t_i = i / T

    @property
    def dt(self) -> float:
        return 1.0 / self.T

    def beta_continuous(self, t):
        """Piecewise-linear beta(t) through the points (i/T, T * beta_i)."""
        grid = np.arange(1, self.T + 1) / self.T
        return np.interp(t, grid, self.betas * self.T)

    def integrated_beta(self, t):
        """Exact integral of :meth:`beta_continuous` from 0 to t."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        b = self.betas
        u = t * self.T
        # first interval [0, 1/T] is flat at T * beta_1
        out = np.where(u <= 1.0, b[0] * u, 0.0)
        seg_cum = np.concatenate([[b[0]], b[0] + np.cumsum((b[:-1] + b[1:]) / 2)])
        i = np.clip(np.floor(u).astype(int), 1, self.T)  # segment start index (1-based)
        frac = u - i
        b_lo = b[i - 1]
        b_hi = b[np.minimum(i, self.T - 1)]
        partial = seg_cum[i - 1] + b_lo * frac + (b_hi - b_lo) * frac**2 / 2
        return np.where(u <= 1.0, out, partial)

    def alpha_bar_continuous(self, t):
        return np.exp(-self.integrated_beta(t))

    def index_for_time(self, t):
        """Nearest discrete step for continuous time t in [0, 1]."""
        return np.clip(np.rint(np.asarray(t) * self.T).astype(int), 1, self.T)


def _cosine_betas(T: int, s: float = 0.008) -> np.ndarray:
    x = np.linspace(0, T, T + 1)
    ab = np.cos(((x / T) + s) / (1 + s) * math.pi * 0.5) ** 2
    ab = ab / ab[0]
    return np.clip(1 - ab[1:] / ab[:-1], 1e-6, 0.999)


def build_schedule(kind: str = LINEAR, T: int = 1000, beta_min: float = 1e-4, beta_max: float = 2e-2) -> NoiseSchedule:
    if int(T) != T or T < 1:
        raise ValueError(f"schedule.T must be a positive integer, got {T}")
    T = int(T)
    if not (0 < beta_min <= beta_max < 1):
        raise ValueError(f"need 0 < beta_min <= beta_max < 1, got {beta_min}, {beta_max}")
    if kind == LINEAR:
        betas = np.linspace(beta_min, beta_max, T) if T > 1 else np.array([beta_min])
    elif kind == COSINE:
        betas = _cosine_betas(T)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    if alpha_bars[-1] > 0.01:
        warnings.warn(
            f"alpha_bar_T = {alpha_bars[-1]:.3g} > 0.01; the prior will not match the terminal marginal",
            stacklevel=2,
        )
    return NoiseSchedule(kind, T, betas, alphas, alpha_bars)


def elbo_weight(schedule: NoiseSchedule, t, mode: str = ELBO):
    """lambda_t = (1 - alpha_t) / (2 alpha_t (1 - alpha_bar_t)), or 1 in simple mode."""
    a = schedule.alpha(t)
    if mode == SIMPLE:
        return np.ones_like(a)
    if mode != ELBO:
        raise ValueError(f"unknown weighting mode {mode!r}")
    ab = schedule.alpha_bar(t)
    return (1 - a) / (2 * a * (1 - ab))


def continuous_weight_at_step(schedule: NoiseSchedule, t, mode: str = ELBO):
    """lambda(t) = lambda_t (1 - alpha_bar_t) at a discrete step."""
    if mode == SIMPLE:
        return np.ones_like(schedule.alpha(t))
    return elbo_weight(schedule, t, mode) * (1 - schedule.alpha_bar(t))


def continuous_weight(schedule: NoiseSchedule, t, mode: str = ELBO):
    """lambda(t) for continuous t in [0, 1], via the nearest discrete step."""
    return continuous_weight_at_step(schedule, schedule.index_for_time(t), mode)
