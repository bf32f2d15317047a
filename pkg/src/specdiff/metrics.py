"""Sample-quality metrics comparing a real and a synthetic set of series."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import wasserstein_distance

from .data import STD_FLOOR


@dataclass(frozen=True)
class MetricsReport:
    correlational_score: float
    marginal_wasserstein1_per_channel: np.ndarray
    spectral_density_distance: float

    def __post_init__(self):
        vals = np.concatenate([[self.correlational_score, self.spectral_density_distance], self.marginal_wasserstein1_per_channel])
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError(f"metrics must be finite and nonnegative: {vals}")

    def to_tsv(self) -> str:
        rows = ["metric\tvalue", f"correlational_score\t{self.correlational_score:.6g}"]
        rows += [f"marginal_w1_ch{d}\t{w:.6g}" for d, w in enumerate(self.marginal_wasserstein1_per_channel)]
        rows.append(f"spectral_density_distance\t{self.spectral_density_distance:.6g}")
        return "\n".join(rows)


def _as3d(x):
    x = np.asarray(getattr(x, "samples", x), dtype=float)
    if x.ndim != 3:
        raise ValueError(f"expected (n, L, D) series, got shape {x.shape}")
    return x


def _same_dims(a, b, need_L=False):
    if a.shape[2] != b.shape[2]:
        raise ValueError(f"channel count differs: {a.shape[2]} vs {b.shape[2]}")
    if need_L and a.shape[1] != b.shape[1]:
        raise ValueError(f"sequence length differs: {a.shape[1]} vs {b.shape[1]}")


def correlation_matrix(x, std_floor: float = STD_FLOOR) -> np.ndarray:
    flat = _as3d(x).reshape(-1, np.shape(_as3d(x))[-1])
    c = flat - flat.mean(0)
    std = c.std(0)
    if np.any(std < std_floor):
        warnings.warn(f"constant channels {np.flatnonzero(std < std_floor).tolist()}; correlation floored")
        std = np.maximum(std, std_floor)
    return (c.T @ c / flat.shape[0]) / np.outer(std, std)


def correlational_score(real, synth) -> float:
    """||Corr_real - Corr_synth||_F / D with Pearson correlations over flattened time."""
    r, s = _as3d(real), _as3d(synth)
    _same_dims(r, s)
    return float(np.linalg.norm(correlation_matrix(r) - correlation_matrix(s)) / r.shape[2])


def marginal_wasserstein1(real, synth) -> np.ndarray:
    r, s = _as3d(real), _as3d(synth)
    _same_dims(r, s)
    return np.array([wasserstein_distance(r[..., d].ravel(), s[..., d].ravel()) for d in range(r.shape[2])])


def mean_power_spectrum(x) -> np.ndarray:
    """Mean |X_k|^2 over samples for all L bins of the unitary DFT, shape (L, D)."""
    return np.mean(np.abs(np.fft.fft(_as3d(x), axis=1, norm="ortho")) ** 2, axis=0)


def spectral_density_distance(real, synth) -> float:
    r, s = _as3d(real), _as3d(synth)
    _same_dims(r, s, need_L=True)
    return float(np.mean(np.abs(mean_power_spectrum(r) - mean_power_spectrum(s)).sum(0)))


def evaluate(real, synth) -> MetricsReport:
    return MetricsReport(correlational_score(real, synth), marginal_wasserstein1(real, synth), spectral_density_distance(real, synth))
