"""Hermitian complex Gaussian noise: covariance model, sampling, Mahalanobis norm."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import COMPRESSED, SpectralFormError, SpectralState, compress, dft


@dataclass(frozen=True)
class SpectralNoiseModel:
    """Second-order structure of the unitary DFT of N(0, sigma^2 I) noise.

    ``cov_real``/``cov_imag`` are the full L x L matrices (diagonal plus
    anti-diagonal). ``var_*`` and ``weight_*`` live on the compressed bins
    1..K, where the covariance is diagonal; the imaginary Nyquist coordinate
    of an even length has zero variance and weight 0.
    """

    sigma: float
    length: int
    cov_real: np.ndarray
    cov_imag: np.ndarray
    var_real: np.ndarray
    var_imag: np.ndarray
    weight_real: np.ndarray
    weight_imag: np.ndarray

    @property
    def K(self) -> int:
        return self.length // 2


def build_noise_model(L: int, sigma: float = 1.0) -> SpectralNoiseModel:
    if int(L) != L or L < 2:
        raise ValueError(f"length must be an integer >= 2, got {L}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    L = int(L)
    half = sigma**2 / 2.0
    cov_r = np.zeros((L, L))
    cov_i = np.zeros((L, L))
    k = np.arange(L)
    mirror = (L - k) % L
    # diagonal term (k = l) and anti-diagonal term (k + l = 0 mod L);
    # they coincide at DC and Nyquist, doubling the real part and cancelling the imaginary
    np.add.at(cov_r, (k, k), half)
    np.add.at(cov_r, (k, mirror), half)
    np.add.at(cov_i, (k, k), half)
    np.add.at(cov_i, (k, mirror), -half)

    K = L // 2
    var_r = np.diag(cov_r)[1 : K + 1].copy()
    var_i = np.diag(cov_i)[1 : K + 1].copy()
    w_r = 1.0 / var_r
    w_i = np.zeros_like(var_i)
    pos = var_i > 0
    w_i[pos] = 1.0 / var_i[pos]
    return SpectralNoiseModel(float(sigma), L, cov_r, cov_i, var_r, var_i, w_r, w_i)


def compressed_variances(L: int, sigma: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Closed form sigma^2/2 * (1 +- delta_{k, L/2}) for k = 1..K."""
    k = np.arange(1, L // 2 + 1)
    nyq = (2 * k == L).astype(float)
    return sigma**2 / 2 * (1 + nyq), sigma**2 / 2 * (1 - nyq)


def sample_temporal_noise(L: int, D: int, sigma: float, rng: np.random.Generator, size=()) -> np.ndarray:
    size = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
    return sigma * rng.standard_normal(size + (L, D))


def sample_spectral_noise(model: SpectralNoiseModel, D: int, rng: np.random.Generator, size=()) -> SpectralState:
    """Full-form spectral noise, always produced as the DFT of temporal noise."""
    return dft(sample_temporal_noise(model.length, D, model.sigma, rng, size))


def compress_noise(noise: SpectralState, model: SpectralNoiseModel) -> SpectralState:
    if noise.length != model.length:
        raise ValueError(f"noise length {noise.length} != model length {model.length}")
    return compress(noise, check_dc=False)


def sample_compressed_noise(model: SpectralNoiseModel, D: int, rng: np.random.Generator, size=()) -> SpectralState:
    return compress_noise(sample_spectral_noise(model, D, rng, size), model)


def mahalanobis_sq(residual: SpectralState, model: SpectralNoiseModel) -> tuple[np.ndarray, np.ndarray]:
    """Per-branch squared Mahalanobis norms on the compressed manifold.

    Summed over bins and channels; leading batch axes are kept.
    """
    if residual.form != COMPRESSED:
        raise SpectralFormError("Mahalanobis norm is defined on compressed residuals")
    w_r = model.weight_real[:, None]
    w_i = model.weight_imag[:, None]
    return (
        np.sum(w_r * residual.real**2, axis=(-2, -1)),
        np.sum(w_i * residual.imag**2, axis=(-2, -1)),
    )
