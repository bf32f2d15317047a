"""Unitary DFT of real multichannel series and lossless Hermitian compression.

Arrays follow the layout ``(..., L, D)``: any number of leading batch axes,
then time (or frequency bin), then channel. The transform always acts along
axis ``-2``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

FULL = "full"
COMPRESSED = "compressed"

# Default tolerances, relative to the per-sample spectrum norm.
DC_TOL = 1e-8
SYMMETRY_TOL = 1e-8
IMAG_RESIDUE_TOL = 1e-9


class SpectralFormError(ValueError):
    """Operation received a spectrum in the wrong form."""


class NormalizationError(ValueError):
    """DC bin is not zero, so the series is not centered."""


class SymmetryError(ValueError):
    """Full spectrum violates Hermitian symmetry."""


class HermitianResidueWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SpectralState:
    """Real and imaginary parts of a spectrum.

    ``real``/``imag`` have shape ``(..., bins, D)``. For the full form
    ``bins == length``; for the compressed form ``bins == length // 2`` and the
    rows are frequency indices ``1..K``.
    """

    real: np.ndarray
    imag: np.ndarray
    form: str
    length: int

    def __post_init__(self):
        if self.real.shape != self.imag.shape:
            raise ValueError(f"real/imag shape mismatch: {self.real.shape} vs {self.imag.shape}")
        if self.form not in (FULL, COMPRESSED):
            raise ValueError(f"unknown spectral form {self.form!r}")
        expected = self.length if self.form == FULL else self.length // 2
        if self.real.ndim < 2 or self.real.shape[-2] != expected:
            raise ValueError(
                f"{self.form} spectrum of length {self.length} needs {expected} bins, "
                f"got shape {self.real.shape}"
            )

    @property
    def bins(self) -> int:
        return self.real.shape[-2]

    @property
    def complex(self) -> np.ndarray:
        return self.real + 1j * self.imag

    @classmethod
    def from_complex(cls, z: np.ndarray, form: str, length: int) -> "SpectralState":
        return cls(np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag), form, length)


def _as_series(series) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim < 2:
        raise ValueError("series must have at least a time axis")
    if x.shape[-2] < 2:
        raise ValueError(f"series length must be >= 2, got {x.shape[-2]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    return x


def dft(series) -> SpectralState:
    """Unitary (1/sqrt(L)) DFT of a real series along the time axis.

    A 1-D input is treated as a single channel. The negative-frequency half is
    filled by exact conjugate mirroring, so the output is Hermitian-symmetric
    bit for bit and the DC (and even-L Nyquist) imaginary parts are exactly 0.
    """
    x = _as_series(series)
    L = x.shape[-2]
    half = np.fft.rfft(x, axis=-2, norm="ortho")
    full = np.empty(x.shape, dtype=np.complex128)
    full[..., : half.shape[-2], :] = half
    k = np.arange(half.shape[-2], L)
    full[..., k, :] = np.conj(full[..., L - k, :])
    return SpectralState.from_complex(full, FULL, L)


def idft(spectrum: SpectralState, *, imag_tol: float = IMAG_RESIDUE_TOL, return_residue: bool = False):
    """Inverse of :func:`dft`. Returns the real part of the synthesis.

    A spectrum that is not Hermitian-symmetric produces an imaginary residue;
    when it exceeds ``imag_tol`` times the spectrum norm a
    :class:`HermitianResidueWarning` is emitted.
    """
    if spectrum.form != FULL:
        raise SpectralFormError("idft needs a full spectrum; decompress first")
    z = np.fft.ifft(spectrum.complex, axis=-2, norm="ortho")
    residue = float(np.linalg.norm(z.imag))
    scale = float(np.linalg.norm(spectrum.complex))
    if residue > imag_tol * max(scale, 1e-300):
        warnings.warn(
            f"inverse DFT has imaginary residue {residue:.3e} (spectrum norm {scale:.3e}); "
            "input is not Hermitian-symmetric",
            HermitianResidueWarning,
            stacklevel=2,
        )
    x = np.ascontiguousarray(z.real)
    return (x, residue) if return_residue else x


def _sample_norms(z: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(z) ** 2, axis=(-2, -1)))


def hermitian_defect(spectrum: SpectralState) -> np.ndarray:
    """Per-sample max_k |X_k - conj(X_{L-k})| over k = 1..L-1."""
    z = spectrum.complex
    L = spectrum.length
    k = np.arange(1, L)
    d = np.abs(z[..., k, :] - np.conj(z[..., L - k, :]))
    return d.max(axis=(-2, -1)) if d.size else np.zeros(z.shape[:-2])


def compress(
    spectrum: SpectralState,
    *,
    dc_tol: float = DC_TOL,
    symmetry_tol: float = SYMMETRY_TOL,
    check_dc: bool = True,
) -> SpectralState:
    """Keep bins ``1..K`` (K = L // 2) of a Hermitian spectrum.

    ``check_dc=False`` drops a nonzero DC bin silently; that is what noise
    compression needs, since white noise has a random DC coefficient.
    """
    if spectrum.form != FULL:
        raise SpectralFormError("compress needs a full spectrum")
    L = spectrum.length
    z = spectrum.complex
    norms = _sample_norms(z)
    if check_dc:
        dc = np.abs(z[..., 0, :]).max(axis=-1)
        if np.any(dc > dc_tol * norms):
            raise NormalizationError(
                f"DC bin magnitude {float(np.max(dc)):.3e} exceeds tolerance; center each sample first"
            )
    defect = hermitian_defect(spectrum)
    if np.any(defect > symmetry_tol * norms):
        raise SymmetryError(f"Hermitian symmetry violated (max defect {float(np.max(defect)):.3e})")
    K = L // 2
    real = spectrum.real[..., 1 : K + 1, :].copy()
    imag = spectrum.imag[..., 1 : K + 1, :].copy()
    if L % 2 == 0:
        imag[..., K - 1, :] = 0.0
    return SpectralState(real, imag, COMPRESSED, L)


def decompress(spectrum: SpectralState) -> SpectralState:
    """Rebuild the full spectrum: DC = 0, negative bins by conjugation."""
    if spectrum.form != COMPRESSED:
        raise SpectralFormError("decompress needs a compressed spectrum")
    L = spectrum.length
    K = L // 2
    shape = spectrum.real.shape[:-2] + (L, spectrum.real.shape[-1])
    real = np.zeros(shape)
    imag = np.zeros(shape)
    real[..., 1 : K + 1, :] = spectrum.real
    imag[..., 1 : K + 1, :] = spectrum.imag
    if L % 2 == 0:
        imag[..., K, :] = 0.0
    k = np.arange(K + 1, L)
    real[..., k, :] = real[..., L - k, :]
    imag[..., k, :] = -imag[..., L - k, :]
    return SpectralState(real, imag, FULL, L)


def series_to_compressed(series, **kw) -> SpectralState:
    return compress(dft(series), **kw)


def compressed_to_series(spectrum: SpectralState) -> np.ndarray:
    return idft(decompress(spectrum))
