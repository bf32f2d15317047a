import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specdiff.spectral import (
    COMPRESSED,
    FULL,
    HermitianResidueWarning,
    NormalizationError,
    SpectralFormError,
    SpectralState,
    SymmetryError,
    compress,
    compressed_to_series,
    decompress,
    dft,
    hermitian_defect,
    idft,
    series_to_compressed,
)


def dft_matrix(L):
    n = np.arange(L)
    return np.exp(-2j * np.pi * np.outer(n, n) / L) / np.sqrt(L)


def series(L, D=1, seed=0, centered=False):
    x = np.random.default_rng(seed).standard_normal((L, D))
    return x - x.mean(0) if centered else x


lengths = st.integers(2, 64)
seeds = st.integers(0, 2**31 - 1)


def test_constant_series_lands_on_dc():
    s = dft(np.ones(4))
    np.testing.assert_allclose(s.real[:, 0], [2, 0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(s.imag[:, 0], 0, atol=1e-15)


def test_alternating_pair_lands_on_nyquist():
    s = dft(np.array([1.0, -1.0]))
    np.testing.assert_allclose(s.real[:, 0], [0, np.sqrt(2)], atol=1e-15)


@given(lengths, seeds)
def test_matches_direct_matrix(L, seed):
    x = series(L, 3, seed)
    np.testing.assert_allclose(dft(x).complex, dft_matrix(L) @ x, atol=1e-12)


@given(lengths, seeds)
def test_roundtrip_and_norm(L, seed):
    x = series(L, 2, seed)
    s = dft(x)
    np.testing.assert_allclose(idft(s), x, atol=1e-12)
    assert np.isclose(np.sum(np.abs(s.complex) ** 2), np.sum(x**2), rtol=1e-12)


@given(lengths, seeds)
def test_output_is_exactly_hermitian(L, seed):
    s = dft(series(L, 2, seed))
    assert hermitian_defect(s) == 0
    assert np.all(s.imag[0] == 0)
    if L % 2 == 0:
        assert np.all(s.imag[L // 2] == 0)


def test_batched_axes():
    x = np.random.default_rng(1).standard_normal((5, 7, 12, 3))
    s = dft(x)
    assert s.real.shape == x.shape
    np.testing.assert_allclose(s.complex[2, 3], dft(x[2, 3]).complex)


def test_non_hermitian_input_warns():
    s = dft(series(8))
    imag = s.imag.copy()
    imag[1] += 0.3  # bin 1 no longer mirrors bin 7
    bad = SpectralState(s.real, imag, FULL, 8)
    with pytest.warns(HermitianResidueWarning):
        _, residue = idft(bad, return_residue=True)
    assert residue > 0.1


def test_hermitian_input_does_not_warn():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        idft(dft(series(16)))


def test_compress_keeps_positive_half():
    a, b, c = 0.7, -1.2, 0.4
    z = np.array([0, a + 1j * b, c, a - 1j * b])[:, None]
    out = compress(SpectralState.from_complex(z, FULL, 4))
    assert out.form == COMPRESSED
    np.testing.assert_allclose(out.complex[:, 0], [a + 1j * b, c])


def test_decompress_small_cases():
    s2 = SpectralState(np.array([[0.9]]), np.array([[0.0]]), COMPRESSED, 2)
    np.testing.assert_allclose(decompress(s2).complex[:, 0], [0, 0.9])
    s3 = SpectralState.from_complex(np.array([[1 + 2j]]), COMPRESSED, 3)
    np.testing.assert_allclose(decompress(s3).complex[:, 0], [0, 1 + 2j, 1 - 2j])


def test_compress_forces_nyquist_imag_zero():
    z = dft(series(8, centered=True)).complex.copy()
    z[4] += 1e-12j  # tiny defect below the symmetry tolerance
    out = compress(SpectralState.from_complex(z, FULL, 8))
    assert np.all(out.imag[-1] == 0)


@given(lengths, seeds)
def test_compress_decompress_roundtrip(L, seed):
    x = series(L, 2, seed, centered=True)
    np.testing.assert_allclose(compressed_to_series(series_to_compressed(x)), x, atol=1e-12)
    s = dft(x)
    np.testing.assert_allclose(decompress(compress(s)).complex, s.complex, atol=1e-12)


def test_uncentered_series_is_rejected():
    with pytest.raises(NormalizationError):
        series_to_compressed(series(8) + 1.0)


def test_asymmetric_spectrum_is_rejected():
    s = dft(series(8, centered=True))
    z = s.complex.copy()
    z[1] += 0.5
    with pytest.raises(SymmetryError):
        compress(SpectralState.from_complex(z, FULL, 8))


def test_form_mismatch_errors():
    c = series_to_compressed(series(8, centered=True))
    with pytest.raises(SpectralFormError):
        compress(c)
    with pytest.raises(SpectralFormError):
        idft(c)
    with pytest.raises(SpectralFormError):
        decompress(dft(series(8)))


def test_rejects_bad_series():
    with pytest.raises(ValueError):
        dft(np.array([1.0]))
    with pytest.raises(ValueError):
        dft(np.array([1.0, np.nan, 0.0]))
    with pytest.raises(ValueError):
        SpectralState(np.zeros((3, 1)), np.zeros((3, 1)), COMPRESSED, 8)
