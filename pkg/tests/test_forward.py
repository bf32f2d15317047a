import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specdiff.forward import forward_marginal, forward_step, temporal_forward_marginal
from specdiff.noise import build_noise_model, compress_noise
from specdiff.schedule import NoiseSchedule, build_schedule
from specdiff.spectral import COMPRESSED, SpectralFormError, SpectralState, compress, dft


def two_step():
    b = np.array([0.2, 0.1])
    return NoiseSchedule("custom", 2, b, 1 - b, np.cumprod(1 - b))


def scalar_state(x):
    return SpectralState(np.array([[x]]), np.array([[0.0]]), COMPRESSED, 3)


def test_closed_form_example():
    s = two_step()
    out = forward_marginal(scalar_state(1.0), 2, s, build_noise_model(3), None, noise=scalar_state(0.5))
    assert np.isclose(out.state.real[0, 0], np.sqrt(0.72) + np.sqrt(0.28) * 0.5)
    assert np.isclose(out.state.real[0, 0], 1.113103, atol=1e-6)


def test_requires_compressed_origin(rng):
    s = build_schedule()
    with pytest.raises(SpectralFormError):
        forward_marginal(dft(np.zeros((8, 1))), 3, s, build_noise_model(8), rng)


@given(st.integers(2, 32), st.integers(1, 1000), st.integers(0, 2**31 - 1))
def test_commutes_with_transform(L, t, seed):
    # noising in time then transforming equals transforming then noising, given the same noise
    s = build_schedule()
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal((L, 2))
    x0 -= x0.mean(0)
    xt = temporal_forward_marginal(x0, t, s, np.random.default_rng(seed + 1))
    eps = (xt - np.sqrt(s.alpha_bar(t)) * x0) / np.sqrt(1 - s.alpha_bar(t))
    m = build_noise_model(L)
    out = forward_marginal(compress(dft(x0)), t, s, m, None, noise=compress_noise(dft(eps), m))
    expect = compress(dft(xt), check_dc=False)
    np.testing.assert_allclose(out.state.real, expect.real, atol=1e-10)
    np.testing.assert_allclose(out.state.imag, expect.imag, atol=1e-10)


def test_imag_nyquist_stays_zero(rng):
    s = build_schedule()
    m = build_noise_model(8)
    x0 = rng.standard_normal((64, 8, 3))
    x0 -= x0.mean(1, keepdims=True)
    out = forward_marginal(compress(dft(x0)), rng.integers(1, 1001, 64), s, m, rng)
    assert np.all(out.state.imag[:, -1] == 0)


def test_marginal_statistics(rng):
    s = build_schedule()
    m = build_noise_model(9)
    N, t = 50_000, 300
    origin = SpectralState(np.full((N, 4, 1), 0.7), np.full((N, 4, 1), -0.3), COMPRESSED, 9)
    out = forward_marginal(origin, t, s, m, rng)
    ab = s.alpha_bar(t)
    tol = 5 / np.sqrt(N)
    np.testing.assert_allclose(out.state.real.mean(0)[:, 0], np.sqrt(ab) * 0.7, atol=tol)
    np.testing.assert_allclose(out.state.imag.var(0)[:, 0], (1 - ab) * m.var_imag, atol=tol)


def test_iterated_steps_match_marginal_variance(rng):
    s = build_schedule("linear", 50, 1e-3, 0.2)
    m = build_noise_model(8)
    N = 40_000
    state = SpectralState(np.ones((N, 4, 1)), np.zeros((N, 4, 1)), COMPRESSED, 8)
    for t in range(1, 51):
        state = forward_step(state, t, s, m, rng)
    ab = s.alpha_bar(50)
    tol = 5 / np.sqrt(N)
    np.testing.assert_allclose(state.real.mean(0)[:, 0], np.sqrt(ab), atol=tol)
    np.testing.assert_allclose(state.real.var(0)[:, 0], (1 - ab) * m.var_real, atol=tol)
    np.testing.assert_allclose(state.imag.var(0)[:, 0], (1 - ab) * m.var_imag, atol=tol)


def test_temporal_t0_is_identity(rng):
    x0 = rng.standard_normal((6, 2))
    np.testing.assert_array_equal(temporal_forward_marginal(x0, 0, build_schedule(), rng), x0)
