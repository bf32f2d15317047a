import numpy as np
import pytest

from specdiff.data import gen_single_frequency, gen_sines
from specdiff.metrics import (
    MetricsReport,
    correlation_matrix,
    correlational_score,
    evaluate,
    mean_power_spectrum,
    spectral_density_distance,
)


def correlated(n, rng):
    # three channels with distinct pairwise correlations, so a permutation changes the matrix
    a = rng.standard_normal((n, 16, 1))
    b = 0.9 * a + 0.3 * rng.standard_normal((n, 16, 1))
    c = 0.2 * a + rng.standard_normal((n, 16, 1))
    return np.concatenate([a, b, c], axis=2)


def test_identical_sets_score_zero(rng):
    x = correlated(50, rng)
    assert correlational_score(x, x) == 0
    assert spectral_density_distance(x, x) == 0


def test_channel_permutation_is_detected(rng):
    x = correlated(200, rng)
    y = x[..., [2, 1, 0]]
    expect = np.linalg.norm(correlation_matrix(x) - correlation_matrix(y)) / 3
    s = correlational_score(x, y)
    assert s > 0.1 and np.isclose(s, expect)


def test_two_channel_swap_is_invisible(rng):
    # a 2x2 correlation matrix is symmetric in its channels
    x = correlated(100, rng)[..., :2]
    assert correlational_score(x, x[..., ::-1]) < 1e-12


def test_pearson_oracle(rng):
    x = correlated(30, rng)
    np.testing.assert_allclose(correlation_matrix(x), np.corrcoef(x.reshape(-1, 3).T), atol=1e-12)


def test_score_shrinks_with_sample_count():
    scores = []
    for n in (50, 500, 5000):
        a = gen_sines(n, 24, 4, np.random.default_rng(n))
        b = gen_sines(n, 24, 4, np.random.default_rng(n + 1))
        scores.append(correlational_score(a, b))
    assert scores[0] > scores[1] > scores[2]


def test_single_frequency_vs_white_noise(rng):
    real = gen_single_frequency(500, 24, 2, 3, rng).samples
    noise = rng.standard_normal(real.shape)
    P = mean_power_spectrum(real)
    assert spectral_density_distance(real, noise) >= P[3].mean()


def test_sample_order_invariance(rng):
    a, b = gen_sines(64, 24, 3, rng).samples, gen_sines(64, 24, 3, rng).samples
    perm = rng.permutation(64)
    assert np.isclose(spectral_density_distance(a, b), spectral_density_distance(a[perm], b))
    assert np.isclose(correlational_score(a, b), correlational_score(a[perm], b))


def test_evaluate_and_report(rng):
    a, b = gen_sines(64, 24, 3, rng).samples, gen_sines(32, 24, 3, rng).samples
    rep = evaluate(a, b)
    assert rep.marginal_wasserstein1_per_channel.shape == (3,)
    assert rep.to_tsv().splitlines()[0] == "metric\tvalue"
    with pytest.raises(ValueError):
        MetricsReport(-1.0, np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        evaluate(a, b[..., :2])


def test_constant_channel_warns(rng):
    x = correlated(10, rng)
    x[..., 2] = 1.0
    with pytest.warns(UserWarning):
        correlational_score(x, correlated(10, rng))
