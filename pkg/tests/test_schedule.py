import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specdiff.schedule import (
    COSINE,
    ELBO,
    LINEAR,
    SIMPLE,
    NoiseSchedule,
    build_schedule,
    continuous_weight,
    continuous_weight_at_step,
    elbo_weight,
)


def two_step(betas=(0.2, 0.1)):
    b = np.array(betas, dtype=float)
    return NoiseSchedule("custom", len(b), b, 1 - b, np.cumprod(1 - b))


def test_two_step_products():
    s = two_step((0.1, 0.2))
    np.testing.assert_allclose([s.alpha_bar(1), s.alpha_bar(2)], [0.9, 0.72])
    assert s.alpha_bar(0) == 1.0


def test_linear_default_reaches_near_zero():
    s = build_schedule(LINEAR, 1000, 1e-4, 2e-2)
    oracle = 1.0
    for b in np.linspace(1e-4, 2e-2, 1000):
        oracle *= 1 - b
    assert np.isclose(s.alpha_bar(1000), oracle, rtol=1e-12)
    assert s.alpha_bar(1000) < 5e-5


@pytest.mark.parametrize("kind", [LINEAR, COSINE])
def test_alpha_bar_strictly_decreasing(kind):
    s = build_schedule(kind, 500)
    ab = s.alpha_bar(np.arange(0, 501))
    assert np.all(np.diff(ab) < 0)
    assert np.all((s.betas > 0) & (s.betas < 1))


def test_elbo_weight_example():
    s = two_step()
    assert np.isclose(elbo_weight(s, 2), 0.1 / (2 * 0.9 * 0.28))
    assert np.isclose(elbo_weight(s, 2), 0.198413, atol=1e-6)
    assert elbo_weight(s, 2, SIMPLE) == 1.0


def test_continuous_weight_example():
    s = two_step()
    w = continuous_weight_at_step(s, 2)
    assert np.isclose(w, 0.198413 * 0.28, atol=1e-6)
    assert np.isclose(w, 0.1 / 1.8, rtol=1e-12)
    assert continuous_weight_at_step(s, 2, SIMPLE) == 1.0


def test_weight_mode_and_range_errors():
    s = build_schedule()
    with pytest.raises(ValueError):
        elbo_weight(s, 3, "bogus")
    with pytest.raises(ValueError):
        s.beta(0)
    with pytest.raises(ValueError):
        s.alpha_bar(1001)


def test_build_rejects_bad_arguments():
    with pytest.raises(ValueError):
        build_schedule(LINEAR, 0)
    with pytest.raises(ValueError):
        build_schedule(LINEAR, 10, 0.5, 0.1)
    with pytest.raises(ValueError):
        build_schedule("quadratic", 10)


def test_short_schedule_warns():
    with pytest.warns(UserWarning):
        build_schedule(LINEAR, 10)


@given(st.floats(0.0, 1.0))
def test_continuous_alpha_bar_tracks_discrete(t):
    s = build_schedule()
    i = max(int(round(t * s.T)), 0)
    # log(1 - beta) = -beta - beta^2/2 - ..., so the log gap accumulates sum(beta^2)/2 ~ 0.09 by t = 1
    c, d = s.alpha_bar_continuous(t), s.alpha_bar(i)
    assert abs(c - d) < 5e-3
    assert abs(np.log(c / d)) < 0.1


def test_integrated_beta_matches_quadrature():
    s = build_schedule()
    grid = np.linspace(0, 1, 200_001)
    q = np.concatenate([[0], np.cumsum((s.beta_continuous(grid[1:]) + s.beta_continuous(grid[:-1])) / 2 * np.diff(grid))])
    for t in (0.0003, 0.25, 0.5, 1.0):
        assert np.isclose(s.integrated_beta(t), np.interp(t, grid, q), rtol=1e-6, atol=1e-9)


def test_continuous_weight_uses_nearest_step():
    s = build_schedule()
    assert np.isclose(continuous_weight(s, 0.5, ELBO), continuous_weight_at_step(s, 500, ELBO))
