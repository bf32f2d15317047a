"""Central finite-difference check of the denoiser's reverse-mode gradients."""
import numpy as np

from specdiff import denoiser


def random_problem(cfg, seed, batch=2, scale=0.3):
    rng = np.random.default_rng(seed)
    p = denoiser.init_params(cfg, rng)
    # move off the init so heads, gains and biases all carry signal
    p = {k: v + scale * rng.standard_normal(v.shape) for k, v in p.items()}
    R = rng.standard_normal((batch, cfg.K, cfg.D))
    I = rng.standard_normal((batch, cfg.K, cfg.D))
    t = rng.integers(1, 1001, batch)
    a_r = rng.standard_normal((batch, cfg.K, cfg.D))
    a_i = rng.standard_normal((batch, cfg.K, cfg.D))
    return p, R, I, t, a_r, a_i, rng


def scalar_loss(p, cfg, R, I, t, a_r, a_i):
    hr, hi = denoiser.forward(p, cfg, R, I, t)
    # quadratic in the outputs so second-order terms are exercised too
    return float(np.sum(a_r * hr + 0.5 * hr**2) + np.sum(a_i * hi + 0.5 * hi**2))


def gradient_check(cfg, n_params=200, seed=0, h=1e-5, floor=1e-6):
    """Max relative error over ``n_params`` random scalar parameters.

    Relative error is |fd - an| / max(|fd|, |an|, floor).
    """
    p, R, I, t, a_r, a_i, rng = random_problem(cfg, seed)
    (hr, hi), cache = denoiser.forward(p, cfg, R, I, t, return_cache=True)
    g = denoiser.backward(p, cache, a_r + hr, a_i + hi)
    names = sorted(p)
    sizes = np.array([p[k].size for k in names])
    # every tensor at least once, the rest spread proportionally to size
    picks = [(k, int(rng.integers(p[k].size))) for k in names]
    flat = rng.choice(len(names), size=max(n_params - len(names), 0), p=sizes / sizes.sum())
    picks += [(names[i], int(rng.integers(sizes[i]))) for i in flat]
    worst, groups = 0.0, set()
    for name, idx in picks:
        orig = p[name].flat[idx]
        p[name].flat[idx] = orig + h
        up = scalar_loss(p, cfg, R, I, t, a_r, a_i)
        p[name].flat[idx] = orig - h
        dn = scalar_loss(p, cfg, R, I, t, a_r, a_i)
        p[name].flat[idx] = orig
        fd = (up - dn) / (2 * h)
        an = g[name].flat[idx]
        worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), floor))
        groups.add(name)
    return worst, len(picks), groups
