"""Numerical certification of the noise, factorization, score and loss identities.

Every check returns a :class:`VerificationReport`. Monte-Carlo tolerances are
five standard errors (5 sigma^2 / sqrt(N)), never hand-tuned. Negative
controls are reports with ``expect_fail=True``: they feed a deliberately broken
input through the same estimator and must fail.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import multivariate_normal

from .forward import forward_marginal
from .noise import build_noise_model, compressed_variances, sample_compressed_noise
from .objective import continuous_loss, discrete_loss, noise_to_score
from .sampler import posterior_params
from .schedule import ELBO, SIMPLE, NoiseSchedule, build_schedule, elbo_weight
from .spectral import COMPRESSED, SpectralState, dft

PASS = "pass"
FAIL = "fail"
INFO = "informational"


@dataclass
class VerificationReport:
    name: str
    params: dict
    measurements: list = field(default_factory=list)  # (label, deviation, tolerance)
    informational: bool = False
    expect_fail: bool = False
    wall_time: float = 0.0
    details: dict = field(default_factory=dict)

    def add(self, label: str, deviation: float, tolerance: float):
        self.measurements.append((label, float(deviation), float(tolerance)))

    @property
    def verdict(self) -> str:
        if self.informational:
            return INFO
        return PASS if all(d <= tol for _, d, tol in self.measurements) else FAIL

    @property
    def as_expected(self) -> bool:
        if self.informational:
            return True
        return (self.verdict == FAIL) == self.expect_fail

    def rows(self) -> list[str]:
        params = ";".join(f"{k}={v}" for k, v in self.params.items())
        expect = "expect-fail" if self.expect_fail else ("info" if self.informational else "expect-pass")
        out = []
        for label, dev, tol in self.measurements or [("-", float("nan"), float("nan"))]:
            out.append(f"{self.name}\t{params}\t{label}\t{dev:.6e}\t{tol:.6e}\t{self.verdict}\t{expect}\t{self.wall_time:.3f}")
        return out


ROW_HEADER = "check\tparams\tmeasurement\tdeviation\ttolerance\tverdict\texpectation\twall_time_s"


def mc_tolerance(sigma: float, N: int) -> float:
    return 5.0 * sigma**2 / np.sqrt(N)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        rep = fn(*args, **kwargs)
        rep.wall_time = time.perf_counter() - t0
        return rep

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def spectral_noise_moments(L: int, sigma: float, N: int, rng, *, transform=None, chunk: int = 200_000, mix_alpha: float | None = None):
    """Empirical covariance blocks (RR, II, RI) of DFT-projected white noise.

    ``transform`` maps temporal noise (n, L) to a complex spectrum; the default
    is the unitary DFT. With ``mix_alpha`` each draw is
    sqrt(a) F(e1) + sqrt(1 - a) F(e2).
    """
    if transform is None:
        transform = lambda x: dft(x[..., None]).complex[..., 0]
    s = np.zeros(2 * L)
    ss = np.zeros((2 * L, 2 * L))
    done = 0
    while done < N:
        n = min(chunk, N - done)
        e = sigma * rng.standard_normal((n, L))
        z = transform(e)
        if mix_alpha is not None:
            e2 = sigma * rng.standard_normal((n, L))
            z = np.sqrt(mix_alpha) * z + np.sqrt(1 - mix_alpha) * transform(e2)
        y = np.concatenate([z.real, z.imag], axis=1)
        s += y.sum(0)
        ss += y.T @ y
        done += n
    mean = s / N
    cov = ss / N - np.outer(mean, mean)
    return cov[:L, :L], cov[L:, L:], cov[:L, L:]


@_timed
def check_orthogonality(L: int, sigma: float, N: int, rng) -> VerificationReport:
    rep = VerificationReport("orthogonality", {"L": L, "sigma": sigma, "N": N})
    _, _, cri = spectral_noise_moments(L, sigma, N, rng)
    rep.add("max|cov(eps_r,eps_i)|", np.abs(cri).max(), mc_tolerance(sigma, N))
    return rep


@_timed
def check_covariance_structure(L: int, sigma: float, N: int, rng, *, transform=None, name: str = "covariance_structure") -> VerificationReport:
    rep = VerificationReport(name, {"L": L, "sigma": sigma, "N": N})
    model = build_noise_model(L, sigma)
    crr, cii, cri = spectral_noise_moments(L, sigma, N, rng, transform=transform)
    tol = mc_tolerance(sigma, N)
    rep.add("max|Sigma_r_hat-Sigma_r|", np.abs(crr - model.cov_real).max(), tol)
    rep.add("max|Sigma_i_hat-Sigma_i|", np.abs(cii - model.cov_imag).max(), tol)
    rep.add("max|cov(eps_r,eps_i)|", np.abs(cri).max(), tol)
    rep.details["Sigma_r_hat"] = crr
    rep.details["Sigma_i_hat"] = cii
    return rep


def covariance_negative_control(L: int, sigma: float, N: int, rng) -> VerificationReport:
    """Unnormalized DFT (no 1/sqrt(L)) must not match the unitary covariance."""
    rep = check_covariance_structure(
        L, sigma, N, rng, transform=lambda x: np.fft.fft(x, axis=-1), name="covariance_structure[control:unnormalized]"
    )
    rep.expect_fail = True
    return rep


@_timed
def check_compressed_variances(L: int, sigma: float, N: int, rng) -> VerificationReport:
    rep = VerificationReport("compressed_variances", {"L": L, "sigma": sigma, "N": N})
    model = build_noise_model(L, sigma)
    vr, vi = compressed_variances(L, sigma)
    rep.add("closed_form_vs_Sigma_diag", max(np.abs(vr - model.var_real).max(), np.abs(vi - model.var_imag).max()), 0.0)
    sr = np.zeros(model.K)
    si = np.zeros(model.K)
    nyq_max = 0.0
    done = 0
    while done < N:
        n = min(200_000, N - done)
        z = sample_compressed_noise(model, 1, rng, n)
        sr += (z.real[..., 0] ** 2).sum(0)
        si += (z.imag[..., 0] ** 2).sum(0)
        if L % 2 == 0:
            nyq_max = max(nyq_max, float(np.abs(z.imag[:, -1, 0]).max()))
        done += n
    tol = mc_tolerance(sigma, N)
    rep.add("max|var_r_hat-v_r|", np.abs(sr / N - vr).max(), tol)
    rep.add("max|var_i_hat-v_i|", np.abs(si / N - vi).max(), tol)
    if L % 2 == 0:
        rep.add("max|imag_nyquist|", nyq_max, 0.0)
    return rep


@_timed
def check_additivity(L: int, sigma: float, alpha: float, N: int, rng) -> VerificationReport:
    rep = VerificationReport("additivity", {"L": L, "sigma": sigma, "alpha": alpha, "N": N})
    model = build_noise_model(L, sigma)
    crr, cii, cri = spectral_noise_moments(L, sigma, N, rng, mix_alpha=alpha)
    tol = mc_tolerance(sigma, N)
    rep.add("max|Sigma_r_hat-Sigma_r|", np.abs(crr - model.cov_real).max(), tol)
    rep.add("max|Sigma_i_hat-Sigma_i|", np.abs(cii - model.cov_imag).max(), tol)
    rep.add("max|cov(eps_r,eps_i)|", np.abs(cri).max(), tol)
    e1 = sigma * rng.standard_normal((1000, L, 1))
    e2 = sigma * rng.standard_normal((1000, L, 1))
    a, b = np.sqrt(alpha), np.sqrt(1 - alpha)
    lhs = dft(a * e1 + b * e2).complex
    rhs = a * dft(e1).complex + b * dft(e2).complex
    rep.add("linearity_residual", np.abs(lhs - rhs).max(), 1e-12)
    return rep


def compressed_basis(L: int) -> tuple[np.ndarray, int]:
    """Real matrix M with M @ x = [Re X_1..X_K, Im X_1..X_K'] for a real series x.

    The imaginary Nyquist row (even L) is dropped. Returns (M, K).
    """
    K = L // 2
    n = np.arange(L)
    k = np.arange(1, K + 1)[:, None]
    cos_rows = np.cos(2 * np.pi * k * n / L) / np.sqrt(L)
    sin_rows = -np.sin(2 * np.pi * k * n / L) / np.sqrt(L)
    if L % 2 == 0:
        sin_rows = sin_rows[:-1]
    return np.vstack([cos_rows, sin_rows]), K


def _branch_logpdf(x_prev, x_t, x0, t, schedule, var):
    ab = schedule.alpha_bar(t)
    eps = (x_t - np.sqrt(ab) * x0) / np.sqrt(1 - ab)
    mean, vscale = posterior_params(x_t, eps, t, schedule)
    s2 = vscale * var
    return np.sum(-0.5 * np.log(2 * np.pi * s2) - 0.5 * (x_prev - mean) ** 2 / s2, axis=-1)


def factorization_density_residual(L: int, sigma: float, schedule: NoiseSchedule, t: int, rng, points: int = 100, *, var_scale_error: float = 0.0) -> float:
    """Max |log q(X_{t-1}|X_t,X_0) - [log q(R..) + log q(I..)]| over random points.

    The joint is obtained by generic Gaussian conditioning of the temporal
    chain pushed through the real DFT basis; the product side uses the
    per-branch closed-form posterior. ``var_scale_error`` perturbs the product
    side's variance for negative controls.
    """
    if t < 2:
        raise ValueError("conditional density needs t >= 2 (t = 1 is deterministic)")
    M, K = compressed_basis(L)
    nr = K
    a = schedule.alpha(t)
    ab = schedule.alpha_bar(t)
    ab_prev = schedule.alpha_bar(t - 1)
    G = sigma**2 * (M @ M.T)
    c11 = (1 - ab_prev) * G
    c12 = np.sqrt(a) * (1 - ab_prev) * G
    c22 = (1 - ab) * G
    cond_cov = c11 - c12 @ np.linalg.solve(c22, c12.T)
    cond_cov = (cond_cov + cond_cov.T) / 2
    model = build_noise_model(L, sigma)
    var = np.concatenate([model.var_real, model.var_imag[: M.shape[0] - nr]]) * (1 + var_scale_error)

    worst = 0.0
    for _ in range(points):
        y0 = rng.standard_normal(M.shape[0])
        yt = np.sqrt(ab) * y0 + np.sqrt(1 - ab) * np.sqrt(np.diag(G)) * rng.standard_normal(M.shape[0])
        mean = np.sqrt(ab_prev) * y0 + c12 @ np.linalg.solve(c22, yt - np.sqrt(ab) * y0)
        yprev = mean + np.sqrt(np.diag(cond_cov)) * rng.standard_normal(M.shape[0]) * 1.5
        joint = multivariate_normal(mean, cond_cov).logpdf(yprev)
        split = _branch_logpdf(yprev[:nr], yt[:nr], y0[:nr], t, schedule, var[:nr]) + _branch_logpdf(
            yprev[nr:], yt[nr:], y0[nr:], t, schedule, var[nr:]
        )
        worst = max(worst, abs(joint - split))
    return worst


@_timed
def check_conditional_factorization(L: int, sigma: float, schedule: NoiseSchedule, t: int, N: int, rng, *, origin=None, cross_mix: float = 0.0, var_scale_error: float = 0.0, name: str = "conditional_factorization") -> VerificationReport:
    """Cross-covariance of (R_t, I_t) given a fixed X_0, plus closed-form density additivity.

    ``cross_mix`` leaks real noise into the imaginary branch and
    ``var_scale_error`` breaks the product density; both exist for controls.
    """
    rep = VerificationReport(name, {"L": L, "sigma": sigma, "t": t, "N": N})
    model = build_noise_model(L, sigma)
    K = model.K
    if origin is None:
        origin = SpectralState(rng.standard_normal((K, 1)), rng.standard_normal((K, 1)) * (model.var_imag > 0)[:, None], COMPRESSED, L)
    sr = np.zeros(K)
    si = np.zeros(K)
    sri = np.zeros((K, K))
    done = 0
    while done < N:
        n = min(100_000, N - done)
        noise = sample_compressed_noise(model, 1, rng, n)
        if cross_mix:
            noise = SpectralState(noise.real, noise.imag + cross_mix * noise.real * (model.var_imag > 0)[:, None], COMPRESSED, L)
        batch_origin = SpectralState(np.broadcast_to(origin.real, (n, K, 1)), np.broadcast_to(origin.imag, (n, K, 1)), COMPRESSED, L)
        d = forward_marginal(batch_origin, t, schedule, model, rng, noise=noise)
        r, i = d.state.real[..., 0], d.state.imag[..., 0]
        sr += r.sum(0)
        si += i.sum(0)
        sri += r.T @ i
        done += n
    cross = sri / N - np.outer(sr / N, si / N)
    rep.add("max|cross-cov(R_t,I_t)|", np.abs(cross).max(), mc_tolerance(sigma, N))
    rep.add(
        "log-density additivity residual",
        factorization_density_residual(L, sigma, schedule, t, rng, var_scale_error=var_scale_error),
        1e-8,
    )
    return rep


def factorization_negative_control(L: int, sigma: float, schedule: NoiseSchedule, t: int, N: int, rng) -> VerificationReport:
    rep = check_conditional_factorization(
        L, sigma, schedule, t, N, rng, cross_mix=0.5, var_scale_error=0.1, name="conditional_factorization[control:coupled]"
    )
    rep.expect_fail = True
    return rep


def _log_density_compressed(R, I, R0, I0, ab, model):
    vr = model.var_real[:, None]
    vi = model.var_imag[:, None]
    pos = vi > 0
    lr = -0.5 * np.sum((R - np.sqrt(ab) * R0) ** 2 / ((1 - ab) * vr))
    li = -0.5 * np.sum(np.where(pos, (I - np.sqrt(ab) * I0) ** 2 / ((1 - ab) * np.where(pos, vi, 1.0)), 0.0))
    return lr + li


@_timed
def check_score_identity(L: int, sigma: float, schedule: NoiseSchedule, t: int, rng, points: int = 100, h: float = 1e-6) -> VerificationReport:
    rep = VerificationReport("score_identity", {"L": L, "sigma": sigma, "t": t, "points": points})
    model = build_noise_model(L, sigma)
    K = model.K
    ab = float(schedule.alpha_bar(t))
    worst = 0.0
    for _ in range(points):
        R0 = rng.standard_normal((K, 1))
        I0 = rng.standard_normal((K, 1))
        noise = sample_compressed_noise(model, 1, rng)
        R = np.sqrt(ab) * R0 + np.sqrt(1 - ab) * noise.real
        I = np.sqrt(ab) * I0 + np.sqrt(1 - ab) * noise.imag
        sr, si = noise_to_score(noise, t, schedule, model)
        analytic = np.concatenate([sr.ravel(), si.ravel()])
        fd = np.zeros_like(analytic)
        for j in range(2 * K):
            if j >= K and model.var_imag[j - K] == 0:
                continue  # zero-variance direction: density undefined, excluded
            X = [R.copy(), I.copy()]
            part, idx = divmod(j, K)
            X[part][idx, 0] += h
            up = _log_density_compressed(X[0], X[1], R0, I0, ab, model)
            X[part][idx, 0] -= 2 * h
            dn = _log_density_compressed(X[0], X[1], R0, I0, ab, model)
            fd[j] = (up - dn) / (2 * h)
        scale = np.abs(analytic).max()
        if scale > 0:
            worst = max(worst, np.abs(fd - analytic).max() / scale)
    rep.add("max relative error", worst, 1e-6)
    if L % 2 == 0:
        rep.details["imag_nyquist"] = "excluded (zero variance)"
    return rep


def _random_loss_instance(L, schedule, rng, D=2):
    model = build_noise_model(L, 1.0)
    K = model.K
    t = int(rng.integers(1, schedule.T + 1))
    mask = (model.var_imag > 0)[:, None]
    eps = (rng.standard_normal((K, D)), rng.standard_normal((K, D)) * mask)
    eps_hat = (rng.standard_normal((K, D)), rng.standard_normal((K, D)))
    return model, t, eps, eps_hat


@_timed
def check_loss_equivalence(L: int, schedule: NoiseSchedule, trials: int, rng, *, omit_conversion: bool = False, weighting: str = ELBO) -> VerificationReport:
    """Discrete vs continuous loss on random instances.

    With ``omit_conversion`` the continuous side reuses lambda_t instead of
    lambda_t (1 - alpha_bar_t); the relative gap is then alpha_bar_t / (1 - alpha_bar_t).
    """
    name = "loss_equivalence[control:no-(1-ab)]" if omit_conversion else "loss_equivalence"
    rep = VerificationReport(name, {"L": L, "trials": trials, "weighting": weighting}, expect_fail=omit_conversion)
    errs = []
    for _ in range(trials):
        model, t, eps, eps_hat = _random_loss_instance(L, schedule, rng)
        disc = discrete_loss(eps_hat, eps, t, schedule, model, weighting).total
        score_hat = noise_to_score(eps_hat, t, schedule, model)
        if omit_conversion:
            weight = elbo_weight(schedule, t, weighting)
        elif weighting == SIMPLE:
            # simple-mode lambda(t) is 1 by definition, so convert lambda_t by hand
            weight = elbo_weight(schedule, t, weighting) * (1 - schedule.alpha_bar(t))
        else:
            weight = None
        cont = continuous_loss(score_hat, eps, t, schedule, model, weighting, weight=weight).total
        errs.append(abs(cont - disc) / abs(disc))
    rep.add("max relative error", max(errs), 1e-10)
    rep.details["min_relative_error"] = min(errs)
    return rep


@_timed
def check_trig_orthogonality(T_period: int, k_max: int) -> VerificationReport:
    rep = VerificationReport("trig_orthogonality", {"T": T_period, "k_max": k_max})
    tau = np.arange(1, T_period + 1)
    worst = 0.0
    for k in range(0, k_max + 1):
        s_cos = np.sum(np.cos(2 * np.pi * k * tau / T_period))
        s_sin = np.sum(np.sin(2 * np.pi * k * tau / T_period))
        expected = T_period if k % T_period == 0 else 0.0
        worst = max(worst, abs(s_cos - expected), abs(s_sin))
    rep.add("max deviation from {0,T}", worst, 1e-9)
    return rep


def trig_sums(T_period: int, k: int) -> tuple[float, float]:
    tau = np.arange(1, T_period + 1)
    return float(np.sum(np.cos(2 * np.pi * k * tau / T_period))), float(np.sum(np.sin(2 * np.pi * k * tau / T_period)))


@_timed
def check_mft_marginal_entanglement(coupled: bool, schedule: NoiseSchedule, t: int, N: int, rng, L: int = 8, amplitude: float = 1.0) -> VerificationReport:
    """Cross-covariance of the marginal q(X_t) for a two-atom dataset.

    Coupled atoms: X_0 = +-a(1 + j) with one shared sign, so R_0 = I_0.
    Independent atoms: signs of R_0 and I_0 drawn independently.
    The exact mixture moment is alpha_bar_t * a^2 (coupled) or 0.
    Informational only: it measures how far the marginal is from factorizing.
    """
    rep = VerificationReport("mft_marginal_entanglement", {"coupled": coupled, "t": t, "N": N, "L": L}, informational=True)
    model = build_noise_model(L, 1.0)
    K = model.K
    live = np.arange(K)[model.var_imag > 0]
    sign_r = rng.choice([-1.0, 1.0], size=N)
    sign_i = sign_r if coupled else rng.choice([-1.0, 1.0], size=N)
    R0 = amplitude * sign_r[:, None, None] * np.ones((N, K, 1))
    I0 = amplitude * sign_i[:, None, None] * (model.var_imag > 0)[None, :, None]
    d = forward_marginal(SpectralState(R0, I0, COMPRESSED, L), t, schedule, model, rng)
    r = d.state.real[:, live, 0]
    i = d.state.imag[:, live, 0]
    cross = (r * i).mean(0) - r.mean(0) * i.mean(0)
    oracle = float(schedule.alpha_bar(t)) * amplitude**2 if coupled else 0.0
    rep.details.update({"measured_cross_cov": cross.mean(), "oracle_cross_cov": oracle})
    rep.add("mean cross-cov (measured)", abs(cross.mean()), np.inf)
    rep.add("|measured - oracle|", abs(cross.mean() - oracle), np.inf)
    return rep


DEFAULT_LS = (4, 5, 8, 9, 16, 24)
CHECK_NAMES = (
    "orthogonality",
    "covariance_structure",
    "compressed_variances",
    "additivity",
    "conditional_factorization",
    "score_identity",
    "loss_equivalence",
    "trig_orthogonality",
    "mft_marginal_entanglement",
)


def run_suite(seed: int = 0, N: int = 100_000, Ls=DEFAULT_LS, sigma: float = 1.0, checks=None, schedule: NoiseSchedule | None = None, workers: int = 1) -> list[VerificationReport]:
    """Run the selected checks (default: all) plus their negative controls.

    Each check gets its own RNG stream spawned from ``seed``, so results do not
    depend on ``workers`` or on execution order.
    """
    schedule = schedule or build_schedule()
    selected = list(checks or CHECK_NAMES)
    unknown = set(selected) - set(CHECK_NAMES)
    if unknown:
        raise ValueError(f"unknown checks: {sorted(unknown)}")
    t_mid = schedule.T // 2
    plan = {
        "orthogonality": [lambda r, L=L: check_orthogonality(L, sigma, N, r) for L in Ls],
        "covariance_structure": [lambda r, L=L: check_covariance_structure(L, sigma, N, r) for L in Ls]
        + [lambda r: covariance_negative_control(8, sigma, N, r)],
        "compressed_variances": [lambda r, L=L: check_compressed_variances(L, sigma, N, r) for L in Ls],
        "additivity": [lambda r, L=L, a=a: check_additivity(L, sigma, a, N, r) for L in (8, 9) for a in (0.25, 0.5, 0.9)],
        "conditional_factorization": [lambda r, L=L: check_conditional_factorization(L, sigma, schedule, t_mid, N, r) for L in (8, 9)]
        + [lambda r: factorization_negative_control(8, sigma, schedule, t_mid, N, r)],
        "score_identity": [lambda r, L=L: check_score_identity(L, sigma, schedule, t_mid, r) for L in (8, 9)],
        "loss_equivalence": [lambda r, L=L, w=w: check_loss_equivalence(L, schedule, 1000, r, weighting=w) for L in (8, 9) for w in (ELBO, SIMPLE)]
        + [lambda r: check_loss_equivalence(8, schedule, 1000, r, omit_conversion=True, weighting=SIMPLE)],
        "trig_orthogonality": [lambda r, T=T: check_trig_orthogonality(T, 4 * T) for T in (7, 16, 24)],
        "mft_marginal_entanglement": [
            lambda r, c=c, t=t: check_mft_marginal_entanglement(c, schedule, t, N, r) for c in (True, False) for t in (10, schedule.T)
        ],
    }
    # stream ids are fixed per check family so selecting a subset does not reseed others
    jobs = []
    for fam_idx, fam in enumerate(CHECK_NAMES):
        if fam in selected:
            for j, fn in enumerate(plan[fam]):
                jobs.append((fn, np.random.default_rng([seed, fam_idx, j])))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda job: job[0](job[1]), jobs))
    return [fn(r) for fn, r in jobs]


def suite_exit_code(reports) -> int:
    return 0 if all(r.as_expected for r in reports) else 1
