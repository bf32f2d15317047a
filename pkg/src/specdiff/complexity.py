"""Closed-form FLOP accounting for temporal vs two-branch spectral denoisers.

Convention: one multiply-add counts as one FLOP. Per block, attention costs
2 L^2 C (score and value matmuls) and the feed-forward 8 L C^2 (two C <-> 4C
maps). The spectral model runs two branches of K = floor(L/2) tokens and pays
one forward/inverse FFT pair per sample (2 * 5 L log2 L).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import denoiser
from .spectral import compress, dft

FLOP_CONVENTION = "1 multiply-add = 1 FLOP"


@dataclass(frozen=True)
class FlopsBreakdown:
    sequence_length: int
    width: int
    blocks: int
    heads: int
    attention_flops_temporal: float
    attention_flops_pacodi: float
    linear_flops_temporal: float
    linear_flops_pacodi: float
    fft_overhead_flops: float
    elementwise_flops_temporal: float
    elementwise_flops_pacodi: float

    @property
    def L(self):
        return self.sequence_length

    @property
    def C(self):
        return self.width

    @property
    def attention_cost_ratio(self) -> float:
        """Spectral attention FLOPs as a fraction of temporal attention FLOPs."""
        return self.attention_flops_pacodi / self.attention_flops_temporal

    @property
    def linear_cost_ratio(self) -> float:
        return self.linear_flops_pacodi / self.linear_flops_temporal

    @property
    def savings_ratio_attention(self) -> float:
        return 1.0 - self.attention_cost_ratio

    @property
    def total_temporal(self) -> float:
        return self.attention_flops_temporal + self.linear_flops_temporal

    @property
    def total_pacodi(self) -> float:
        return self.attention_flops_pacodi + self.linear_flops_pacodi + self.fft_overhead_flops

    @property
    def savings_ratio_total(self) -> float:
        """Headline ratio: attention + linear + FFT, elementwise terms excluded."""
        return 1.0 - self.total_pacodi / self.total_temporal

    @property
    def savings_ratio_extended(self) -> float:
        """Same as the headline ratio but with softmax/normalization/activation costs added."""
        t = self.total_temporal + self.elementwise_flops_temporal
        p = self.total_pacodi + self.elementwise_flops_pacodi
        return 1.0 - p / t


def _elementwise(n_tokens, C, heads, blocks):
    # softmax (exp, sum, divide) over heads x n^2, two layer norms (~5 ops per
    # element), SiLU on the 4C hidden layer (~4 ops), residual adds
    per_block = 3 * heads * n_tokens**2 + 2 * 5 * n_tokens * C + 4 * n_tokens * 4 * C + 2 * n_tokens * C
    return blocks * per_block


def count_flops(L: int, C: int, blocks: int = 1, heads: int = 1) -> FlopsBreakdown:
    for name, val in (("L", L), ("C", C), ("blocks", blocks), ("heads", heads)):
        if val <= 0:
            raise ValueError(f"{name} must be positive, got {val}")
    if L < 2:
        raise ValueError("L must be at least 2 to have a non-DC bin")
    K = L // 2
    return FlopsBreakdown(
        sequence_length=L,
        width=C,
        blocks=blocks,
        heads=heads,
        attention_flops_temporal=blocks * 2.0 * L * L * C,
        attention_flops_pacodi=blocks * 2.0 * (2.0 * K * K * C),
        linear_flops_temporal=blocks * 8.0 * L * C * C,
        linear_flops_pacodi=blocks * 2.0 * (8.0 * K * C * C),
        fft_overhead_flops=2.0 * 5.0 * L * math.log2(L),
        elementwise_flops_temporal=float(_elementwise(L, C, heads, blocks)),
        elementwise_flops_pacodi=float(2 * _elementwise(K, C, heads, blocks)),
    )


def width_equals_length(L: int) -> int:
    return L


def savings_curve(L_list, C_rule=width_equals_length, blocks: int = 1, heads: int = 1) -> list[tuple[int, int, float, float]]:
    """Rows of (L, C, attention savings, total savings)."""
    rows = []
    for L in L_list:
        b = count_flops(int(L), int(C_rule(int(L))), blocks, heads)
        rows.append((b.L, b.C, b.savings_ratio_attention, b.savings_ratio_total))
    return rows


def flops_table(L_list, C_rule=width_equals_length, blocks: int = 1, heads: int = 1, rule_label: str = "C=L") -> str:
    lines = [
        f"# {FLOP_CONVENTION}; width rule {rule_label}; blocks={blocks}",
        "L\tC\tattn_temporal\tattn_pacodi\tlinear_temporal\tlinear_pacodi\tfft_overhead\tsavings_attention\tsavings_total\tsavings_extended",
    ]
    for L in L_list:
        b = count_flops(int(L), int(C_rule(int(L))), blocks, heads)
        lines.append(
            f"{b.L}\t{b.C}\t{b.attention_flops_temporal:.0f}\t{b.attention_flops_pacodi:.0f}\t"
            f"{b.linear_flops_temporal:.0f}\t{b.linear_flops_pacodi:.0f}\t{b.fft_overhead_flops:.1f}\t"
            f"{b.savings_ratio_attention:.6f}\t{b.savings_ratio_total:.6f}\t{b.savings_ratio_extended:.6f}"
        )
    return "\n".join(lines)


SPARK = " ▁▂▃▄▅▆▇█"


def sparkline(values, lo: float | None = None, hi: float | None = None) -> str:
    v = np.asarray(values, dtype=float)
    lo = v.min() if lo is None else lo
    hi = v.max() if hi is None else hi
    if hi <= lo:
        return SPARK[-1] * len(v)
    idx = np.clip(np.round((v - lo) / (hi - lo) * (len(SPARK) - 1)), 0, len(SPARK) - 1).astype(int)
    return "".join(SPARK[i] for i in idx)


def plot_savings(rows, path: str, title: str = "FLOP savings vs sequence length"):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    L = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(L, [r[2] for r in rows], "o-", label="attention")
    ax.plot(L, [r[3] for r in rows], "s-", label="total")
    ax.axhline(0.5, color="grey", lw=0.8, ls="--")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("sequence length L")
    ax.set_ylabel("savings ratio")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ------------------------------------------------------------------ timings


def _temporal_params(L, D, C, blocks, rng):
    s = 1.0 / math.sqrt(C)
    u = lambda *shape: rng.uniform(-s, s, shape)
    p = {"in": rng.uniform(-1, 1, (D, C)), "head": u(C, D)}
    for b in range(blocks):
        p[f"{b}.attn"] = (u(C, C), u(C, C), u(C, C), u(C, C))
        p[f"{b}.ffn"] = (u(C, 4 * C), np.zeros(4 * C), u(4 * C, C), np.zeros(C))
    return p


def temporal_forward(p, x, heads, blocks):
    """Single-sequence transformer on L time steps; the baseline being compared."""
    h = x @ p["in"]
    ones = np.ones(h.shape[-1])
    zeros = np.zeros(h.shape[-1])
    for b in range(blocks):
        a, _ = denoiser._attention(denoiser._layernorm(h, ones, zeros)[0], *p[f"{b}.attn"], heads)
        h = h + a
        f, _ = denoiser._ffn(denoiser._layernorm(h, ones, zeros)[0], *p[f"{b}.ffn"])
        h = h + f
    return h @ p["head"]


def measure_wall_time(L_list, C: int = 32, reps: int = 5, D: int = 1, heads: int = 4, blocks: int = 2, batch: int = 8, seed: int = 0):
    """Median wall time (ms) of one forward pass: temporal baseline vs spectral model.

    The spectral timing includes the forward DFT and compression.
    Informational only.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for L in L_list:
        K = L // 2
        x = rng.standard_normal((batch, L, D))
        x -= x.mean(1, keepdims=True)
        tp = _temporal_params(L, D, C, blocks, rng)
        cfg = denoiser.DenoiserConfig(K=K, D=D, C=C, heads=heads, blocks=blocks)
        sp = denoiser.init_params(cfg, rng)
        t = np.full(batch, 10)

        def run_spectral():
            z = compress(dft(x))
            return denoiser.forward(sp, cfg, z.real, z.imag, t)

        temporal_ms, spectral_ms = [], []
        for _ in range(reps):
            t0 = time.perf_counter()
            temporal_forward(tp, x, heads, blocks)
            temporal_ms.append(1e3 * (time.perf_counter() - t0))
            t0 = time.perf_counter()
            run_spectral()
            spectral_ms.append(1e3 * (time.perf_counter() - t0))
        rows.append((L, float(np.median(temporal_ms)), float(np.median(spectral_ms))))
    return rows
