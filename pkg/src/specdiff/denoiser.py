"""Two-branch quadrature noise predictor with interactive correction.

The real and imaginary parts of the compressed spectrum are two token
sequences of length K. Each branch runs its own self-attention; the
feed-forward of every block is either shared across the concatenated branch
features (``interactive``) or split per branch (``decoupled``).

Everything is plain numpy in float64 with hand-written reverse mode, so
gradients can be checked against finite differences to high precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BRANCHES = ("re", "im")
INTERACTIVE = "interactive"
DECOUPLED = "decoupled"
LN_EPS = 1e-5

Params = dict  # name -> ndarray
GradientBundle = dict  # name -> ndarray, congruent with Params


@dataclass(frozen=True)
class DenoiserConfig:
    K: int
    D: int
    C: int = 32
    heads: int = 4
    blocks: int = 2
    time_embed_dim: int = 32
    variant: str = INTERACTIVE
    projector: str = "identity"

    def __post_init__(self):
        for name in ("K", "D", "C", "heads", "blocks", "time_embed_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"model.{name} must be positive")
        if self.C % self.heads:
            raise ValueError(f"model width {self.C} not divisible by {self.heads} heads")
        if self.time_embed_dim % 2:
            raise ValueError("time_embed_dim must be even")
        if self.variant not in (INTERACTIVE, DECOUPLED):
            raise ValueError(f"unknown model variant {self.variant!r}")
        if self.projector not in ("identity", "linear"):
            raise ValueError(f"unknown projector {self.projector!r}")


def param_shapes(cfg: DenoiserConfig) -> dict[str, tuple[int, ...]]:
    C, D, E = cfg.C, cfg.D, cfg.time_embed_dim
    shapes = {
        "time.W1": (E, C),
        "time.b1": (C,),
        "time.W2": (C, C),
        "time.b2": (C,),
    }
    for b in BRANCHES:
        shapes[f"{b}.in.W"] = (D, C)
        shapes[f"{b}.in.b"] = (C,)
        shapes[f"{b}.pos"] = (cfg.K, C)  # learned bin-identity embedding
    for i in range(cfg.blocks):
        for b in BRANCHES:
            p = f"blk{i}.{b}"
            shapes[f"{p}.ln1.g"] = (C,)
            shapes[f"{p}.ln1.b"] = (C,)
            for w in ("Wq", "Wk", "Wv", "Wo"):
                shapes[f"{p}.attn.{w}"] = (C, C)
            shapes[f"{p}.ln2.g"] = (C,)
            shapes[f"{p}.ln2.b"] = (C,)
            if cfg.projector == "linear":
                shapes[f"{p}.proj.W"] = (C, C)
            if cfg.variant == DECOUPLED:
                shapes[f"{p}.ffn.W1"] = (C, 4 * C)
                shapes[f"{p}.ffn.b1"] = (4 * C,)
                shapes[f"{p}.ffn.W2"] = (4 * C, C)
                shapes[f"{p}.ffn.b2"] = (C,)
        if cfg.variant == INTERACTIVE:
            shapes[f"blk{i}.ffn.W1"] = (2 * C, 4 * C)
            shapes[f"blk{i}.ffn.b1"] = (4 * C,)
            shapes[f"blk{i}.ffn.W2"] = (4 * C, 2 * C)
            shapes[f"blk{i}.ffn.b2"] = (2 * C,)
    for b in BRANCHES:
        shapes[f"{b}.head.W"] = (C, D)
        shapes[f"{b}.head.b"] = (D,)
    return shapes


def param_count(cfg: DenoiserConfig) -> int:
    return sum(math.prod(s) for s in param_shapes(cfg).values())


def init_params(cfg: DenoiserConfig, rng: np.random.Generator) -> Params:
    """Fan-in uniform init; LayerNorm gains 1; biases and output heads 0."""
    params = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if ".head." in name or leaf.startswith("b"):
            params[name] = np.zeros(shape)
        elif leaf == "g":
            params[name] = np.ones(shape)
        elif ".proj." in name:
            params[name] = np.eye(shape[0])
        else:
            bound = 1.0 / math.sqrt(shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def zeros_like_params(params: Params) -> GradientBundle:
    return {k: np.zeros_like(v) for k, v in params.items()}


def swap_branches(params: Params, cfg: DenoiserConfig) -> Params:
    """Exchange real/imag branch parameters (and the halves of a shared FFN)."""
    out = {}
    for name, v in params.items():
        if ".re." in name or name.startswith("re."):
            out[name.replace("re.", "im.", 1) if name.startswith("re.") else name.replace(".re.", ".im.")] = v
        elif ".im." in name or name.startswith("im."):
            out[name.replace("im.", "re.", 1) if name.startswith("im.") else name.replace(".im.", ".re.")] = v
        else:
            out[name] = v
    C = cfg.C
    if cfg.variant == INTERACTIVE:
        for i in range(cfg.blocks):
            p = f"blk{i}.ffn"
            W1 = params[f"{p}.W1"]
            out[f"{p}.W1"] = np.concatenate([W1[C:], W1[:C]], axis=0)
            W2 = params[f"{p}.W2"]
            out[f"{p}.W2"] = np.concatenate([W2[:, C:], W2[:, :C]], axis=1)
            b2 = params[f"{p}.b2"]
            out[f"{p}.b2"] = np.concatenate([b2[C:], b2[:C]])
    return out


# ---------------------------------------------------------------- primitives


def time_embedding(t, T: int | None = None, dim: int = 32) -> np.ndarray:
    """Sinusoidal embedding of diffusion step(s): [sin(t w_j), cos(t w_j)]."""
    t = np.asarray(t, dtype=float)
    if T is not None and (np.any(t < 0) or np.any(t > T)):
        raise ValueError(f"diffusion step out of range 0..{T}")
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    args = t[..., None] * freqs
    return np.concatenate([np.sin(args), np.cos(args)], axis=-1)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _silu(x):
    s = _sigmoid(x)
    return x * s, s


def _silu_back(dy, x, s):
    return dy * (s + x * s * (1 - s))


def _linear_back(dy, x, W):
    dW = x.reshape(-1, x.shape[-1]).T @ dy.reshape(-1, dy.shape[-1])
    return dy @ W.T, dW


def _layernorm(x, g, b):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc**2).mean(-1, keepdims=True) + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def _layernorm_back(dy, g, cache):
    xhat, inv = cache
    n = xhat.shape[-1]
    dg = np.sum(dy * xhat, axis=tuple(range(dy.ndim - 1)))
    db = np.sum(dy, axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    dx = inv / n * (n * dxhat - dxhat.sum(-1, keepdims=True) - xhat * (dxhat * xhat).sum(-1, keepdims=True))
    return dx, dg, db


def _split_heads(x, h):
    B, K, C = x.shape
    return x.reshape(B, K, h, C // h).transpose(0, 2, 1, 3)


def _merge_heads(x):
    B, h, K, d = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, K, h * d)


def _attention(x, Wq, Wk, Wv, Wo, heads):
    """Bidirectional multi-head self-attention over the token axis."""
    q = _split_heads(x @ Wq, heads)
    k = _split_heads(x @ Wk, heads)
    v = _split_heads(x @ Wv, heads)
    scale = 1.0 / math.sqrt(q.shape[-1])
    s = (q @ k.transpose(0, 1, 3, 2)) * scale
    s = s - s.max(-1, keepdims=True)
    p = np.exp(s)
    p /= p.sum(-1, keepdims=True)
    o = _merge_heads(p @ v)
    return o @ Wo, (x, q, k, v, p, o, scale)


def _attention_back(dy, Wq, Wk, Wv, Wo, heads, cache):
    x, q, k, v, p, o, scale = cache
    do, dWo = _linear_back(dy, o, Wo)
    do = _split_heads(do, heads)
    dp = do @ v.transpose(0, 1, 3, 2)
    dv = p.transpose(0, 1, 3, 2) @ do
    ds = p * (dp - np.sum(dp * p, -1, keepdims=True)) * scale
    dq = ds @ k
    dk = ds.transpose(0, 1, 3, 2) @ q
    dq, dk, dv = _merge_heads(dq), _merge_heads(dk), _merge_heads(dv)
    dx = dq @ Wq.T + dk @ Wk.T + dv @ Wv.T
    xf = x.reshape(-1, x.shape[-1])
    return dx, xf.T @ dq.reshape(xf.shape[0], -1), xf.T @ dk.reshape(xf.shape[0], -1), xf.T @ dv.reshape(xf.shape[0], -1), dWo


def _ffn(x, W1, b1, W2, b2):
    h = x @ W1 + b1
    a, s = _silu(h)
    return a @ W2 + b2, (x, h, s, a)


def _ffn_back(dy, W1, W2, cache):
    x, h, s, a = cache
    da, dW2 = _linear_back(dy, a, W2)
    db2 = dy.reshape(-1, dy.shape[-1]).sum(0)
    dh = _silu_back(da, h, s)
    dx, dW1 = _linear_back(dh, x, W1)
    db1 = dh.reshape(-1, dh.shape[-1]).sum(0)
    return dx, dW1, db1, dW2, db2


# ---------------------------------------------------------------- model


@dataclass
class ForwardCache:
    cfg: DenoiserConfig
    batched: bool
    t: np.ndarray
    entries: dict


def _prepare(cfg, R, I, t):
    R = np.asarray(R, dtype=float)
    I = np.asarray(I, dtype=float)
    batched = R.ndim == 3
    if not batched:
        R, I = R[None], I[None]
    if R.shape != I.shape or R.shape[1:] != (cfg.K, cfg.D):
        raise ValueError(f"inputs must have shape (B, {cfg.K}, {cfg.D}), got {R.shape} and {I.shape}")
    t = np.broadcast_to(np.asarray(t, dtype=float), (R.shape[0],))
    return R, I, t, batched


def forward(params: Params, cfg: DenoiserConfig, R, I, t, *, return_cache: bool = False):
    """Predict (eps_r, eps_i) for compressed states R, I at diffusion step t.

    ``R`` and ``I`` have shape ``(K, D)`` or ``(B, K, D)``; ``t`` is a scalar
    or one step per batch element.
    """
    R, I, t, batched = _prepare(cfg, R, I, t)
    c = {}
    P = params
    C = cfg.C

    e0 = time_embedding(t, dim=cfg.time_embed_dim)
    h1 = e0 @ P["time.W1"] + P["time.b1"]
    a1, s1 = _silu(h1)
    temb = a1 @ P["time.W2"] + P["time.b2"]
    c["time"] = (e0, h1, s1, a1)

    x = {}
    for b, inp in zip(BRANCHES, (R, I)):
        x[b] = inp @ P[f"{b}.in.W"] + P[f"{b}.in.b"] + P[f"{b}.pos"] + temb[:, None, :]
        c[f"{b}.in"] = inp

    for i in range(cfg.blocks):
        n2 = {}
        for b in BRANCHES:
            p = f"blk{i}.{b}"
            n1, c[f"{p}.ln1"] = _layernorm(x[b], P[f"{p}.ln1.g"], P[f"{p}.ln1.b"])
            att, c[f"{p}.attn"] = _attention(
                n1, P[f"{p}.attn.Wq"], P[f"{p}.attn.Wk"], P[f"{p}.attn.Wv"], P[f"{p}.attn.Wo"], cfg.heads
            )
            x[b] = x[b] + att
            n2[b], c[f"{p}.ln2"] = _layernorm(x[b], P[f"{p}.ln2.g"], P[f"{p}.ln2.b"])
            if cfg.projector == "linear":
                c[f"{p}.proj"] = n2[b]
                n2[b] = n2[b] @ P[f"{p}.proj.W"]
        if cfg.variant == INTERACTIVE:
            f = f"blk{i}.ffn"
            z = np.concatenate([n2["re"], n2["im"]], axis=-1)
            o, c[f] = _ffn(z, P[f"{f}.W1"], P[f"{f}.b1"], P[f"{f}.W2"], P[f"{f}.b2"])
            x["re"] = x["re"] + o[..., :C]
            x["im"] = x["im"] + o[..., C:]
        else:
            for b in BRANCHES:
                f = f"blk{i}.{b}.ffn"
                o, c[f] = _ffn(n2[b], P[f"{f}.W1"], P[f"{f}.b1"], P[f"{f}.W2"], P[f"{f}.b2"])
                x[b] = x[b] + o

    out = []
    for b in BRANCHES:
        # no final normalization: the head sees the raw residual stream, so the
        # prediction can grow with the input instead of saturating
        nf = x[b]
        c[f"{b}.head"] = nf
        out.append(nf @ P[f"{b}.head.W"] + P[f"{b}.head.b"])

    er, ei = out
    if not batched:
        er, ei = er[0], ei[0]
    if return_cache:
        return (er, ei), ForwardCache(cfg, batched, t, c)
    return er, ei


def decoupled_forward(params: Params, cfg: DenoiserConfig, R, I, t, *, return_cache: bool = False):
    """Forward pass of the strictly decoupled ablation (no cross-branch wiring)."""
    if cfg.variant != DECOUPLED:
        raise ValueError("decoupled_forward needs a config with variant='decoupled'")
    return forward(params, cfg, R, I, t, return_cache=return_cache)


def backward(params: Params, cache: ForwardCache | None, grad_r, grad_i, *, input_grads: bool = False):
    """Reverse-mode gradients of a scalar loss given dL/d(eps_r), dL/d(eps_i)."""
    if cache is None:
        raise ValueError("backward needs the activation cache from forward(..., return_cache=True)")
    cfg, c, P = cache.cfg, cache.entries, params
    C = cfg.C
    g = zeros_like_params(params)
    dout = {}
    for b, d in zip(BRANCHES, (grad_r, grad_i)):
        d = np.asarray(d, dtype=float)
        dout[b] = d if cache.batched else d[None]

    dx = {}
    for b in BRANCHES:
        nf = c[f"{b}.head"]
        dnf, g[f"{b}.head.W"] = _linear_back(dout[b], nf, P[f"{b}.head.W"])
        g[f"{b}.head.b"] = dout[b].reshape(-1, cfg.D).sum(0)
        dx[b] = dnf

    for i in reversed(range(cfg.blocks)):
        dn2 = {}
        if cfg.variant == INTERACTIVE:
            f = f"blk{i}.ffn"
            do = np.concatenate([dx["re"], dx["im"]], axis=-1)
            dz, g[f"{f}.W1"], g[f"{f}.b1"], g[f"{f}.W2"], g[f"{f}.b2"] = _ffn_back(do, P[f"{f}.W1"], P[f"{f}.W2"], c[f])
            dn2["re"], dn2["im"] = dz[..., :C], dz[..., C:]
        else:
            for b in BRANCHES:
                f = f"blk{i}.{b}.ffn"
                dn2[b], g[f"{f}.W1"], g[f"{f}.b1"], g[f"{f}.W2"], g[f"{f}.b2"] = _ffn_back(dx[b], P[f"{f}.W1"], P[f"{f}.W2"], c[f])
        for b in BRANCHES:
            p = f"blk{i}.{b}"
            if cfg.projector == "linear":
                dn2[b], g[f"{p}.proj.W"] = _linear_back(dn2[b], c[f"{p}.proj"], P[f"{p}.proj.W"])
            d, g[f"{p}.ln2.g"], g[f"{p}.ln2.b"] = _layernorm_back(dn2[b], P[f"{p}.ln2.g"], c[f"{p}.ln2"])
            dx[b] = dx[b] + d
            dn1, g[f"{p}.attn.Wq"], g[f"{p}.attn.Wk"], g[f"{p}.attn.Wv"], g[f"{p}.attn.Wo"] = _attention_back(
                dx[b], P[f"{p}.attn.Wq"], P[f"{p}.attn.Wk"], P[f"{p}.attn.Wv"], P[f"{p}.attn.Wo"], cfg.heads, c[f"{p}.attn"]
            )
            d, g[f"{p}.ln1.g"], g[f"{p}.ln1.b"] = _layernorm_back(dn1, P[f"{p}.ln1.g"], c[f"{p}.ln1"])
            dx[b] = dx[b] + d

    dtemb = np.zeros((dx["re"].shape[0], C))
    dinp = {}
    for b in BRANCHES:
        dinp[b], g[f"{b}.in.W"] = _linear_back(dx[b], c[f"{b}.in"], P[f"{b}.in.W"])
        g[f"{b}.in.b"] = dx[b].reshape(-1, C).sum(0)
        g[f"{b}.pos"] = dx[b].sum(0)
        dtemb += dx[b].sum(1)

    e0, h1, s1, a1 = c["time"]
    da1, g["time.W2"] = _linear_back(dtemb, a1, P["time.W2"])
    g["time.b2"] = dtemb.sum(0)
    dh1 = _silu_back(da1, h1, s1)
    _, g["time.W1"] = _linear_back(dh1, e0, P["time.W1"])
    g["time.b1"] = dh1.sum(0)

    if input_grads:
        dr, di = dinp["re"], dinp["im"]
        if not cache.batched:
            dr, di = dr[0], di[0]
        return g, dr, di
    return g


def make_eps_model(params: Params, cfg: DenoiserConfig):
    """Bind parameters into a callable ``(R, I, t) -> (eps_r, eps_i)`` for the samplers."""

    def eps_model(R, I, t):
        return forward(params, cfg, R, I, t)

    return eps_model
