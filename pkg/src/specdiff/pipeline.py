"""Training and sampling orchestration on top of the core modules."""
from __future__ import annotations

import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint as ckpt
from . import denoiser
from .config import RESUMABLE_KEYS, ConfigError, RunConfig, config_diff
from .data import Dataset, denormalize, gen_single_frequency, gen_sines, ingest_csv, normalize
from .noise import build_noise_model
from .objective import adam_init, training_step
from .sampler import SamplerConfig, sample
from .schedule import build_schedule

LOG_HEADER = "step\tloss_real\tloss_imag\ttotal\twall_s"
LOG_FORMAT = "specdiff-trainlog v1"

# independent RNG streams derived from the run seed
DATA_STREAM, INIT_STREAM, TRAIN_STREAM, SAMPLE_STREAM = 1, 2, 3, 4


def stream(seed: int, which: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), which])


def build_dataset(cfg: RunConfig) -> Dataset:
    d = cfg.data
    rng = stream(cfg.seed, DATA_STREAM)
    if d.source == "sines":
        return gen_sines(d.n_samples, d.L, d.D, rng)
    if d.source == "single_frequency":
        return gen_single_frequency(d.n_samples, d.L, d.D, d.frequency_bin, rng)
    return ingest_csv(d.path, d.L, d.stride, d.header)


def model_config(cfg: RunConfig, D: int | None = None) -> denoiser.DenoiserConfig:
    m = cfg.model
    return denoiser.DenoiserConfig(
        K=cfg.data.L // 2,
        D=cfg.data.D if D is None else D,
        C=m.C,
        heads=m.heads,
        blocks=m.blocks,
        time_embed_dim=m.time_embed_dim,
        variant=m.variant,
        projector=m.projector,
    )


def sampler_config(cfg: RunConfig) -> SamplerConfig:
    s = cfg.sampler
    return SamplerConfig(s.kind, s.sde_steps, s.sde_score_factor, s.final_denoise)


def schedule_of(cfg: RunConfig):
    s = cfg.schedule
    return build_schedule(s.kind, s.T, s.beta_min, s.beta_max)


@dataclass
class TrainResult:
    checkpoint_path: str | None
    log: list = field(default_factory=list)  # (step, loss_real, loss_imag, total, wall_s)
    params: dict | None = None
    dataset: Dataset | None = None

    @property
    def losses(self) -> np.ndarray:
        return np.array([row[3] for row in self.log])


def _norm_record(ds: Dataset) -> dict:
    return {"channel_mean": ds.channel_mean, "channel_std": ds.channel_std, "sample_means": ds.sample_means}


def train(cfg: RunConfig, out_dir: str | None = None, *, resume: str | None = None, log_stream=sys.stdout, command: str = "") -> TrainResult:
    """Run ``cfg.train.steps`` optimizer steps (counting from the resumed step).

    Every step's losses are recorded in the result; every ``train.log_every``
    steps a row goes to ``log_stream`` and ``<out_dir>/train_log.tsv``.
    Checkpoints land in ``out_dir`` every ``train.checkpoint_every`` steps and at the end.
    """
    raw = build_dataset(cfg)
    if raw.L != cfg.data.L or raw.D != cfg.data.D:
        raise ConfigError(f"data.L/data.D = {cfg.data.L}/{cfg.data.D} but the data has L={raw.L}, D={raw.D}")
    ds = normalize(raw)
    mcfg = model_config(cfg)
    schedule = schedule_of(cfg)
    noise_model = build_noise_model(cfg.data.L, cfg.noise.sigma)

    if resume is not None:
        ck = ckpt.load(resume)
        diff = config_diff(ck.config, cfg, ignore=RESUMABLE_KEYS)
        if diff:
            fa, fb = ck.config.flat(), cfg.flat()
            detail = ", ".join(f"{k}: checkpoint={fa[k]!r} config={fb[k]!r}" for k in diff)
            raise ConfigError(f"resume mismatch: {detail}")
        params, opt_state, step = ck.params, ck.opt_state, ck.step
        rng = np.random.default_rng()
        rng.bit_generator.state = ck.rng_state
    else:
        params = denoiser.init_params(mcfg, stream(cfg.seed, INIT_STREAM))
        opt_state = adam_init(params, lr=cfg.train.lr)
        step = 0
        rng = stream(cfg.seed, TRAIN_STREAM)

    log_fh = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        log_path = os.path.join(out_dir, "train_log.tsv")
        new_log = resume is None or not os.path.exists(log_path)
        log_fh = open(log_path, "w" if new_log else "a", encoding="utf-8")
        if new_log:
            log_fh.write(f"# format: {LOG_FORMAT}\n# command: {command}\n{LOG_HEADER}\n")
    if log_stream is not None and resume is None:
        print(LOG_HEADER, file=log_stream)

    def snapshot(path):
        return ckpt.save(
            ckpt.Checkpoint(cfg, params, opt_state, step, rng.bit_generator.state, _norm_record(ds), command=command), path
        )

    result = TrainResult(None, [], None, ds)
    t0 = time.perf_counter()
    target = step + cfg.train.steps if resume is None else max(cfg.train.steps, step)
    try:
        while step < target:
            idx = rng.integers(0, ds.n, cfg.train.batch_size)
            params, opt_state, rep = training_step(params, mcfg, ds.samples[idx], schedule, noise_model, opt_state, rng, cfg.schedule.weighting)
            step += 1
            row = (step, rep.loss_real, rep.loss_imag, rep.total, time.perf_counter() - t0)
            result.log.append(row)
            if step % cfg.train.log_every == 0 or step == target:
                line = f"{row[0]}\t{row[1]:.6f}\t{row[2]:.6f}\t{row[3]:.6f}\t{row[4]:.2f}"
                if log_stream is not None:
                    print(line, file=log_stream, flush=True)
                if log_fh is not None:
                    log_fh.write(line + "\n")
                    log_fh.flush()
            if out_dir is not None and step % cfg.train.checkpoint_every == 0 and step != target:
                snapshot(os.path.join(out_dir, f"ckpt_{step:07d}.bin"))
    finally:
        if log_fh is not None:
            log_fh.close()
    if out_dir is not None:
        result.checkpoint_path = snapshot(os.path.join(out_dir, "final.bin"))
    result.params = params
    return result


def generate(params, cfg: RunConfig, n: int, rng, sampler_cfg: SamplerConfig | None = None) -> np.ndarray:
    """Normalized-space series (n, L, D) from trained parameters."""
    mcfg = model_config(cfg)
    return sample(
        denoiser.make_eps_model(params, mcfg),
        schedule_of(cfg),
        build_noise_model(cfg.data.L, cfg.noise.sigma),
        sampler_cfg or sampler_config(cfg),
        n,
        cfg.data.D,
        rng,
    )


def sample_from_checkpoint(path: str, n: int | None = None, overrides=(), seed: int | None = None):
    """De-normalized samples from a checkpoint; returns (samples, checkpoint)."""
    from .config import apply_overrides

    ck = ckpt.load(path)
    cfg = apply_overrides(ck.config, overrides) if overrides else ck.config
    n = cfg.sampler.n if n is None else n
    rng = stream(cfg.seed if seed is None else seed, SAMPLE_STREAM)
    z = generate(ck.params, cfg, n, rng)
    ref = Dataset(np.zeros((1, cfg.data.L, cfg.data.D)), **ck.normalization)
    return denormalize(z, ref, rng), ck


def smoothed(losses, window: int = 100) -> np.ndarray:
    """Means of consecutive non-overlapping windows of the per-step loss."""
    losses = np.asarray(losses, dtype=float)
    m = len(losses) // window
    return losses[: m * window].reshape(m, window).mean(1)


def ablation(cfg: RunConfig, seeds=(0, 1, 2), n_samples: int = 128, variants=("interactive", "decoupled")) -> dict:
    """Train each variant per seed at the same step budget and score its samples.

    Returns {variant: list of MetricsReport}, one per seed. Samples are
    compared with the raw (un-normalized) training windows.
    """
    from .config import override
    from .metrics import evaluate

    out = {v: [] for v in variants}
    for seed in seeds:
        for v in variants:
            c = override(cfg, model__variant=v, seed=seed)
            res = train(c, None, log_stream=None)
            z = generate(res.params, c, n_samples, stream(seed, SAMPLE_STREAM))
            synth = denormalize(z, res.dataset, stream(seed, SAMPLE_STREAM))
            real = build_dataset(c).samples
            out[v].append(evaluate(real, synth))
    return out
