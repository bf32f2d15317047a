"""Flat ``key = value`` run configuration.

Keys are ``section.field`` for the sections below plus a top-level ``seed``.
Lines starting with ``#`` are comments. Unknown keys and unparseable values
are errors that name the key and line.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

from .denoiser import DECOUPLED, INTERACTIVE
from .sampler import DDPM, SCORE_FACTORS, SDE
from .schedule import COSINE, ELBO, LINEAR, SIMPLE


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSection:
    C: int = 32
    heads: int = 4
    blocks: int = 2
    time_embed_dim: int = 32
    variant: str = INTERACTIVE
    projector: str = "identity"


@dataclass(frozen=True)
class ScheduleSection:
    kind: str = LINEAR
    T: int = 1000
    beta_min: float = 1e-4
    beta_max: float = 2e-2
    weighting: str = SIMPLE


@dataclass(frozen=True)
class NoiseSection:
    sigma: float = 1.0


@dataclass(frozen=True)
class TrainSection:
    steps: int = 500
    batch_size: int = 64
    lr: float = 1e-3
    checkpoint_every: int = 250
    log_every: int = 10


@dataclass(frozen=True)
class SamplerSection:
    kind: str = DDPM
    sde_steps: int = 1000
    sde_score_factor: str = "one"
    final_denoise: bool = True
    n: int = 64


@dataclass(frozen=True)
class DataSection:
    source: str = "sines"  # sines | single_frequency | csv
    n_samples: int = 10000
    L: int = 24
    D: int = 5
    frequency_bin: int = 3
    path: str = ""
    stride: int = 1
    header: bool = False


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    train: TrainSection = field(default_factory=TrainSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    data: DataSection = field(default_factory=DataSection)
    seed: int = 0

    def flat(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "seed":
                out["seed"] = v
            else:
                out.update({f"{f.name}.{k}": x for k, x in asdict(v).items()})
        return out

    def to_text(self) -> str:
        return "\n".join(f"{k} = {_fmt(v)}" for k, v in self.flat().items()) + "\n"


SECTIONS = {f.name: f for f in fields(RunConfig) if f.name != "seed"}
# keys allowed to differ between a checkpoint and the config used to resume it
RESUMABLE_KEYS = {"train.steps", "train.checkpoint_every", "train.log_every"} | {f"sampler.{f.name}" for f in fields(SamplerSection)}


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _coerce(key, raw, typ, lineno):
    raw = raw.strip()
    try:
        if typ in (bool, "bool"):
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
        return raw
    except ValueError:
        where = f" (line {lineno})" if lineno else ""
        raise ConfigError(f"{key}{where}: cannot parse {raw!r} as {getattr(typ, '__name__', typ)}") from None


def _section_types(cls):
    return {f.name: f.type for f in fields(cls)}


def apply_overrides(cfg: RunConfig, pairs, lineinfo=None) -> RunConfig:
    """Apply (key, raw string) pairs on top of ``cfg``."""
    sections = {name: asdict(getattr(cfg, name)) for name in SECTIONS}
    seed = cfg.seed
    for n, (key, raw) in enumerate(pairs):
        lineno = lineinfo[n] if lineinfo else None
        if key == "seed":
            seed = _coerce(key, raw, int, lineno)
            continue
        sec, _, name = key.partition(".")
        if sec not in SECTIONS or not name:
            raise ConfigError(f"unknown key {key!r}" + (f" (line {lineno})" if lineno else ""))
        cls = type(getattr(cfg, sec))
        types = _section_types(cls)
        if name not in types:
            raise ConfigError(f"unknown key {key!r}" + (f" (line {lineno})" if lineno else ""))
        sections[sec][name] = _coerce(key, raw, types[name], lineno)
    new = RunConfig(**{name: type(getattr(cfg, name))(**vals) for name, vals in sections.items()}, seed=seed)
    validate(new)
    return new


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    pairs, lines = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {s!r}")
        k, v = s.split("=", 1)
        pairs.append((k.strip(), v))
        lines.append(lineno)
    return apply_overrides(base or RunConfig(), pairs, lines)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _require(cond, key, msg):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def validate(cfg: RunConfig):
    m, s, t, sp, d = cfg.model, cfg.schedule, cfg.train, cfg.sampler, cfg.data
    for key, val in (("model.C", m.C), ("model.heads", m.heads), ("model.blocks", m.blocks), ("model.time_embed_dim", m.time_embed_dim)):
        _require(val > 0, key, f"must be positive, got {val}")
    _require(m.C % m.heads == 0, "model.heads", f"must divide model.C={m.C}")
    _require(m.time_embed_dim % 2 == 0, "model.time_embed_dim", "must be even")
    _require(m.variant in (INTERACTIVE, DECOUPLED), "model.variant", f"must be {INTERACTIVE} or {DECOUPLED}")
    _require(m.projector in ("identity", "linear"), "model.projector", "must be identity or linear")
    _require(s.kind in (LINEAR, COSINE), "schedule.kind", f"must be {LINEAR} or {COSINE}")
    _require(s.T > 0, "schedule.T", f"must be positive, got {s.T}")
    _require(0 < s.beta_min <= s.beta_max < 1, "schedule.beta_min", "need 0 < beta_min <= beta_max < 1")
    _require(s.weighting in (ELBO, SIMPLE), "schedule.weighting", f"must be {ELBO} or {SIMPLE}")
    _require(cfg.noise.sigma > 0, "noise.sigma", "must be positive")
    for key, val in (("train.steps", t.steps), ("train.batch_size", t.batch_size), ("train.checkpoint_every", t.checkpoint_every), ("train.log_every", t.log_every)):
        _require(val > 0, key, f"must be positive, got {val}")
    _require(t.lr > 0, "train.lr", "must be positive")
    _require(sp.kind in (DDPM, SDE), "sampler.kind", f"must be {DDPM} or {SDE}")
    _require(sp.sde_score_factor in SCORE_FACTORS, "sampler.sde_score_factor", f"must be one of {sorted(SCORE_FACTORS)}")
    _require(sp.sde_steps >= 2, "sampler.sde_steps", "must be at least 2")
    _require(sp.n > 0, "sampler.n", "must be positive")
    _require(d.source in ("sines", "single_frequency", "csv"), "data.source", "must be sines, single_frequency or csv")
    _require(d.L >= 2, "data.L", "must be at least 2")
    _require(d.D > 0 and d.n_samples > 0 and d.stride > 0, "data", "D, n_samples and stride must be positive")
    _require(d.source != "single_frequency" or 1 <= d.frequency_bin <= d.L // 2, "data.frequency_bin", f"must be in 1..{d.L // 2}")
    _require(d.source != "csv" or d.path, "data.path", "required when data.source = csv")


def config_diff(a: RunConfig, b: RunConfig, ignore=()) -> list[str]:
    fa, fb = a.flat(), b.flat()
    return [k for k in fa if k not in ignore and fa[k] != fb[k]]


def override(cfg: RunConfig, **kw) -> RunConfig:
    """Keyword form of :func:`apply_overrides`; spell keys as ``section__field``."""
    return apply_overrides(cfg, [(k.replace("__", "."), _fmt(v)) for k, v in kw.items()])
