"""Command line entry point: ``specdiff <subcommand> ...``.

Exit codes: 0 success, 1 verification or validation failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import shlex
import sys

from . import complexity, theorems
from .checkpoint import CheckpointError
from .config import ConfigError, RunConfig, apply_overrides, load_config
from .data import DataFormatError, atomic_write_text, gen_single_frequency, gen_sines, load_any, write_samples_csv
from .metrics import evaluate
from .pipeline import DATA_STREAM, sample_from_checkpoint, stream, train


TABLE_FORMAT = "specdiff-table v1"


def _command_line(argv) -> str:
    return "specdiff " + " ".join(shlex.quote(a) for a in argv)


def _kv(pairs):
    out = []
    for p in pairs or []:
        if "=" not in p:
            raise ConfigError(f"--set expects key=value, got {p!r}")
        k, v = p.split("=", 1)
        out.append((k.strip(), v))
    return out


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    pairs = _kv(getattr(args, "set", None))
    if args.seed is not None:
        pairs.append(("seed", str(args.seed)))
    return apply_overrides(cfg, pairs) if pairs else cfg


def _emit_table(text: str, out: str | None, command: str):
    print(text)
    if out:
        atomic_write_text(out, f"# format: {TABLE_FORMAT}\n# command: {command}\n{text}\n")


def cmd_gen_data(args, command):
    cfg = _run_config(args)
    d = cfg.data
    kind = args.kind or d.source
    n = args.n or d.n_samples
    L = args.L or d.L
    D = args.D or d.D
    rng = stream(cfg.seed, DATA_STREAM)
    if kind == "sines":
        ds = gen_sines(n, L, D, rng)
    elif kind == "single_frequency":
        ds = gen_single_frequency(n, L, D, args.k or d.frequency_bin, rng)
    else:
        raise ConfigError(f"gen-data cannot synthesize source {kind!r}")
    out = args.out or "data.csv"
    write_samples_csv(out, ds.samples, command, notes=[f"source: {kind}", f"seed: {cfg.seed}"])
    print(out)
    return 0


def cmd_train(args, command):
    cfg = _run_config(args)
    out = args.out or "run"
    res = train(cfg, out, resume=args.resume, command=command)
    print(res.checkpoint_path)
    return 0


def cmd_sample(args, command):
    overrides = _kv(args.set)
    if args.sampler:
        overrides.append(("sampler.kind", args.sampler))
    if args.sde_steps:
        overrides.append(("sampler.sde_steps", str(args.sde_steps)))
    samples, ck = sample_from_checkpoint(args.checkpoint, args.n, overrides, args.seed)
    out = args.out or "samples.csv"
    notes = [
        "per-sample channel means are resampled from the training set's empirical means",
        f"checkpoint: {args.checkpoint} (step {ck.step})",
    ]
    write_samples_csv(out, samples, command, notes=notes)
    print(out)
    return 0


def cmd_metrics(args, command):
    real = load_any(args.real, args.L, args.stride, args.header)
    synth = load_any(args.synth, args.L, args.stride, args.header)
    _emit_table(evaluate(real.samples, synth.samples).to_tsv(), args.out, command)
    return 0


def cmd_verify(args, command):
    checks = args.checks.split(",") if args.checks else None
    seed = 0 if args.seed is None else args.seed
    reports = theorems.run_suite(seed=seed, N=args.N, checks=checks, workers=args.workers)
    rows = [theorems.ROW_HEADER] + [row for r in reports for row in r.rows()]
    _emit_table("\n".join(rows), args.out, command)
    code = theorems.suite_exit_code(reports)
    bad = [r.name for r in reports if not r.as_expected]
    print(f"# {len(reports)} checks, {len(bad)} unexpected outcome(s){': ' + ', '.join(bad) if bad else ''}", file=sys.stderr)
    return code


def _width_rule(spec: str):
    if spec == "L":
        return complexity.width_equals_length, "C=L"
    if spec.startswith("const:"):
        c = int(spec.split(":", 1)[1])
        return (lambda L: c), f"C={c}"
    raise ConfigError(f"--width-rule must be 'L' or 'const:<C>', got {spec!r}")


def cmd_flops(args, command):
    Ls = [int(x) for x in args.L.split(",")]
    rule, label = _width_rule(args.width_rule)
    text = complexity.flops_table(Ls, rule, args.blocks, args.heads, label)
    rows = complexity.savings_curve(Ls, rule, args.blocks, args.heads)
    text += "\n# total savings sparkline (0..0.5): " + complexity.sparkline([r[3] for r in rows], 0.0, 0.5)
    if args.timing:
        t = complexity.measure_wall_time(Ls, C=args.timing_width, reps=args.reps)
        text += "\n# measured forward time (informational)\nL\ttemporal_ms\tspectral_ms"
        text += "".join(f"\n{L}\t{a:.3f}\t{b:.3f}" for L, a, b in t)
    _emit_table(text, args.out, command)
    if args.plot:
        complexity.plot_savings(rows, args.plot, title=f"FLOP savings ({label})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    def globals_parser(default):
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--seed", type=int, default=default, help="override the run seed")
        g.add_argument("--config", default=default, help="flat key=value config file")
        g.add_argument("--out", default=default, help="output file or directory")
        return g

    # global flags are accepted before or after the subcommand; the subcommand
    # copy must not clobber a value given before it
    common = globals_parser(argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="specdiff", description="Two-branch spectral diffusion for time series", parents=[globals_parser(None)])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", parents=[common], help="synthesize a dataset as a samples CSV")
    g.add_argument("--kind", choices=["sines", "single_frequency"])
    g.add_argument("--n", type=int)
    g.add_argument("--L", type=int)
    g.add_argument("--D", type=int)
    g.add_argument("--k", type=int, help="frequency bin for single_frequency")
    g.add_argument("--set", action="append", metavar="KEY=VALUE")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", parents=[common], help="train a denoiser; writes checkpoints and a TSV log into --out")
    t.add_argument("--resume", help="checkpoint to continue from")
    t.add_argument("--set", action="append", metavar="KEY=VALUE")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sample", parents=[common], help="generate series from a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--n", type=int)
    s.add_argument("--sampler", choices=["ddpm", "sde"])
    s.add_argument("--sde-steps", type=int)
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="sampler.* overrides")
    s.set_defaults(func=cmd_sample)

    m = sub.add_parser("metrics", parents=[common], help="compare two sets of series")
    m.add_argument("--real", required=True)
    m.add_argument("--synth", required=True)
    m.add_argument("--L", type=int, help="window length for raw CSV tables")
    m.add_argument("--stride", type=int, default=1)
    m.add_argument("--header", action="store_true", help="raw CSV tables have a header row")
    m.set_defaults(func=cmd_metrics)

    v = sub.add_parser("verify", parents=[common], help="run the numerical identity checks")
    v.add_argument("--checks", help="comma-separated subset of: " + ",".join(theorems.CHECK_NAMES))
    v.add_argument("--N", type=int, default=100_000, help="Monte-Carlo draws per check")
    v.add_argument("--workers", type=int, default=1)
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("flops", parents=[common], help="FLOP accounting table and savings curve")
    f.add_argument("--L", default="24,48,96,128,256,512,1024,2048,4096")
    f.add_argument("--width-rule", default="L", help="'L' (C = L) or 'const:<C>'")
    f.add_argument("--blocks", type=int, default=1)
    f.add_argument("--heads", type=int, default=1)
    f.add_argument("--plot", help="write a PNG line plot here")
    f.add_argument("--timing", action="store_true", help="also time one forward pass per L")
    f.add_argument("--timing-width", type=int, default=32)
    f.add_argument("--reps", type=int, default=5)
    f.set_defaults(func=cmd_flops)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on usage errors
    command = _command_line(argv)
    try:
        return args.func(args, command)
    except (ConfigError, DataFormatError, CheckpointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
