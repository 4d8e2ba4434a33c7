"""
Command-line entry point.

    wpiqnn run <config> [--seeds 0,1,2] [--out-dir DIR] [--threads N] [--stride K] [--grid GXxGY]
    wpiqnn eval <checkpoint> <config> [--grid 64x64] [--out-dir DIR]
    wpiqnn gradcheck <config>
    wpiqnn sweep <config> --param eps --values 0.14 0.13 0.12 0.11
    wpiqnn validate <config>

``<config>`` is a JSON file or the name of a bundled preset. Exit status is
2 for configuration problems and 1 for runtime failures.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import config as cfgmod
from .errors import ConfigurationError, WpiqnnError
from .gradcheck import circuit_suite, loss_gradient_check, toy_config
from .model import load_checkpoint, save_checkpoint
from .problems import make_problem
from .report import (
    RunReport,
    emit_fields,
    output_root,
    plot_history,
    seed_entry,
    write_csv,
    write_history_csv,
)
from .training import LossBundle, architectures, train

GRAD_TOL = 1e-5
SHIFT_TOL = 1e-10


def _seeds(text):
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("at least one seed is required")
    return seeds


def _grid(text):
    try:
        gx, gy = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 64x64, got {text!r}") from None
    if gx < 2 or gy < 2:
        raise argparse.ArgumentTypeError("grid needs at least 2 points per axis")
    return [gx, gy]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wpiqnn", description="Wavelet-based quantum PINN experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, grid_help):
        p.add_argument("--out-dir", help="output root (default: $WPIQNN_OUT_DIR or ./runs)")
        p.add_argument("--grid", type=_grid, help=grid_help)

    def training_flags(p):
        p.add_argument("--seeds", type=_seeds, help="comma-separated seeds, overrides the config")
        p.add_argument("--threads", type=int, default=1, help="seeds trained in parallel")
        p.add_argument("--stride", type=int, help="loss-history stride, overrides the config")
        p.add_argument("--epochs", type=int, help="epoch count, overrides the config")
        common(p, "validation grid, e.g. 256x256")

    p = sub.add_parser("run", help="train every seed and write the report")
    p.add_argument("config")
    training_flags(p)

    p = sub.add_parser("eval", help="recompute metrics and dump solution/error fields")
    p.add_argument("checkpoint")
    p.add_argument("config")
    common(p, "field grid (default 64x64)")

    p = sub.add_parser("gradcheck", help="run the gradient-oracle suite")
    p.add_argument("config")
    p.add_argument("--circuits", type=int, default=50)
    p.add_argument("--seeds", type=_seeds, default=[0])

    p = sub.add_parser("sweep", help="one run per value of a problem parameter")
    p.add_argument("config")
    p.add_argument("--param", required=True, help="problem parameter name, e.g. eps")
    p.add_argument("--values", required=True, nargs="+", type=float)
    training_flags(p)

    p = sub.add_parser("validate", help="schema-check a config without computing")
    p.add_argument("config")
    return parser


def resolve_config(ref) -> cfgmod.TrainConfig:
    if not Path(ref).exists() and ref in cfgmod.PRESET_NAMES + cfgmod.DESK_PRESET_NAMES:
        return cfgmod.preset(ref)
    return cfgmod.load_config(ref)


def _apply_overrides(cfg, args):
    if getattr(args, "seeds", None):
        cfg.seeds = args.seeds
    if getattr(args, "stride", None):
        cfg.output.history_stride = args.stride
    if getattr(args, "epochs", None):
        cfg.training.epochs = args.epochs
    if getattr(args, "grid", None):
        cfg.points.validation_grid = args.grid
    # re-validate after overrides
    return cfgmod.TrainConfig.from_dict(cfg.to_dict())


def _run_seed(cfg_dict, seed, run_dir):
    cfg = cfgmod.TrainConfig.from_dict(cfg_dict)
    bundle = LossBundle.from_config(cfg, seed)
    result = train(cfg, seed, bundle)
    history = run_dir / f"history_seed{seed}.csv"
    write_history_csv(history, result.history)
    ckpt = run_dir / f"checkpoint_seed{seed}.json"
    save_checkpoint(ckpt, [m.arch for m in bundle.models], result.params, seed,
                    {"config": cfg_dict, "epochs_completed": result.epochs_completed})
    return seed_entry(result, history.name, ckpt.name), result.n_parameters, result.history


def run_experiment(cfg, run_dir: Path, threads=1, log=print) -> RunReport:
    run_dir.mkdir(parents=True, exist_ok=True)
    cfg_dict = cfg.to_dict()
    jobs = []
    if threads > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_run_seed, cfg_dict, s, run_dir) for s in cfg.seeds]
            jobs = [f.result() for f in futures]
    else:
        jobs = [_run_seed(cfg_dict, s, run_dir) for s in cfg.seeds]
    entries, histories = [], {}
    for entry, n_params, history in jobs:
        entries.append(entry)
        histories[entry["seed"]] = history
        status = "FAILED " + entry["message"] if entry["failed"] else json.dumps(entry["errors"])
        log(f"seed {entry['seed']}: {status} ({entry['wall_time']:.1f}s)")
    plot_history(run_dir / "loss.svg", histories)
    report = RunReport.build(cfg, entries, n_params)
    report.write(run_dir / "report.json")
    rows = [
        [name, metric, stats["mean"], stats["std"], report.aggregate["n_used"], stats["text"]]
        for name, per in report.aggregate["metrics"].items()
        for metric, stats in per.items()
    ]
    write_csv(run_dir / "summary.csv", ["field", "metric", "mean", "std", "n_seeds", "text"], rows)
    return report


def cmd_run(args):
    cfg = _apply_overrides(resolve_config(args.config), args)
    run_dir = output_root(args.out_dir) / cfg.name
    report = run_experiment(cfg, run_dir, args.threads)
    for name, per in report.aggregate["metrics"].items():
        print(f"{name}: relative L2 {per['rel_l2']['text']}, relative Linf {per['rel_linf']['text']}")
    print(f"wrote {run_dir}")
    return 0


def cmd_eval(args):
    cfg = resolve_config(args.config)
    archs, params, seed, _ = load_checkpoint(args.checkpoint)
    bundle = LossBundle.from_config(cfg, seed)
    expected = [a for a, _ in architectures(cfg, bundle.problem)]
    if archs != expected:
        raise ConfigurationError(f"{args.checkpoint}: checkpoint architecture does not match {args.config}")
    errors = bundle.validation_errors(params)
    out = output_root(args.out_dir) if args.out_dir else Path(args.checkpoint).parent / f"fields_seed{seed}"
    emit_fields(bundle, params, out, tuple(args.grid or (64, 64)))
    for name, (l2, linf) in errors.items():
        print(f"{name}: relative L2 {l2:.6e}, relative Linf {linf:.6e}")
    print(f"wrote {out}")
    return 0


def cmd_gradcheck(args):
    cfg = resolve_config(args.config)
    ok = True
    checks = circuit_suite(args.circuits)
    worst_shift = max(c.adjoint_vs_shift for c in checks)
    worst_fd = max(c.fd_rel for c in checks)
    passed = worst_shift < SHIFT_TOL and worst_fd < GRAD_TOL
    ok &= passed
    print(f"{'PASS' if passed else 'FAIL'} circuits: {len(checks)} random, adjoint-vs-shift {worst_shift:.2e}, "
          f"adjoint-vs-fd {worst_fd:.2e}")
    toy = toy_config(cfg)
    for seed in args.seeds:
        errs = loss_gradient_check(toy, seed)
        passed = max(errs) < GRAD_TOL
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} loss gradient ({cfg.problem.name}, seed {seed}): "
              + ", ".join(f"{e:.2e}" for e in errs))
    return 0 if ok else 1


def cmd_sweep(args):
    base = _apply_overrides(resolve_config(args.config), args)
    root = output_root(args.out_dir) / f"{base.name}_sweep_{args.param}"
    rows = []
    for value in args.values:
        cfg = cfgmod.TrainConfig.from_dict(base.to_dict())
        cfg.problem.params[args.param] = value
        cfg.name = f"{args.param}={value:g}"
        report = run_experiment(cfg, root / cfg.name, args.threads)
        for name, per in report.aggregate["metrics"].items():
            rows.append([args.param, value, name, per["rel_l2"]["mean"], per["rel_l2"]["std"],
                         report.aggregate["n_used"], per["rel_l2"]["text"]])
    write_csv(root / "sweep.csv", ["param", "value", "field", "rel_l2_mean", "rel_l2_std", "n_seeds", "text"], rows)
    for row in rows:
        print(f"{row[0]}={row[1]:g} {row[2]}: {row[6]}")
    print(f"wrote {root}")
    return 0


def cmd_validate(args):
    cfg = resolve_config(args.config)
    archs = architectures(cfg, make_problem(cfg.problem.name, cfg.problem.params))
    n = sum(a.parameter_count for a, _ in archs)
    print(f"ok: {cfg.name} ({cfg.problem.name}, {n} trainable parameters)")
    return 0


COMMANDS = {"run": cmd_run, "eval": cmd_eval, "gradcheck": cmd_gradcheck, "sweep": cmd_sweep, "validate": cmd_validate}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (WpiqnnError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
