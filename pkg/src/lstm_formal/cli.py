"""Command-line entry point: ``lstm-formal {gen,train,sweep,evaluate,gradcheck,trace}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from lstm_formal.distributions import DistributionSpec, LengthWindow, sample_lengths
from lstm_formal.evaluation import EvalConfig, evaluate
from lstm_formal.experiments import (
    ExperimentConfig,
    expand_grid,
    preset_grid,
    run_sweep,
    train,
    write_trial,
)
from lstm_formal.languages import Language, format_sample, generate_sample
from lstm_formal.lstm import (
    CheckpointError,
    backward,
    finite_difference_grad,
    init_parameters,
    load_checkpoint,
    max_relative_error,
)
from lstm_formal import tracing

EXIT_USAGE, EXIT_FAILED, EXIT_CONFIG, EXIT_CHECKPOINT = 2, 1, 3, 4
GRADCHECK_TOLERANCE = 1e-5


class UsageError(Exception):
    pass


class ConfigError(Exception):
    pass


# flag -> ExperimentConfig field
CONFIG_FLAGS = {
    "language": "language",
    "dist": "distribution",
    "window": "window",
    "hidden": "hidden_units",
    "epochs": "epochs",
    "trials": "trials",
    "k": "k",
    "max_n": "max_n",
    "seed": "trial_seed_base",
    "data_seed": "data_seed",
    "optimizer": "optimizer",
    "lr": "lr",
    "grad_clip": "grad_clip",
    "training_set_size": "training_set_size",
    "resample_each_epoch": "resample_each_epoch",
    "recurrent_only_reseed": "recurrent_only_reseed",
}


def _language(text):
    try:
        return Language.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _typed(parser):
    def convert(text):
        try:
            return parser(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return convert


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--language", type=_language, help="anbn, anbncn or anbncndn")
    p.add_argument("--dist", type=_typed(DistributionSpec.parse), help="uniform, u-shaped, right-tailed, left-tailed, beta-binomial:A,B")
    p.add_argument("--window", type=_typed(LengthWindow.parse), help="LO:HI")
    p.add_argument("--hidden", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--max-n", type=int)
    p.add_argument("--seed", type=int, help="trial seed base")
    p.add_argument("--data-seed", type=int)
    p.add_argument("--optimizer", choices=["adam", "sgd"])
    p.add_argument("--lr", type=float)
    p.add_argument("--grad-clip", type=float)
    p.add_argument("--training-set-size", type=int)
    p.add_argument("--resample-each-epoch", action="store_true", default=None)
    p.add_argument("--recurrent-only-reseed", action="store_true", default=None)
    p.add_argument("--config", type=Path, help="flat JSON config; explicit flags win")


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None


def _overrides(args) -> dict:
    return {field: getattr(args, flag) for flag, field in CONFIG_FLAGS.items() if getattr(args, flag, None) is not None}


def resolve_config(args) -> ExperimentConfig:
    data = {}
    if args.config is not None:
        doc = _read_json(args.config)
        if not isinstance(doc, dict):
            raise ConfigError(f"config {args.config} must be a JSON object")
        data.update(doc)
    data.update(_overrides(args))
    try:
        return ExperimentConfig.from_dict(data)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None


def _announce(resolved: dict) -> None:
    print("config: " + json.dumps(resolved, sort_keys=True), file=sys.stderr)


def cmd_gen(args) -> int:
    lang = args.language or Language.ANBN
    if args.n is not None and args.count is not None:
        raise UsageError("--n and --count are mutually exclusive")
    if args.n is not None:
        if args.n < 1:
            raise UsageError("--n must be >= 1")
        _announce({"language": lang.value, "n": args.n})
        print(format_sample(generate_sample(lang, args.n)))
        return 0
    dist = args.dist or DistributionSpec.parse("uniform")
    window = args.window or LengthWindow(1, 50)
    count = args.count if args.count is not None else 1000
    data_seed = args.data_seed if args.data_seed is not None else 0
    _announce({"language": lang.value, "distribution": str(dist), "window": str(window), "count": count, "data_seed": data_seed})
    for n in sample_lengths(dist, window, np.random.default_rng(data_seed), count):
        print(format_sample(generate_sample(lang, int(n))))
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out)
    _announce({**cfg.to_dict(), "trial_index": args.trial_index, "out": str(out)})
    result = train(cfg, args.trial_index)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    write_trial(out, cfg, result, args.trial_index)
    if result.records:
        last = result.records[-1]
        print(f"epoch {last.epoch} loss {last.training_loss:.6g} errors {_fmt_slots(last.error_profile.slots())}")
    return 0


def cmd_sweep(args) -> int:
    if (args.config is None) == (args.preset is None):
        raise UsageError("sweep needs exactly one of --config or --preset")
    overrides = _overrides(args)
    try:
        if args.preset:
            lang = overrides.pop("language", Language.ANBN)
            grid = preset_grid(args.preset, lang, **overrides)
        else:
            doc = _read_json(args.config)
            items = doc if isinstance(doc, list) else [doc]
            grid = expand_grid([{**item, **overrides} for item in items])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid sweep configuration: {exc}") from None
    _announce({"cells": [cfg.to_dict() for cfg in grid], "out": args.out, "jobs": args.jobs})
    run_sweep(grid, args.out, jobs=args.jobs)
    summary = json.loads((Path(args.out) / "summary.json").read_text())
    failed = [s for s in summary if s["status"] != "ok"]
    print(f"{len(summary) - len(failed)} of {len(summary)} cells completed; results in {args.out}")
    for s in failed:
        print(f"failed: {s['cell']}: {s['error']}", file=sys.stderr)
    return 0 if not failed else EXIT_FAILED


def _load(path: Path, lang: Language | None):
    params, meta = load_checkpoint(path)
    if lang is None:
        lang = Language.parse(meta["language"]) if "language" in meta else Language.from_input_dim(params.d)
    if lang.order != params.d:
        raise UsageError(f"checkpoint has input dimension {params.d}, incompatible with {lang.value}")
    return params, lang


def _fmt_slots(slots) -> str:
    return " ".join(f"e{i}={'censored' if e is None else e}" for i, e in enumerate(slots, 1))


def cmd_evaluate(args) -> int:
    cfg = EvalConfig(5 if args.k is None else args.k, 1000 if args.max_n is None else args.max_n)
    params, lang = _load(args.checkpoint, args.language)
    _announce({"checkpoint": str(args.checkpoint), "language": lang.value, "k": cfg.k, "max_n": cfg.max_n})
    profile = evaluate(params, lang, cfg)
    print(_fmt_slots(profile.slots()))
    return 0


def cmd_gradcheck(args) -> int:
    lang = args.language or Language.ANBN
    hidden = args.hidden or 4
    n = args.n or 3
    seed = args.seed or 0
    _announce({"language": lang.value, "hidden": hidden, "n": n, "seed": seed, "configs": args.configs, "epsilon": args.epsilon})
    cases = [(lang, hidden, n, seed)]
    rng = np.random.default_rng(seed)
    for _ in range(args.configs - 1):
        cases.append((list(Language)[int(rng.integers(3))], int(rng.integers(1, 6)), int(rng.integers(1, 5)), int(rng.integers(2**31))))
    worst = 0.0
    for case_lang, case_h, case_n, case_seed in cases:
        p = init_parameters(case_lang.order, case_h, case_seed)
        sample = generate_sample(case_lang, case_n)
        analytic, _ = backward(p, sample)
        worst = max(worst, max_relative_error(analytic, finite_difference_grad(p, sample, args.epsilon)))
    print(f"max relative error {worst:.3e} over {len(cases)} configuration(s)")
    return 0 if worst < GRADCHECK_TOLERANCE else EXIT_FAILED


def cmd_trace(args) -> int:
    params, lang = _load(args.checkpoint, args.language)
    n = args.n or 50
    out = Path(args.out)
    _announce({"checkpoint": str(args.checkpoint), "language": lang.value, "n": n, "out": str(out), "rho_min": args.rho_min})
    trace = tracing.trace_sequence(params, lang, n)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.csv").write_text(tracing.trace_csv(trace), encoding="utf-8")
    (out / "predictions.csv").write_text(tracing.predictions_csv(trace), encoding="utf-8")
    print(tracing.run_length([r.predicted for r in trace]))
    seg = tracing.phase_segmentation(lang, n)
    for unit in tracing.detect_counters(trace, seg, args.rho_min, require_all_phases=False):
        dirs = ",".join(d or "-" for d in unit.directions)
        print(f"unit {unit.unit}: {dirs}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lstm-formal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="print samples as input<TAB>target-sets")
    p.add_argument("--language", type=_language)
    p.add_argument("--n", type=int)
    p.add_argument("--count", type=int, help="draw COUNT lengths from --dist/--window instead of a fixed --n")
    p.add_argument("--dist", type=_typed(DistributionSpec.parse))
    p.add_argument("--window", type=_typed(LengthWindow.parse))
    p.add_argument("--data-seed", type=int)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="run one trial, write its CSV and checkpoint")
    _add_experiment_flags(p)
    p.add_argument("--trial-index", type=int, default=0)
    p.add_argument("--out", default="runs/train")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="run a grid of experiments")
    _add_experiment_flags(p)
    p.add_argument("--preset", choices=["distribution", "window", "capacity"])
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="runs/sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="first-k error profile of a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--language", type=_language)
    p.add_argument("--k", type=int)
    p.add_argument("--max-n", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="compare BPTT with central differences")
    p.add_argument("--language", type=_language)
    p.add_argument("--hidden", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--configs", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("trace", help="write hidden/cell traces for one probe string")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--language", type=_language)
    p.add_argument("--n", type=int)
    p.add_argument("--rho-min", type=float, default=0.9)
    p.add_argument("--out", default="runs/trace")
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
