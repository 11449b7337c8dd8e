"""Command-line entry point: ``evrp-iapc <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiment as ex
from .features import compute_features
from .instance import InstanceFormatError, generate_instance, load_instance, problem_size, save_instance
from .predictor import DEFAULT_LAMBDA_GRID
from .solution import max_evals
from .solver import GLOBAL_CONFIG
from .tuner import TunerConfig, write_labels_csv


def _grid(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("lambda grid must hold non-negative values")
    return values


def _instances(args) -> list[Path]:
    if args.instance:
        return [Path(p) for p in args.instance]
    if args.benchmark_dir:
        return list(ex.discover_instances(args.benchmark_dir).values())
    raise SystemExit("give --instance or --benchmark-dir")


def cmd_parse(args) -> int:
    for path in _instances(args):
        inst = load_instance(path)
        pz = problem_size(inst)
        print(
            f"{inst.name}: customers {inst.num_customers}, stations {inst.num_stations}, vehicles {inst.num_vehicles}, "
            f"capacity {inst.vehicle_capacity:g}, battery {inst.battery_capacity:g}, "
            f"consumption {inst.energy_consumption:g}, pz {pz}, max evals {max_evals(pz)}"
        )
    return 0


def cmd_features(args) -> int:
    paths = _instances(args)
    if args.out:
        rows = ex.cmd_features(paths, args.out)
        print(f"wrote {len(rows)} feature rows to {args.out}")
    else:
        for path in paths:
            fv = compute_features(load_instance(path))
            print(json.dumps({"instance": path.stem, **fv.as_dict()}))
    return 0


def cmd_solve(args) -> int:
    if not args.instance or len(args.instance) != 1:
        raise SystemExit("solve needs exactly one --instance")
    outcome = ex.cmd_solve(
        args.instance[0],
        args.lh,
        args.eta,
        args.runs,
        args.seed,
        args.eval_budget_scale,
        args.out,
        args.jobs,
        args.trace,
    )
    s = outcome.stats
    print(f"eval-budget-scale {args.eval_budget_scale}")
    print(f"{outcome.instance} Lh {args.lh} eta {args.eta}: best {s.best:.2f} mean {s.mean:.2f} std {s.std:.2f} ({s.runs} runs)")
    return 0


def cmd_tune(args) -> int:
    config = TunerConfig(seed=args.seed, top_k=args.topk, eval_budget_scale=args.eval_budget_scale, jobs=args.jobs)
    if args.tuner_budget_scale != 1.0:
        config = config.scaled(args.tuner_budget_scale)
    out = Path(args.out or "labels")
    labels = []
    for path in _instances(args):
        label = ex.cmd_tune(path, config, out)
        labels.append(label)
        print(f"{label.instance}: Lh {label.Lh_label} eta {label.eta_label} (mode {label.mode_index + 1}/{label.mode_count})")
    write_labels_csv(labels, out / "labels.csv")
    return 0


def cmd_train(args) -> int:
    out = Path(args.out or "model")
    model = ex.cmd_train(args.features, args.labels, out, args.lambda_grid, args.seed, args.folds)
    lams = ", ".join(f"{k}: lambda {t.lam:g}" for k, t in model.targets.items())
    print(f"model written to {out / 'model.json'} ({lams})")
    return 0


def cmd_predict(args) -> int:
    names = [Path(p).stem for p in args.instance] if args.instance else None
    preds = ex.cmd_predict(args.model, args.features, names, args.out)
    for name, p in preds.items():
        print(f"{name}: Lh {p.history_length} eta {p.max_attempts}")
    return 0


def cmd_pipeline(args) -> int:
    if args.manifest:
        manifest = ex.ExperimentManifest.load(args.manifest)
    else:
        if not args.benchmark_dir:
            raise SystemExit("pipeline needs --manifest or --benchmark-dir")
        manifest = ex.ExperimentManifest.from_benchmark(
            args.benchmark_dir,
            args.out or "results",
            test=args.test.split(",") if args.test else None,
            runs=args.runs,
            seed=args.seed,
            eval_budget_scale=args.eval_budget_scale,
            tuner_budget_scale=args.tuner_budget_scale,
            jobs=args.jobs,
            lambda_grid=list(args.lambda_grid),
            top_k=args.topk,
            global_lh=args.lh,
            global_eta=args.eta,
            oracle_labels=args.oracle_labels,
        )
    ex.cmd_pipeline(manifest)
    return 0


def cmd_report(args) -> int:
    _, text = ex.cmd_report(args.out or "results")
    print(text, end="")
    return 0


def cmd_replay(args) -> int:
    _, text = ex.cmd_replay(args.table)
    print(text, end="")
    return 0


def cmd_generate(args) -> int:
    out = Path(args.out or "instances")
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        inst = generate_instance(
            args.customers, args.stations, args.seed + k, capacity=args.capacity, clustered=args.clustered
        )
        save_instance(inst, out / f"{inst.name}.evrp")
        print(out / f"{inst.name}.evrp")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evrp-iapc", description="Instance-aware parameter configuration for b-LAHC on the E-CVRP.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, solve=False, tune=False):
        p.add_argument("--instance", action="append", help="instance file (repeatable)")
        p.add_argument("--benchmark-dir", help="directory of instance files")
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1, help="parallel solver runs")
        if solve or tune:
            p.add_argument("--eval-budget-scale", type=float, default=1.0, help="multiplier on 25000 x pz evaluations")
        if solve:
            p.add_argument("--lh", type=int, default=GLOBAL_CONFIG.history_length)
            p.add_argument("--eta", type=int, default=GLOBAL_CONFIG.max_attempts)
            p.add_argument("--runs", type=int, default=10)
        if tune:
            p.add_argument("--tuner-budget-scale", type=float, default=1.0, help="multiplier on tuner configuration budgets")
            p.add_argument("--topk", type=int, default=20)

    common(sub.add_parser("parse", help="validate instances and print their sizes"))
    common(sub.add_parser("features", help="compute feature vectors"))
    p = sub.add_parser("solve", help="seeded b-LAHC runs on one instance")
    common(p, solve=True)
    p.add_argument("--trace", action="store_true", help="write per-run acceptance traces (JSONL)")
    common(sub.add_parser("tune", help="two-stage tuning of (Lh, eta) labels"), tune=True)

    p = sub.add_parser("train", help="fit the ridge model from features and labels")
    common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--lambda-grid", type=_grid, default=list(DEFAULT_LAMBDA_GRID))
    p.add_argument("--folds", type=int, default=5)

    p = sub.add_parser("predict", help="predict (Lh, eta) from features")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)

    p = sub.add_parser("pipeline", help="featurize, tune, train, predict, solve and report")
    common(p, solve=True, tune=True)
    p.add_argument("--manifest", help="manifest JSON (overrides the other flags)")
    p.add_argument("--test", help="comma-separated test instance names")
    p.add_argument("--lambda-grid", type=_grid, default=list(DEFAULT_LAMBDA_GRID))
    p.add_argument("--oracle-labels", help="labels CSV used for the oracle arm on test instances")

    common(sub.add_parser("report", help="render tables from a results directory (--out)"))

    p = sub.add_parser("replay", help="gaps and Wilcoxon test from stored arm statistics")
    p.add_argument("--table", help="CSV with instance, arm, best, mean, std (default: bundled published table)")

    p = sub.add_parser("generate", help="write synthetic instances")
    p.add_argument("--out")
    p.add_argument("--customers", type=int, default=20)
    p.add_argument("--stations", type=int, default=4)
    p.add_argument("--capacity", type=float, default=100.0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clustered", action="store_true")
    return parser


COMMANDS = {
    "parse": cmd_parse,
    "features": cmd_features,
    "solve": cmd_solve,
    "tune": cmd_tune,
    "train": cmd_train,
    "predict": cmd_predict,
    "pipeline": cmd_pipeline,
    "report": cmd_report,
    "replay": cmd_replay,
    "generate": cmd_generate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InstanceFormatError, ex.MissingArtifact, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
