"""End-to-end experiment orchestration with persistent, resumable artifacts.

Layout under the output directory::

    manifest.json
    features/features.csv            instance + one column per feature
    labels/labels.csv                tuned labels, training instances only
    labels/<instance>.json           per-instance label and solver-call ledger
    labels/<instance>.journal.jsonl  every configuration the tuner evaluated
    model/model.json                 ridge model (see predictor)
    model/cv_summary.csv, model/cv_folds.csv, model/importance.csv
    model/predictions.csv            instance, Lh, eta, Lh_raw, eta_raw
    runs/<instance>/<arm>/results.csv, summary.json, run_<k>.sol
    reports/comparison.csv, reports/report.txt
    checkpoints/<stage>              marker files for resumption

Per-run seeds are the manifest seed plus the run index.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .features import compute_features, read_feature_csv, write_feature_csv
from .instance import Instance, load_instance, problem_size
from .predictor import (
    DEFAULT_LAMBDA_GRID,
    RegressionModel,
    cross_validate,
    feature_importance,
    predict_params,
    train_model,
)
from .solution import EvaluationBudget, check_feasibility, format_solution, max_evals
from .solver import GLOBAL_CONFIG, ParameterConfig, run
from .stats import AllZeroDifferences, wilcoxon_signed_rank
from .tuner import TunerConfig, read_labels_csv, solver_run_bound, tune_instance, write_labels_csv

ARMS = ("global", "predicted", "oracle")
ALPHA = 0.05
TEST_INSTANCES = (
    "E-n22-k4",
    "E-n112-k8-s11",
    "F-n140-k5-s5",
    "M-n212-k16-s12",
    "X-n221-k11-s7",
    "X-n469-k26-s10",
    "X-n698-k75-s13",
    "X-n1006-k43-s5",
)
INSTANCE_SUFFIXES = (".evrp", ".txt")


class MissingArtifact(FileNotFoundError):
    pass


class RunFailure(RuntimeError):
    pass


def discover_instances(benchmark_dir: str | Path) -> dict[str, Path]:
    root = Path(benchmark_dir)
    if not root.is_dir():
        raise MissingArtifact(f"benchmark directory not found: {root}")
    found = {}
    for path in sorted(root.iterdir()):
        if path.suffix in INSTANCE_SUFFIXES and path.is_file():
            found[path.stem] = path
    return found


def _default_split(names: Sequence[str]) -> tuple[list[str], list[str]]:
    test = [n for n in TEST_INSTANCES if n in names]
    if not test:
        # no standard test names present: hold out every fifth instance
        ordered = sorted(names)
        test = [n for i, n in enumerate(ordered) if i % 5 == 4] or ordered[-1:]
    train = sorted(n for n in names if n not in test)
    return train, test


@dataclass
class ExperimentManifest:
    benchmark_dir: str
    out_dir: str
    train: list[str]
    test: list[str]
    runs: int = 10
    global_lh: int = GLOBAL_CONFIG.history_length
    global_eta: int = GLOBAL_CONFIG.max_attempts
    seed: int = 0
    eval_budget_scale: float = 1.0
    tuner_budget_scale: float = 1.0
    jobs: int = 1
    lambda_grid: list[float] = field(default_factory=lambda: list(DEFAULT_LAMBDA_GRID))
    top_k: int = 20
    folds: int = 5
    oracle_labels: str | None = None

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if set(self.train) & set(self.test):
            raise ValueError(f"train and test overlap: {sorted(set(self.train) & set(self.test))}")
        if not self.test:
            raise ValueError("test set is empty")
        if self.eval_budget_scale <= 0 or self.tuner_budget_scale <= 0:
            raise ValueError("budget scales must be positive")

    @classmethod
    def from_benchmark(cls, benchmark_dir, out_dir, test: Sequence[str] | None = None, **kwargs) -> "ExperimentManifest":
        names = list(discover_instances(benchmark_dir))
        if test is None:
            train, test = _default_split(names)
        else:
            missing = sorted(set(test) - set(names))
            if missing:
                raise ValueError(f"test instances not in benchmark: {missing}")
            train = sorted(n for n in names if n not in test)
        return cls(str(benchmark_dir), str(out_dir), list(train), list(test), **kwargs)

    def validate_against(self, available: Iterable[str]) -> None:
        available = set(available)
        missing = sorted((set(self.train) | set(self.test)) - available)
        if missing:
            raise ValueError(f"manifest names instances absent from the benchmark: {missing}")

    @property
    def global_config(self) -> ParameterConfig:
        return ParameterConfig(self.global_lh, self.global_eta)

    def tuner_config(self) -> TunerConfig:
        base = TunerConfig(seed=self.seed, top_k=self.top_k, eval_budget_scale=self.eval_budget_scale, jobs=self.jobs)
        return base.scaled(self.tuner_budget_scale) if self.tuner_budget_scale != 1.0 else base

    def to_json(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentManifest":
        return cls(**json.loads(Path(path).read_text()))


# -- arm statistics --------------------------------------------------------------


@dataclass(frozen=True)
class ArmStats:
    best: float
    mean: float
    std: float
    runs: int = 0

    @classmethod
    def from_objectives(cls, values: Sequence[float]) -> "ArmStats":
        v = np.asarray(values, dtype=float)
        if len(v) == 0:
            raise ValueError("no objectives")
        std = float(v.std(ddof=1)) if len(v) > 1 else 0.0
        return cls(float(v.min()), float(v.mean()), std, len(v))


@dataclass
class ComparisonRow:
    instance: str
    arms: dict[str, ArmStats]

    def gap(self, arm: str) -> float | None:
        """Percent change of the arm's mean versus the global arm's mean."""
        if arm not in self.arms or "global" not in self.arms:
            return None
        g = self.arms["global"].mean
        return (self.arms[arm].mean - g) / g * 100.0


@dataclass
class ComparisonSummary:
    arm: str
    total: int
    improved: int
    unchanged: int
    degraded: int
    average_gap: float
    best_gap: float
    worst_gap: float
    wilcoxon_w: float
    wilcoxon_p: float

    @property
    def significant(self) -> bool:
        return not math.isnan(self.wilcoxon_p) and self.wilcoxon_p < ALPHA


def summarize(rows: Sequence[ComparisonRow], arm: str) -> ComparisonSummary | None:
    paired = [r for r in rows if arm in r.arms and "global" in r.arms]
    if not paired:
        return None
    diffs = [r.arms[arm].mean - r.arms["global"].mean for r in paired]
    gaps = [r.gap(arm) for r in paired]
    try:
        w, p = wilcoxon_signed_rank(diffs)
    except AllZeroDifferences:
        w, p = math.nan, math.nan
    return ComparisonSummary(
        arm=arm,
        total=len(paired),
        improved=sum(d < 0 for d in diffs),
        unchanged=sum(d == 0 for d in diffs),
        degraded=sum(d > 0 for d in diffs),
        average_gap=float(np.mean(gaps)),
        best_gap=float(min(gaps)),
        worst_gap=float(max(gaps)),
        wilcoxon_w=w,
        wilcoxon_p=p,
    )


def read_arm_table(path: str | Path) -> list[ComparisonRow]:
    """Rows from a CSV with columns instance, arm, best, mean, std (file order kept)."""
    rows: dict[str, ComparisonRow] = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = rows.setdefault(rec["instance"], ComparisonRow(rec["instance"], {}))
            runs = int(rec["runs"]) if rec.get("runs") else 0
            row.arms[rec["arm"]] = ArmStats(float(rec["best"]), float(rec["mean"]), float(rec["std"]), runs)
    return list(rows.values())


def write_arm_table(rows: Sequence[ComparisonRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance", "arm", "best", "mean", "std", "runs", "gap_percent"])
        for row in rows:
            for arm in ARMS:
                if arm in row.arms:
                    s = row.arms[arm]
                    gap = row.gap(arm) if arm != "global" else None
                    w.writerow(
                        [row.instance, arm, repr(s.best), repr(s.mean), repr(s.std), s.runs, "" if gap is None else f"{gap:.4f}"]
                    )


def published_results_path():
    return resources.files("evrp_iapc") / "data" / "published_test_results.csv"


# -- rendering -------------------------------------------------------------------


def render_comparison(rows: Sequence[ComparisonRow]) -> str:
    head = f"{'Instance':<16} {'Metric':<6} {'Global':>11} {'Predicted':>11} {'Gap':>8} {'Oracle':>11} {'Gap':>8}"
    lines = [head, "-" * len(head)]

    def cell(row, arm, attr):
        return f"{getattr(row.arms[arm], attr):11.2f}" if arm in row.arms else " " * 11

    def gap_cell(row, arm, show):
        g = row.gap(arm) if show else None
        return f"{g:7.2f}%" if g is not None else " " * 8

    for row in rows:
        for attr, label in (("best", "Best"), ("mean", "Mean"), ("std", "Std")):
            show = attr == "mean"
            lines.append(
                f"{row.instance if attr == 'best' else '':<16} {label:<6} {cell(row, 'global', attr)} "
                f"{cell(row, 'predicted', attr)} {gap_cell(row, 'predicted', show)} "
                f"{cell(row, 'oracle', attr)} {gap_cell(row, 'oracle', show)}"
            )
    return "\n".join(lines)


def render_summary(summary: ComparisonSummary | None, title: str) -> str:
    if summary is None:
        return f"{title}: no instances with both arms"
    s = summary
    if math.isnan(s.wilcoxon_p):
        verdict = "Wilcoxon signed-rank: all differences zero, test undefined"
    else:
        verdict = (
            f"Wilcoxon signed-rank on instance means: W+ = {s.wilcoxon_w:g}, p = {s.wilcoxon_p:.4f} "
            f"({'significant' if s.significant else 'not significant'} at alpha = {ALPHA})"
        )
    return "\n".join(
        [
            title,
            f"  Total number of instances        {s.total}",
            f"  Instances improved (mean)        {s.improved} / {s.total}",
            f"  Instances unchanged              {s.unchanged} / {s.total}",
            f"  Instances degraded               {s.degraded} / {s.total}",
            f"  Average gap                      {s.average_gap:+.2f}%",
            f"  Best improvement                 {s.best_gap:+.2f}%",
            f"  Worst degradation                {s.worst_gap:+.2f}%",
            f"  {verdict}",
        ]
    )


# -- solve -----------------------------------------------------------------------


@dataclass
class SolveOutcome:
    instance: str
    params: ParameterConfig
    stats: ArmStats
    objectives: list[float]
    out_dir: Path | None


def _solve_one(task) -> dict:
    instance, params, seed, scale, trace_path = task
    budget = EvaluationBudget.for_instance(instance, scale)
    result = run(instance, params, budget, seed, trace=trace_path is not None)
    report = check_feasibility(result.best_solution, instance)
    if trace_path is not None:
        with open(trace_path, "w") as fh:
            for rec in result.acceptance_trace:
                fh.write(json.dumps(asdict(rec)) + "\n")
    return {
        "seed": seed,
        "objective": result.best_objective,
        "evaluations": result.evaluations_used,
        "max_evals": budget.max_evals,
        "restarts": result.restarts,
        "feasible": report.feasible,
        "solution": format_solution(result.best_solution, instance, result.best_objective),
    }


def solve_runs(
    instance: Instance,
    params: ParameterConfig,
    runs: int,
    seed: int = 0,
    eval_budget_scale: float = 1.0,
    out_dir: str | Path | None = None,
    jobs: int = 1,
    trace: bool = False,
) -> SolveOutcome:
    """``runs`` independent seeded runs; per-run files are written once, in run order."""
    if runs < 1:
        raise ValueError("runs must be at least 1")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "FAILED").unlink(missing_ok=True)
    tasks = [
        (instance, params, seed + k, eval_budget_scale, (out / f"trace_{k:02d}.jsonl") if (trace and out) else None)
        for k in range(runs)
    ]
    records: list[dict] = []
    failure = None
    try:
        if jobs > 1 and runs > 1:
            with ProcessPoolExecutor(min(jobs, runs)) as pool:
                for rec in pool.map(_solve_one, tasks):
                    records.append(rec)
        else:
            for task in tasks:
                records.append(_solve_one(task))
    except Exception as exc:  # keep completed runs, mark the failure
        failure = exc
    if out is not None:
        _write_run_files(out, instance, params, eval_budget_scale, records)
        if failure is not None:
            (out / "FAILED").write_text(f"run {len(records)} failed: {type(failure).__name__}: {failure}\n")
    if failure is not None:
        raise RunFailure(f"{instance.name}: run {len(records)} failed") from failure
    objectives = [r["objective"] for r in records]
    return SolveOutcome(instance.name, params, ArmStats.from_objectives(objectives), objectives, out)


def _write_run_files(out: Path, instance: Instance, params, scale, records) -> None:
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "seed", "objective", "evaluations", "max_evals", "restarts", "feasible"])
        for k, r in enumerate(records):
            w.writerow([k, r["seed"], repr(r["objective"]), r["evaluations"], r["max_evals"], r["restarts"], int(r["feasible"])])
    for k, r in enumerate(records):
        (out / f"run_{k:02d}.sol").write_text(r["solution"])
    summary = {
        "instance": instance.name,
        "Lh": params.history_length,
        "eta": params.max_attempts,
        "eval_budget_scale": scale,
        "max_evals": max_evals(problem_size(instance)),
        "runs": len(records),
    }
    if records:
        s = ArmStats.from_objectives([r["objective"] for r in records])
        summary.update(best=s.best, mean=s.mean, std=s.std)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def cmd_solve(
    instance_path: str | Path,
    lh: int,
    eta: int,
    runs: int,
    seed: int = 0,
    eval_budget_scale: float = 1.0,
    out_dir: str | Path | None = None,
    jobs: int = 1,
    trace: bool = False,
) -> SolveOutcome:
    instance = load_instance(instance_path)
    return solve_runs(instance, ParameterConfig(lh, eta), runs, seed, eval_budget_scale, out_dir, jobs, trace)


# -- featurize / tune / train / predict ------------------------------------------------


def cmd_features(instance_paths: Sequence[str | Path], out_csv: str | Path) -> dict:
    rows = {}
    for path in instance_paths:
        inst = load_instance(path)
        rows[inst.name] = compute_features(inst)
    Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
    write_feature_csv(rows, out_csv)
    return rows


def cmd_tune(instance_path: str | Path, config: TunerConfig, out_dir: str | Path):
    instance = load_instance(instance_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    result = tune_instance(instance, config, journal=out / f"{instance.name}.journal.jsonl")
    ledger = {
        "label": asdict(result.label),
        "solver_runs": result.solver_runs,
        "solver_run_bound": solver_run_bound(config, result.label.mode_count),
        "modes": [
            {"Lh_interval": list(m.lh_interval), "eta_interval": list(m.eta_interval), "confirmation": m.confirmation}
            for m in result.modes
        ],
        "config": asdict(config),
        "seconds": round(time.perf_counter() - started, 3),
    }
    (out / f"{instance.name}.json").write_text(json.dumps(ledger, indent=2, sort_keys=True) + "\n")
    return result.label


def _load_label_file(path: Path):
    from .tuner import TuningLabel

    d = json.loads(path.read_text())["label"]
    return TuningLabel(
        d["instance"], d["Lh_label"], d["eta_label"], tuple(d["Lh_iqr"]), tuple(d["eta_iqr"]), d["mode_index"], d["mode_count"]
    )


def _training_matrix(features_csv, labels_csv, names=None):
    features = read_feature_csv(features_csv)
    labels = read_labels_csv(labels_csv)
    names = sorted(labels) if names is None else list(names)
    missing = [n for n in names if n not in features]
    if missing:
        raise MissingArtifact(f"{features_csv}: no features for {missing}")
    x = np.array([features[n].to_array() for n in names])
    y = {"Lh": [labels[n].Lh_label for n in names], "eta": [labels[n].eta_label for n in names]}
    return x, y


def cmd_train(
    features_csv: str | Path,
    labels_csv: str | Path,
    out_dir: str | Path,
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    seed: int = 0,
    folds: int = 5,
) -> RegressionModel:
    x, y = _training_matrix(features_csv, labels_csv)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    folds = min(folds, len(x))
    if len(x) >= 3:
        report = cross_validate(x, y, lambda_grid, folds=folds, seed=seed)
        report.write_csv(out / "cv_summary.csv")
        report.write_folds_csv(out / "cv_folds.csv")
    model = train_model(x, y, lambda_grid, seed=seed)
    model.save(out / "model.json")
    with open(out / "importance.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "feature", "coefficient"])
        for target in model.targets:
            for name, coef in feature_importance(model, target):
                w.writerow([target, name, f"{coef:.6g}"])
    return model


def cmd_predict(model_path: str | Path, features_csv: str | Path, names: Sequence[str] | None, out_csv: str | Path | None):
    model = RegressionModel.load(model_path)
    features = read_feature_csv(features_csv)
    names = sorted(features) if names is None else list(names)
    out = {}
    for n in names:
        if n not in features:
            raise MissingArtifact(f"{features_csv}: no features for {n}")
        out[n] = (predict_params(model, features[n]), model.predict_raw(features[n].to_array()))
    if out_csv is not None:
        with open(out_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["instance", "Lh", "eta", "Lh_raw", "eta_raw"])
            for n, (p, raw) in out.items():
                w.writerow([n, p.history_length, p.max_attempts, f"{raw['Lh']:.6g}", f"{raw['eta']:.6g}"])
    return {n: p for n, (p, _) in out.items()}


def read_predictions(path: str | Path) -> dict[str, ParameterConfig]:
    with open(path, newline="") as fh:
        return {r["instance"]: ParameterConfig(int(r["Lh"]), int(r["eta"])) for r in csv.DictReader(fh)}


# -- pipeline --------------------------------------------------------------------


class _Checkpoints:
    def __init__(self, root: Path):
        self.dir = root / "checkpoints"
        self.dir.mkdir(parents=True, exist_ok=True)

    def done(self, stage: str) -> bool:
        return (self.dir / stage).exists()

    def mark(self, stage: str) -> None:
        (self.dir / stage).write_text("done\n")


def cmd_pipeline(manifest: ExperimentManifest, log=print) -> list[ComparisonRow]:
    """featurize -> tune train set -> train -> predict test set -> solve arms -> report.

    Each stage leaves a checkpoint; rerunning with the same manifest resumes
    after the last completed stage.
    """
    root = Path(manifest.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    saved = root / "manifest.json"
    if saved.exists() and ExperimentManifest.load(saved) != manifest:
        raise ValueError(f"{root} holds artifacts of a different manifest")
    manifest.save(saved)
    paths = discover_instances(manifest.benchmark_dir)
    manifest.validate_against(paths)
    marks = _Checkpoints(root)
    features_csv = root / "features" / "features.csv"
    labels_dir = root / "labels"
    labels_csv = labels_dir / "labels.csv"
    model_dir = root / "model"
    predictions_csv = model_dir / "predictions.csv"
    log(f"eval-budget-scale {manifest.eval_budget_scale}, tuner-budget-scale {manifest.tuner_budget_scale}")

    if not marks.done("features"):
        log(f"features: {len(paths)} instances")
        cmd_features([paths[n] for n in sorted(manifest.train + manifest.test)], features_csv)
        marks.mark("features")

    if not marks.done("tune"):
        config = manifest.tuner_config()
        for n in manifest.train:
            if (labels_dir / f"{n}.json").exists():
                continue
            label = cmd_tune(paths[n], config, labels_dir)
            log(f"tune: {n} -> Lh {label.Lh_label}, eta {label.eta_label} ({label.mode_count} mode(s))")
        write_labels_csv([_load_label_file(labels_dir / f"{n}.json") for n in manifest.train], labels_csv)
        marks.mark("tune")

    if not marks.done("train"):
        cmd_train(features_csv, labels_csv, model_dir, manifest.lambda_grid, manifest.seed, manifest.folds)
        log("train: model written")
        marks.mark("train")

    if not marks.done("predict"):
        cmd_predict(model_dir / "model.json", features_csv, manifest.test, predictions_csv)
        marks.mark("predict")

    predicted = read_predictions(predictions_csv)
    oracle = read_labels_csv(manifest.oracle_labels) if manifest.oracle_labels else {}
    for n in manifest.test:
        arms = {"global": manifest.global_config, "predicted": predicted[n]}
        if n in oracle:
            arms["oracle"] = ParameterConfig(oracle[n].Lh_label, oracle[n].eta_label)
        for arm, params in arms.items():
            stage = f"solve.{n}.{arm}"
            if marks.done(stage):
                continue
            outcome = solve_runs(
                load_instance(paths[n]),
                params,
                manifest.runs,
                manifest.seed,
                manifest.eval_budget_scale,
                root / "runs" / n / arm,
                manifest.jobs,
            )
            log(f"solve: {n} [{arm}] Lh {params.history_length} eta {params.max_attempts} -> mean {outcome.stats.mean:.2f}")
            marks.mark(stage)

    rows, text = cmd_report(root)
    log(text)
    return rows


# -- report / replay ---------------------------------------------------------------


def collect_runs(results_dir: str | Path) -> list[ComparisonRow]:
    runs_dir = Path(results_dir) / "runs"
    if not runs_dir.is_dir():
        raise MissingArtifact(f"missing artifact: {runs_dir}")
    rows = []
    for inst_dir in sorted(p for p in runs_dir.iterdir() if p.is_dir()):
        row = ComparisonRow(inst_dir.name, {})
        for arm in ARMS:
            results = inst_dir / arm / "results.csv"
            if not results.exists():
                continue
            with open(results, newline="") as fh:
                objectives = [float(r["objective"]) for r in csv.DictReader(fh)]
            if objectives:
                row.arms[arm] = ArmStats.from_objectives(objectives)
        if row.arms:
            rows.append(row)
    return rows


def _render_cv(model_dir: Path) -> str | None:
    path = model_dir / "cv_summary.csv"
    if not path.exists():
        return None
    lines = ["Cross-validation (mean +- std over folds, model scale)"]
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            lines.append(
                f"  {r['target']:<4} [{r['scale']}]  MAE {r['MAE_mean']} +- {r['MAE_std']}  "
                f"RMSE {r['RMSE_mean']} +- {r['RMSE_std']}  Spearman {r['Spearman_mean']} +- {r['Spearman_std']}"
            )
    return "\n".join(lines)


def _render_importance(model_dir: Path, top: int = 10) -> str | None:
    path = model_dir / "importance.csv"
    if not path.exists():
        return None
    with open(path, newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if r["target"] == "Lh"]
    lines = [f"Feature importance for Lh (standardized ridge coefficients, top {top})"]
    lines += [f"  {r['feature']:<32} {float(r['coefficient']):+.4f}" for r in rows[:top]]
    return "\n".join(lines)


def _scale_line(results_dir: Path) -> str:
    manifest = results_dir / "manifest.json"
    if manifest.exists():
        m = json.loads(manifest.read_text())
        return f"eval-budget-scale {m['eval_budget_scale']}, tuner-budget-scale {m['tuner_budget_scale']}"
    return "eval-budget-scale unknown (no manifest)"


def cmd_report(results_dir: str | Path) -> tuple[list[ComparisonRow], str]:
    """Render comparison, summaries, CV and importance tables from a results tree."""
    root = Path(results_dir)
    rows = collect_runs(root)
    parts = [_scale_line(root), "", render_comparison(rows), ""]
    parts.append(render_summary(summarize(rows, "predicted"), "Predicted parameters vs global configuration"))
    oracle = summarize(rows, "oracle")
    if oracle is not None:
        parts += ["", render_summary(oracle, "Instance-specific tuning vs global configuration")]
    for extra in (_render_cv(root / "model"), _render_importance(root / "model")):
        if extra:
            parts += ["", extra]
    text = "\n".join(parts) + "\n"
    reports = root / "reports"
    reports.mkdir(parents=True, exist_ok=True)
    write_arm_table(rows, reports / "comparison.csv")
    (reports / "report.txt").write_text(text)
    return rows, text


def cmd_replay(table_csv: str | Path | None = None) -> tuple[list[ComparisonRow], str]:
    """Gaps and Wilcoxon test from stored arm statistics instead of fresh solves."""
    rows = read_arm_table(table_csv or published_results_path())
    parts = ["replay of stored arm statistics (no solver runs)", "", render_comparison(rows), ""]
    parts.append(render_summary(summarize(rows, "predicted"), "Predicted parameters vs global configuration"))
    oracle = summarize(rows, "oracle")
    if oracle is not None:
        parts += ["", render_summary(oracle, "Instance-specific tuning vs global configuration")]
    return rows, "\n".join(parts) + "\n"

