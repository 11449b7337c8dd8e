"""Two-stage racing tuner producing per-instance (L_h, eta_max) labels.

Stage one samples the broad parameter box and races the samples to locate
good regions. The best fraction of the coarse ranking is split into modes
wherever the sorted log(L_h) values jump by more than ``tau``; each mode gets
a refined L_h interval (P10..P90 widened by a buffer), eta_max gets a single
refined interval from the same top configurations. Stage two races fresh
samples inside each mode's box, the top-K of each mode are summarized by
median and quartiles, and the mode whose median configuration does best in a
confirmation run-set supplies the label.

Racing: every surviving configuration gets one run per round with a seed
shared by the whole round. After each round from the second on, a
configuration whose mean exceeds the best mean by more than the pooled
within-configuration standard deviation is dropped. Racing stops when at
most ``top_k`` remain or every survivor has ``runs_per_config`` runs.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .instance import Instance
from .solution import EvaluationBudget
from .solver import ParameterConfig, run

Objective = Callable[[ParameterConfig, int], float]


class BudgetTooSmall(ValueError):
    pass


@dataclass
class TunerConfig:
    lh_range: tuple[int, int] = (300, 20000)
    eta_range: tuple[int, int] = (1, 500)
    coarse_budget: int = 3500
    fine_budget_per_mode: int = 8000
    tau: float = 0.8
    quantiles: tuple[float, float] = (0.10, 0.90)
    buffer: float = 0.20
    top_k: int = 20
    runs_per_config: int = 3
    confirm_runs: int = 5
    top_fraction: float = 0.10
    seed: int = 0
    eval_budget_scale: float = 1.0
    jobs: int = 1

    def __post_init__(self):
        if self.lh_range[0] > self.lh_range[1] or self.eta_range[0] > self.eta_range[1]:
            raise ValueError("parameter ranges must be non-empty")
        if self.coarse_budget <= 0 or self.fine_budget_per_mode <= 0:
            raise ValueError("tuning budgets must be positive")
        if not 0 < self.buffer < 1:
            raise ValueError("buffer fraction must lie in (0, 1)")
        if self.top_k < 1 or self.runs_per_config < 1 or self.confirm_runs < 1:
            raise ValueError("top_k and run counts must be positive")

    def scaled(self, factor: float) -> "TunerConfig":
        """Copy with both configuration budgets multiplied by ``factor``."""
        data = asdict(self)
        data["coarse_budget"] = max(10, int(round(self.coarse_budget * factor)))
        data["fine_budget_per_mode"] = max(10, int(round(self.fine_budget_per_mode * factor)))
        return TunerConfig(**data)


@dataclass
class Evaluated:
    lh: int
    eta: int
    objectives: list[float] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.objectives)) if self.objectives else math.inf

    @property
    def rounds(self) -> int:
        return len(self.objectives)

    @property
    def config(self) -> ParameterConfig:
        return ParameterConfig(int(self.lh), int(self.eta))


@dataclass
class TuningLabel:
    instance: str
    Lh_label: int
    eta_label: int
    Lh_iqr: tuple[float, float]
    eta_iqr: tuple[float, float]
    mode_index: int
    mode_count: int


@dataclass
class ModeResult:
    lh_interval: tuple[int, int]
    eta_interval: tuple[int, int]
    ranked: list[Evaluated]
    lh_median: float = math.nan
    eta_median: float = math.nan
    lh_iqr: tuple[float, float] = (math.nan, math.nan)
    eta_iqr: tuple[float, float] = (math.nan, math.nan)
    confirmation: list[float] = field(default_factory=list)


@dataclass
class TuningResult:
    label: TuningLabel
    coarse: list[Evaluated]
    modes: list[ModeResult]
    solver_runs: int


class SolverObjective:
    """b-LAHC best objective for one seeded run; picklable for process pools."""

    def __init__(self, instance: Instance, eval_budget_scale: float = 1.0):
        self.instance = instance
        self.eval_budget_scale = eval_budget_scale

    def __call__(self, params: ParameterConfig, seed: int) -> float:
        budget = EvaluationBudget.for_instance(self.instance, self.eval_budget_scale)
        return run(self.instance, params, budget, seed).best_objective


class PlantedSurrogate:
    """Cheap stand-in objective with a known optimum, for exercising the tuner.

    f(L, eta) = (ln L - ln L*)^2 + ((eta - eta*) / 100)^2 + noise * N(0, 1)
    """

    def __init__(self, lh_star: float, eta_star: float, noise: float = 0.05):
        self.lh_star = lh_star
        self.eta_star = eta_star
        self.noise = noise

    def true_value(self, lh: float, eta: float) -> float:
        return (math.log(lh) - math.log(self.lh_star)) ** 2 + ((eta - self.eta_star) / 100.0) ** 2

    def __call__(self, params: ParameterConfig, seed: int) -> float:
        rng = np.random.default_rng([seed, params.history_length, params.max_attempts])
        return self.true_value(params.history_length, params.max_attempts) + self.noise * rng.standard_normal()


class _CountingObjective:
    def __init__(self, objective: Objective, jobs: int = 1):
        self.objective = objective
        self.calls = 0
        self.jobs = jobs

    def map(self, configs: list[ParameterConfig], seed: int) -> list[float]:
        self.calls += len(configs)
        if self.jobs > 1 and len(configs) > 1:
            with ProcessPoolExecutor(self.jobs) as pool:
                return list(pool.map(self.objective, configs, [seed] * len(configs)))
        return [self.objective(c, seed) for c in configs]


# -- sampling and racing -------------------------------------------------------


def _sample(rng: np.random.Generator, n: int, lh_box, eta_box) -> list[Evaluated]:
    lo, hi = lh_box
    if lo == hi:
        lh = np.full(n, lo, dtype=int)
    else:
        lh = np.rint(np.exp(rng.uniform(math.log(lo), math.log(hi), n))).astype(int)
        lh = np.clip(lh, lo, hi)
    eta = rng.integers(eta_box[0], eta_box[1] + 1, n)
    return [Evaluated(int(a), int(b)) for a, b in zip(lh, eta)]


def race(
    candidates: list[Evaluated],
    objective: _CountingObjective,
    runs_per_config: int,
    top_k: int,
    seed: int,
) -> list[Evaluated]:
    """Race candidates in place; returns them ranked (survivors first, then by mean)."""
    survivors = list(candidates)
    for r in range(runs_per_config):
        round_seed = seed * 1_000_003 + r
        values = objective.map([c.config for c in survivors], round_seed)
        for c, v in zip(survivors, values):
            c.objectives.append(float(v))
        if r == 0 or len(survivors) <= top_k:
            if len(survivors) <= top_k:
                break
            continue
        means = np.array([c.mean for c in survivors])
        pooled = math.sqrt(float(np.mean([np.var(c.objectives, ddof=1) for c in survivors])))
        threshold = means.min() + pooled
        order = np.argsort(means, kind="stable")
        keep = {int(i) for i in order[:top_k]} | {i for i, m in enumerate(means) if m <= threshold}
        survivors = [c for i, c in enumerate(survivors) if i in keep]
        if len(survivors) <= top_k:
            break
    return sorted(candidates, key=lambda c: (-c.rounds, c.mean, c.lh, c.eta))


def _as_objective(instance_or_objective, config: TunerConfig) -> Objective:
    if isinstance(instance_or_objective, Instance):
        return SolverObjective(instance_or_objective, config.eval_budget_scale)
    return instance_or_objective


def coarse_search(instance, config: TunerConfig, objective: Objective | None = None, _counter=None) -> list[Evaluated]:
    """Sample the broad box and race; returns the ranked configurations."""
    if config.coarse_budget < 10:
        raise BudgetTooSmall("coarse budget must be at least 10 configurations")
    counter = _counter or _CountingObjective(objective or _as_objective(instance, config), config.jobs)
    rng = np.random.default_rng([config.seed, 1])
    candidates = _sample(rng, config.coarse_budget, config.lh_range, config.eta_range)
    return race(candidates, counter, config.runs_per_config, config.top_k, config.seed * 7 + 1)


def detect_modes(top_configs: Sequence[Evaluated], tau: float) -> list[list[Evaluated]]:
    """Split by gaps in sorted log(L_h) larger than tau; groups come out ascending."""
    if len(top_configs) < 2:
        raise ValueError("mode detection needs at least two configurations")
    ordered = sorted(top_configs, key=lambda c: c.lh)
    logs = np.log([c.lh for c in ordered])
    modes = [[ordered[0]]]
    for prev, cur, c in zip(logs, logs[1:], ordered[1:]):
        if cur - prev > tau:
            modes.append([])
        modes[-1].append(c)
    return modes


def _refined(values, config: TunerConfig, bounds) -> tuple[int, int]:
    p_lo, p_hi = np.quantile(np.asarray(values, dtype=float), config.quantiles)
    width = p_hi - p_lo
    lo = max(bounds[0], p_lo - config.buffer * width)
    hi = min(bounds[1], p_hi + config.buffer * width)
    return int(math.floor(lo)), int(math.ceil(hi))


def refine_interval(
    mode_configs: Sequence[Evaluated],
    config: TunerConfig,
    eta_configs: Sequence[Evaluated] | None = None,
) -> tuple[tuple[int, int], tuple[int, int]]:
    """Buffered P10..P90 box for L_h over the mode and for eta_max over ``eta_configs``.

    eta_max is not split by modes: pass all top configurations as ``eta_configs``.
    """
    if len(mode_configs) < 1:
        raise ValueError("empty mode")
    eta_source = mode_configs if eta_configs is None else eta_configs
    return (
        _refined([c.lh for c in mode_configs], config, config.lh_range),
        _refined([c.eta for c in eta_source], config, config.eta_range),
    )


def fine_search(
    instance,
    intervals: tuple[tuple[int, int], tuple[int, int]],
    config: TunerConfig,
    objective: Objective | None = None,
    mode_index: int = 0,
    _counter=None,
) -> list[Evaluated]:
    lh_box, eta_box = intervals
    if lh_box[0] > lh_box[1] or eta_box[0] > eta_box[1]:
        raise ValueError("empty refinement interval")
    counter = _counter or _CountingObjective(objective or _as_objective(instance, config), config.jobs)
    rng = np.random.default_rng([config.seed, 2, mode_index])
    candidates = _sample(rng, config.fine_budget_per_mode, lh_box, eta_box)
    return race(candidates, counter, config.runs_per_config, config.top_k, config.seed * 7 + 2 + mode_index)


def _summarize(mode: ModeResult, top_k: int) -> None:
    top = mode.ranked[: min(top_k, len(mode.ranked))]
    lh = np.array([c.lh for c in top], dtype=float)
    eta = np.array([c.eta for c in top], dtype=float)
    mode.lh_median = float(np.median(lh))
    mode.eta_median = float(np.median(eta))
    mode.lh_iqr = tuple(float(q) for q in np.quantile(lh, [0.25, 0.75]))
    mode.eta_iqr = tuple(float(q) for q in np.quantile(eta, [0.25, 0.75]))


def _half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def aggregate_label(
    modes: list[ModeResult],
    instance_name: str,
    config: TunerConfig,
    objective: Objective | None = None,
    _counter=None,
) -> TuningLabel:
    """Median/IQR of each mode's top-K; the mode whose median config confirms best wins."""
    counter = _counter or (_CountingObjective(objective, config.jobs) if objective else None)
    best = None
    for m, mode in enumerate(modes):
        _summarize(mode, config.top_k)
        median_config = ParameterConfig(_half_up(mode.lh_median), _half_up(mode.eta_median))
        if len(modes) > 1 and counter is not None and not mode.confirmation:
            for r in range(config.confirm_runs):
                mode.confirmation.extend(counter.map([median_config], config.seed * 7 + 1000 + r))
        score = float(np.mean(mode.confirmation)) if mode.confirmation else 0.0
        if best is None or score < best[0]:
            best = (score, m)
    winner = modes[best[1]]
    return TuningLabel(
        instance=instance_name,
        Lh_label=_half_up(winner.lh_median),
        eta_label=_half_up(winner.eta_median),
        Lh_iqr=winner.lh_iqr,
        eta_iqr=winner.eta_iqr,
        mode_index=best[1],
        mode_count=len(modes),
    )


def top_fraction(ranked: Sequence[Evaluated], config: TunerConfig) -> list[Evaluated]:
    n = max(2, int(math.ceil(config.top_fraction * len(ranked))))
    return list(ranked[:n])


def tune_instance(
    instance,
    config: TunerConfig,
    objective: Objective | None = None,
    journal: str | Path | None = None,
    name: str | None = None,
) -> TuningResult:
    """Full two-stage procedure for one instance (or any objective)."""
    counter = _CountingObjective(objective or _as_objective(instance, config), config.jobs)
    coarse = coarse_search(instance, config, _counter=counter)
    top = top_fraction(coarse, config)
    modes = []
    for m, group in enumerate(detect_modes(top, config.tau)):
        intervals = refine_interval(group, config, eta_configs=top)
        ranked = fine_search(instance, intervals, config, mode_index=m, _counter=counter)
        modes.append(ModeResult(intervals[0], intervals[1], ranked))
    if name is None:
        name = instance.name if isinstance(instance, Instance) else "objective"
    label = aggregate_label(modes, name, config, _counter=counter)
    if journal is not None:
        write_journal(journal, coarse, modes)
    return TuningResult(label, coarse, modes, counter.calls)


def solver_run_bound(config: TunerConfig, mode_count: int) -> int:
    """Upper bound on objective calls made by ``tune_instance``."""
    racing = (config.coarse_budget + mode_count * config.fine_budget_per_mode) * config.runs_per_config
    confirm = mode_count * config.confirm_runs if mode_count > 1 else 0
    return racing + confirm


# -- files -----------------------------------------------------------------------


def write_journal(path: str | Path, coarse: list[Evaluated], modes: list[ModeResult]) -> None:
    with open(path, "w") as fh:
        for c in coarse:
            fh.write(json.dumps({"stage": "coarse", "Lh": c.lh, "eta": c.eta, "objectives": c.objectives}) + "\n")
        for m, mode in enumerate(modes):
            for c in mode.ranked:
                fh.write(
                    json.dumps({"stage": "fine", "mode": m, "Lh": c.lh, "eta": c.eta, "objectives": c.objectives})
                    + "\n"
                )
            fh.write(
                json.dumps(
                    {
                        "stage": "mode",
                        "mode": m,
                        "Lh_interval": list(mode.lh_interval),
                        "eta_interval": list(mode.eta_interval),
                        "confirmation": mode.confirmation,
                    }
                )
                + "\n"
            )


LABEL_COLUMNS = ("instance", "Lh_label", "eta_label", "Lh_q1", "Lh_q3", "eta_q1", "eta_q3", "mode_index", "mode_count")


def write_labels_csv(labels: Sequence[TuningLabel], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LABEL_COLUMNS)
        for lab in sorted(labels, key=lambda l: l.instance):
            w.writerow(
                [
                    lab.instance,
                    lab.Lh_label,
                    lab.eta_label,
                    f"{lab.Lh_iqr[0]:g}",
                    f"{lab.Lh_iqr[1]:g}",
                    f"{lab.eta_iqr[0]:g}",
                    f"{lab.eta_iqr[1]:g}",
                    lab.mode_index,
                    lab.mode_count,
                ]
            )


def read_labels_csv(path: str | Path) -> dict[str, TuningLabel]:
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["instance"]] = TuningLabel(
                row["instance"],
                int(row["Lh_label"]),
                int(row["eta_label"]),
                (float(row["Lh_q1"]), float(row["Lh_q3"])),
                (float(row["eta_q1"]), float(row["eta_q3"])),
                int(row["mode_index"]),
                int(row["mode_count"]),
            )
    return out
