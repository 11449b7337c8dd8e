"""Ridge-regression parameter prediction from instance features.

Each target (history length, max attempts) gets its own ridge model on
standardized features. Targets are fitted on the natural-log scale by
default and mapped back by exponentiation; predictions are rounded half-up
and clipped into the coarse tuning box.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FEATURE_NAMES, SCHEMA_HASH, FeatureVector
from .solver import ParameterConfig
from .stats import spearman

TARGETS = ("Lh", "eta")
TARGET_RANGES = {"Lh": (300, 20000), "eta": (1, 500)}
DEFAULT_LAMBDA_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
MODEL_FORMAT = "evrp-iapc-ridge"
MODEL_VERSION = 1


class SingularSystem(np.linalg.LinAlgError):
    pass


class SchemaMismatch(ValueError):
    pass


class TooFewRows(ValueError):
    pass


@dataclass
class Standardizer:
    means: np.ndarray
    stds: np.ndarray
    keep: np.ndarray  # boolean mask over the original columns

    @property
    def dropped(self) -> list[int]:
        return np.flatnonzero(~self.keep).tolist()

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (x[:, self.keep] - self.means) / self.stds


def standardize(x) -> tuple[np.ndarray, Standardizer]:
    """Column z-scores with the sample (n-1) standard deviation; constant columns dropped."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise TooFewRows("standardization needs a matrix with at least two rows")
    std = x.std(axis=0, ddof=1)
    keep = std > 1e-12 * np.maximum(1.0, np.abs(x).max(axis=0))
    stats = Standardizer(x[:, keep].mean(axis=0), std[keep], keep)
    return stats.transform(x), stats


def fit_ridge(x, y, lam: float) -> tuple[float, np.ndarray]:
    """Ridge with an unpenalized intercept: returns (beta_0, slopes)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[0] != len(y):
        raise TooFewRows("ridge needs at least two rows and matching targets")
    if lam < 0:
        raise ValueError("ridge penalty must be non-negative")
    x_mean = x.mean(axis=0)
    y_mean = y.mean()
    xc = x - x_mean
    gram = xc.T @ xc + lam * np.eye(x.shape[1])
    if lam == 0 and np.linalg.matrix_rank(gram) < x.shape[1]:
        raise SingularSystem("design is rank-deficient with lambda = 0; use lambda > 0")
    slopes = np.linalg.solve(gram, xc.T @ (y - y_mean))
    return float(y_mean - x_mean @ slopes), slopes


def _forward(y: np.ndarray, transform: str) -> np.ndarray:
    return np.log(y) if transform == "log" else y


def _inverse(z: float, transform: str) -> float:
    if transform == "log":
        return math.exp(min(z, 700.0))
    return z


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


@dataclass
class TargetModel:
    transform: str
    lam: float
    intercept: float
    coef: np.ndarray  # over the kept (standardized) columns


@dataclass
class RegressionModel:
    standardizer: Standardizer
    targets: dict[str, TargetModel]
    feature_names: tuple[str, ...] = FEATURE_NAMES
    schema_hash: str = SCHEMA_HASH
    notes: dict = field(default_factory=dict)

    def predict_raw(self, features) -> dict[str, float]:
        """Predictions on the native scale before rounding and clipping."""
        z = self.standardizer.transform(np.asarray(features, dtype=float))[0]
        return {
            name: _inverse(t.intercept + float(z @ t.coef), t.transform) for name, t in self.targets.items()
        }

    def to_json(self) -> dict:
        s = self.standardizer
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "schema_hash": self.schema_hash,
            "feature_names": list(self.feature_names),
            "kept": s.keep.tolist(),
            "dropped": [self.feature_names[i] for i in s.dropped],
            "means": s.means.tolist(),
            "stds": s.stds.tolist(),
            "targets": {
                name: {
                    "transform": t.transform,
                    "lambda": t.lam,
                    "intercept": t.intercept,
                    "coef": t.coef.tolist(),
                }
                for name, t in self.targets.items()
            },
            "notes": self.notes,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RegressionModel":
        if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
            raise ValueError("not a ridge model document of a supported version")
        s = Standardizer(np.array(doc["means"]), np.array(doc["stds"]), np.array(doc["kept"], dtype=bool))
        targets = {
            name: TargetModel(t["transform"], t["lambda"], t["intercept"], np.array(t["coef"], dtype=float))
            for name, t in doc["targets"].items()
        }
        return cls(s, targets, tuple(doc["feature_names"]), doc["schema_hash"], doc.get("notes", {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "RegressionModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def predict_params(model: RegressionModel, features: FeatureVector) -> ParameterConfig:
    if features.names != model.feature_names or model.schema_hash != SCHEMA_HASH:
        raise SchemaMismatch("feature vector schema does not match the model")
    raw = model.predict_raw(features.to_array())
    out = {}
    for name, value in raw.items():
        lo, hi = TARGET_RANGES[name]
        value = value if math.isfinite(value) else hi
        out[name] = min(hi, max(lo, round_half_up(value)))
    return ParameterConfig(history_length=out["Lh"], max_attempts=out["eta"])


# -- model selection -----------------------------------------------------------


def fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    """Fold index per row; fold sizes differ by at most one."""
    perm = np.random.default_rng(seed).permutation(n)
    assign = np.empty(n, dtype=int)
    for k, part in enumerate(np.array_split(perm, folds)):
        assign[part] = k
    return assign


def _fit_predict(x_train, y_train, x_test, lam):
    z_train, stats = standardize(x_train)
    b0, b = fit_ridge(z_train, y_train, lam)
    return b0 + stats.transform(x_test) @ b


def select_lambda(x, y, grid: Sequence[float], folds: int = 5, seed: int = 0) -> float:
    """Grid value with the lowest mean CV RMSE (ties: the larger penalty)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(grid) == 1:
        return float(grid[0])
    folds = min(folds, len(y))
    assign = fold_assignment(len(y), folds, seed)
    best = None
    for lam in sorted(grid, reverse=True):
        errs = []
        for k in range(folds):
            test = assign == k
            train = ~test
            if train.sum() < 2:
                continue
            pred = _fit_predict(x[train], y[train], x[test], lam)
            errs.append(math.sqrt(float(np.mean((pred - y[test]) ** 2))))
        # too few rows to validate: the largest penalty wins by default
        score = float(np.mean(errs)) if errs else math.inf
        if best is None or score < best[0] - 1e-12:
            best = (score, lam)
    return float(best[1])


@dataclass
class FoldMetrics:
    mae: float
    rmse: float
    spearman: float
    lam: float


@dataclass
class CvReport:
    folds: dict[str, list[FoldMetrics]]
    assignment: list[int]
    transforms: dict[str, str]
    seed: int

    def summary(self, target: str) -> dict[str, tuple[float, float]]:
        rows = self.folds[target]
        out = {}
        for metric in ("mae", "rmse", "spearman"):
            vals = np.array([getattr(r, metric) for r in rows], dtype=float)
            vals = vals[np.isfinite(vals)]
            if len(vals) == 0:
                out[metric] = (math.nan, math.nan)
            else:
                out[metric] = (float(vals.mean()), float(vals.std(ddof=1)) if len(vals) > 1 else 0.0)
        return out

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["target", "scale", "MAE_mean", "MAE_std", "RMSE_mean", "RMSE_std", "Spearman_mean", "Spearman_std"])
            for target in self.folds:
                s = self.summary(target)
                w.writerow(
                    [target, self.transforms[target]]
                    + [f"{v:.6g}" for m in ("mae", "rmse", "spearman") for v in s[m]]
                )

    def write_folds_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["target", "fold", "MAE", "RMSE", "Spearman", "lambda"])
            for target, rows in self.folds.items():
                for k, r in enumerate(rows):
                    w.writerow([target, k, f"{r.mae:.6g}", f"{r.rmse:.6g}", f"{r.spearman:.6g}", r.lam])


def cross_validate(
    features,
    labels: dict[str, Sequence[float]],
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    folds: int = 5,
    seed: int = 0,
    transforms: dict[str, str] | None = None,
) -> CvReport:
    """K-fold CV with lambda chosen by an inner CV on each training split.

    Metrics are reported on the model scale of each target (log by default).
    """
    x = np.asarray(features, dtype=float)
    n = x.shape[0]
    if n < folds or n < 3:
        raise TooFewRows(f"cross-validation with {folds} folds needs at least {max(folds, 3)} rows")
    transforms = transforms or {name: "log" for name in labels}
    assign = fold_assignment(n, folds, seed)
    result: dict[str, list[FoldMetrics]] = {}
    for name, raw in labels.items():
        y = _forward(np.asarray(raw, dtype=float), transforms[name])
        rows = []
        for k in range(folds):
            test = assign == k
            train = ~test
            lam = select_lambda(x[train], y[train], lambda_grid, folds=min(folds, int(train.sum())), seed=seed + 1 + k)
            pred = _fit_predict(x[train], y[train], x[test], lam)
            err = pred - y[test]
            rho = spearman(pred, y[test]) if test.sum() > 1 else math.nan
            rows.append(FoldMetrics(float(np.mean(np.abs(err))), math.sqrt(float(np.mean(err**2))), rho, lam))
        result[name] = rows
    return CvReport(result, assign.tolist(), dict(transforms), seed)


def train_model(
    features,
    labels: dict[str, Sequence[float]],
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    seed: int = 0,
    transforms: dict[str, str] | None = None,
) -> RegressionModel:
    """Final per-target models on the full training set."""
    x = np.asarray(features, dtype=float)
    transforms = transforms or {name: "log" for name in labels}
    z, stats = standardize(x)
    targets = {}
    for name, raw in labels.items():
        y = _forward(np.asarray(raw, dtype=float), transforms[name])
        lam = select_lambda(x, y, lambda_grid, folds=min(5, len(y)), seed=seed)
        b0, b = fit_ridge(z, y, lam)
        targets[name] = TargetModel(transforms[name], lam, b0, b)
    notes = {
        "target_scale": "targets fitted on the natural-log scale unless tagged identity; "
        "log scale inferred from the magnitude of reported L_h errors",
    }
    return RegressionModel(stats, targets, notes=notes)


def feature_importance(model: RegressionModel, target: str = "Lh") -> list[tuple[str, float]]:
    """Non-zero slopes sorted by magnitude, with their feature names."""
    kept = [name for name, k in zip(model.feature_names, model.standardizer.keep) if k]
    coef = model.targets[target].coef
    pairs = [(name, float(c)) for name, c in zip(kept, coef) if c != 0.0]
    return sorted(pairs, key=lambda p: (-abs(p[1]), p[0]))
