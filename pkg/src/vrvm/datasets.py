"""Synthetic generators, CSV ingestion and k-fold width selection."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .kernels import KernelSpec
from .special import HyperpriorConfig

TASKS = ("regression", "classification")
SPACINGS = ("uniform_random", "equispaced")


class DatasetError(ValueError):
    """Base class for CSV parse and validation errors."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class MalformedRowError(DatasetError):
    pass


class NonNumericCellError(DatasetError):
    pass


class MissingTargetColumnError(DatasetError):
    pass


class NonBinaryLabelError(DatasetError):
    pass


class CVFoldError(RuntimeError):
    def __init__(self, message, fold, width):
        super().__init__(f"fold {fold} (width={width}): {message}")
        self.fold = fold
        self.width = width


@dataclass
class Dataset:
    X: np.ndarray
    t: np.ndarray
    task: str = "regression"
    true_function: Optional[Callable] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        self.t = np.asarray(self.t, dtype=float).ravel()
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if len(self.X) != len(self.t):
            raise ValueError(f"{len(self.X)} inputs but {len(self.t)} targets")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.t))):
            raise ValueError("dataset contains non-finite values")

    def __len__(self):
        return len(self.t)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.t[idx], self.task, self.true_function, dict(self.provenance))


def sinc(x):
    """sin(x)/x with sinc(0) = 1."""
    x = np.asarray(x, dtype=float)
    safe = np.where(x == 0, 1.0, x)
    return np.where(x == 0, 1.0, np.sin(safe) / safe)


def gen_sinc(n: int = 50, noise_sd: float = 0.1, seed: int = 0, spacing: str = "uniform_random") -> Dataset:
    """Noisy samples of sinc on the open interval (-10, 10)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    if spacing not in SPACINGS:
        raise ValueError(f"spacing must be one of {SPACINGS}")
    rng = np.random.default_rng(seed)
    if spacing == "uniform_random":
        x = rng.uniform(-10.0, 10.0, n)
    else:
        x = -10.0 + 20.0 * (np.arange(n) + 0.5) / n
    noise = rng.standard_normal(n) * noise_sd
    t = sinc(x) + noise
    prov = {"generator": "sinc", "seed": seed, "n": n, "noise_sd": noise_sd, "spacing": spacing}
    return Dataset(x[:, None], t, "regression", sinc, prov)


@dataclass(frozen=True)
class TwoClassParams:
    """Equal-weight two-component Gaussian mixture per class, isotropic sd."""

    centres0: tuple = ((-0.3, 0.7), (0.4, 0.7))
    centres1: tuple = ((-0.7, 0.3), (0.3, 0.3))
    sd: float = 0.25

    def to_dict(self) -> dict:
        return {"centres0": [list(c) for c in self.centres0],
                "centres1": [list(c) for c in self.centres1], "sd": self.sd}


def _mixture_density(X, centres, sd):
    X = np.asarray(X, dtype=float)
    dens = np.zeros(X.shape[:-1])
    for c in centres:
        sq = np.sum((X - np.asarray(c)) ** 2, axis=-1)
        dens += np.exp(-0.5 * sq / sd ** 2)
    return dens / (len(centres) * 2.0 * math.pi * sd ** 2)


def class_densities(X, params: TwoClassParams = TwoClassParams()):
    return (_mixture_density(X, params.centres0, params.sd),
            _mixture_density(X, params.centres1, params.sd))


def bayes_classifier(X, params: TwoClassParams = TwoClassParams()) -> np.ndarray:
    """Optimal labels under equal class priors."""
    p0, p1 = class_densities(X, params)
    return (p1 > p0).astype(int)


def bayes_error(params: TwoClassParams = TwoClassParams(), step: float = 0.0025) -> float:
    """0.5 * integral of min(p0, p1) over the plane, by 2-D Simpson on a box
    extending 8 sd beyond every centre."""
    from scipy.integrate import simpson

    pts = np.array(params.centres0 + params.centres1, dtype=float)
    lo = pts.min(axis=0) - 8 * params.sd
    hi = pts.max(axis=0) + 8 * params.sd
    nx = int(np.ceil((hi[0] - lo[0]) / step)) | 1
    ny = int(np.ceil((hi[1] - lo[1]) / step)) | 1
    gx = np.linspace(lo[0], hi[0], nx)
    gy = np.linspace(lo[1], hi[1], ny)
    G = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1)
    p0, p1 = class_densities(G, params)
    inner = simpson(np.minimum(p0, p1), x=gy, axis=1)
    return float(0.5 * simpson(inner, x=gx))


def gen_two_class(n: int = 100, seed: int = 0, params: TwoClassParams = TwoClassParams()) -> Dataset:
    """Balanced two-class 2-D data: n/2 points from each class mixture."""
    if n < 4 or n % 2:
        raise ValueError("n must be even and >= 4")
    rng = np.random.default_rng(seed)
    half = n // 2
    X_parts = []
    for centres in (params.centres0, params.centres1):
        comp = rng.integers(0, len(centres), half)
        X_parts.append(np.asarray(centres)[comp] + params.sd * rng.standard_normal((half, 2)))
    X = np.vstack(X_parts)
    t = np.concatenate([np.zeros(half), np.ones(half)])
    prov = {"generator": "twoclass", "seed": seed, "n": n, "params": params.to_dict()}
    return Dataset(X, t, "classification", None, prov)


# -- CSV --------------------------------------------------------------------

def write_csv(dataset: Dataset, path, header: bool = True, write_provenance: bool = True) -> None:
    """Features first, target last; numbers printed with 17 significant digits."""
    path = Path(path)
    d = dataset.X.shape[1]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"x{i}" for i in range(d)] + ["t"])
        for row, target in zip(dataset.X, dataset.t):
            w.writerow([f"{v:.17g}" for v in row] + [f"{target:.17g}"])
    if write_provenance and dataset.provenance:
        provenance_path(path).write_text(json.dumps(dataset.provenance, indent=2, sort_keys=True) + "\n")


def provenance_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def read_provenance(path) -> Optional[dict]:
    p = provenance_path(path)
    return json.loads(p.read_text()) if p.exists() else None


def load_table(path, has_header: bool = True) -> np.ndarray:
    """Parse a rectangular numeric CSV into a 2-D array.

    Row numbers in errors are 1-based file lines, so a header is row 1.
    """
    rows = []
    width = None
    with Path(path).open(newline="") as fh:
        for lineno, raw in enumerate(csv.reader(fh), start=1):
            if has_header and lineno == 1:
                width = len(raw)
                continue
            if not raw or all(not c.strip() for c in raw):
                continue
            if width is None:
                width = len(raw)
            if len(raw) != width:
                raise MalformedRowError(f"expected {width} cells, found {len(raw)}", lineno)
            try:
                values = [float(c) for c in raw]
            except ValueError:
                bad = next(c for c in raw if not _is_float(c))
                raise NonNumericCellError(f"non-numeric cell {bad!r}", lineno) from None
            if not all(math.isfinite(v) for v in values):
                raise NonNumericCellError("non-finite value", lineno)
            rows.append(values)
    if not rows:
        raise DatasetError("no data rows")
    return np.asarray(rows)


def load_csv(path, target_column: int = -1, has_header: bool = True, task: str = "regression") -> Dataset:
    """Read a dataset: one column is the target, the rest are features."""
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}")
    table = load_table(path, has_header)
    ncol = table.shape[1]
    col = target_column if target_column >= 0 else ncol + target_column
    if not 0 <= col < ncol or ncol < 2:
        raise MissingTargetColumnError(f"target column {target_column} not present in {ncol} columns")
    t = table[:, col]
    X = np.delete(table, col, axis=1)
    if task == "classification":
        bad = np.flatnonzero((t != 0) & (t != 1))
        if len(bad):
            first = int(bad[0]) + (2 if has_header else 1)
            raise NonBinaryLabelError(f"label {t[bad[0]]!r} is not 0 or 1", first)
    prov = read_provenance(path) or {}
    true_fn = sinc if prov.get("generator") == "sinc" else None
    return Dataset(X, t, task, true_fn, prov)


def _is_float(s) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


# -- cross-validation -------------------------------------------------------

@dataclass(frozen=True)
class CVPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def folds(self):
        """(train_idx, test_idx) pairs in fold order."""
        for f in range(self.k):
            test = np.flatnonzero(self.assignments == f)
            train = np.flatnonzero(self.assignments != f)
            yield train, test


def make_cv_plan(n: int, k: int = 5, seed: int = 0) -> CVPlan:
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    assign = np.empty(n, dtype=int)
    assign[perm] = np.arange(n) % k
    return CVPlan(k=k, assignments=assign, seed=seed)


@dataclass
class CVResult:
    best_width: float
    mean_scores: list
    fold_scores: np.ndarray
    widths: list
    plan: CVPlan


def _fit_and_score(args):
    train, test, kernel, hyperprior, config = args
    from .classification import fit_classification
    from .regression import fit_regression

    if train.task == "regression":
        model, _ = fit_regression(train.X, train.t, kernel, hyperprior, config)
        mean, _ = model.predict(test.X)
        return float(np.sqrt(np.mean((mean - test.t) ** 2)))
    model, _ = fit_classification(train.X, train.t, kernel, hyperprior, config)
    return float(np.mean(model.predict(test.X) != test.t))


def score_width(dataset: Dataset, width: float, plan: CVPlan, kernel: KernelSpec = KernelSpec(),
                hyperprior: Optional[HyperpriorConfig] = None, config=None) -> np.ndarray:
    """Held-out score for each fold at one width (RMS or error rate)."""
    spec = replace(kernel, width=float(width))
    out = []
    for f, (tr, te) in enumerate(plan.folds()):
        try:
            out.append(_fit_and_score((dataset.subset(tr), dataset.subset(te), spec, hyperprior, config)))
        except Exception as exc:
            raise CVFoldError(str(exc), f, width) from exc
    return np.asarray(out)


def select_best(widths: Sequence[float], mean_scores: Sequence[float]) -> float:
    """Lowest mean score; ties go to the smallest width, then the earliest entry."""
    best = min(range(len(widths)), key=lambda i: (mean_scores[i], widths[i], i))
    return float(widths[best])


def cross_validate_width(dataset: Dataset, widths: Sequence[float] = (0.5, 1, 2, 3, 5, 8), k: int = 5,
                         seed: int = 0, task: Optional[str] = None, kernel: KernelSpec = KernelSpec(),
                         hyperprior: Optional[HyperpriorConfig] = None, config=None,
                         n_jobs: int = 1) -> CVResult:
    """k-fold selection of the Gaussian kernel width.

    Scores are RMS error for regression and misclassification rate for
    classification.  With ``n_jobs > 1`` fold fits run in worker processes;
    results are reduced in fold order either way.
    """
    widths = [float(w) for w in widths]
    if not widths:
        raise ValueError("widths must be non-empty")
    if any(w <= 0 for w in widths):
        raise ValueError("widths must be positive")
    if task is not None and task != dataset.task:
        dataset = Dataset(dataset.X, dataset.t, task, dataset.true_function, dataset.provenance)
    plan = make_cv_plan(len(dataset), k, seed)
    folds = list(plan.folds())
    jobs = [(dataset.subset(tr), dataset.subset(te), replace(kernel, width=w), hyperprior, config)
            for w in widths for tr, te in folds]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            futures = [ex.submit(_fit_and_score, j) for j in jobs]
            results = []
            for i, fut in enumerate(futures):
                try:
                    results.append(fut.result())
                except Exception as exc:
                    raise CVFoldError(str(exc), i % k, widths[i // k]) from exc
    else:
        results = []
        for i, j in enumerate(jobs):
            try:
                results.append(_fit_and_score(j))
            except Exception as exc:
                raise CVFoldError(str(exc), i % k, widths[i // k]) from exc
    fold_scores = np.asarray(results).reshape(len(widths), k)
    mean_scores = fold_scores.mean(axis=1).tolist()
    return CVResult(select_best(widths, mean_scores), mean_scores, fold_scores, widths, plan)
