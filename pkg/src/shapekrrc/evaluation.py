"""Replicated benchmark protocol: splits, subsampling, metrics and grid search.

One benchmark *cell* is (method, n_i, replicate). Each cell is a pure
function of the data, the plan and its coordinates:

* replicate ``r`` splits with seed ``plan.seed + r``;
* the per-class subsample and the inner validation split use seeds derived
  from ``(plan.seed + r, n_i)`` so every method sees the same subsample.

Cells can therefore run in any order or in parallel with identical output.
"""
from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import classifiers
from .data import atomic_write_text, fmt_float
from .errors import FactorizationFailure, InsufficientClassSize, InvalidInput, LabelMismatch
from .kernels import KernelFamily, KernelSpec

METHODS = {
    "vwg-krrc": KernelFamily.VWG,
    "fpg-krrc": KernelFamily.FPG,
    "rie-krrc": KernelFamily.INTRINSIC,
    "naive-rrc": None,
}
METRICS = ("precision", "recall", "f1", "accuracy")
RESULT_COLUMNS = ("method", "n_i", "replicate", "lambda", "sigma_sq") + METRICS + ("warn",)
SUMMARY_COLUMNS = ("method", "n_i", "metric", "mean", "sd")

DEFAULT_LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1)
DEFAULT_SIGMA_SQ_GRID = (1e-2, 1e-1, 1e0, 1e1, 1e2)
INNER_TRAIN_FRACTION = 0.8


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def parse_method(name: str) -> str:
    key = name.strip().lower()
    if key not in METHODS:
        raise InvalidInput(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return key


@dataclass(frozen=True)
class ExperimentPlan:
    train_fraction: float = 0.6
    subsample_sizes: Tuple[int, ...] = tuple(range(10, 101, 10))
    replicates: int = 20
    lambda_grid: Tuple[float, ...] = DEFAULT_LAMBDA_GRID
    sigma_sq_grid: Tuple[float, ...] = DEFAULT_SIGMA_SQ_GRID
    seed: int = 0
    methods: Tuple[str, ...] = ("vwg-krrc", "rie-krrc", "naive-rrc")
    allow_indefinite: bool = True

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise InvalidInput("train_fraction must lie in (0, 1)")
        if self.replicates < 1:
            raise InvalidInput("replicates must be >= 1")
        if not self.subsample_sizes or min(self.subsample_sizes) < 1:
            raise InvalidInput("subsample_sizes must be a nonempty list of positive counts")
        if not self.lambda_grid or not self.sigma_sq_grid:
            raise InvalidInput("lambda and sigma_sq grids must be nonempty")
        if min(self.lambda_grid) <= 0 or min(self.sigma_sq_grid) <= 0:
            raise InvalidInput("grid values must be positive")
        if self.seed < 0:
            raise InvalidInput("seed must be unsigned")
        object.__setattr__(self, "methods", tuple(parse_method(m) for m in self.methods))
        if not self.methods:
            raise InvalidInput("at least one method is required")
        for name in ("subsample_sizes", "lambda_grid", "sigma_sq_grid"):
            object.__setattr__(self, name, tuple(getattr(self, name)))


# -- splitting ---------------------------------------------------------------

def _class_counts(labels) -> Dict[int, np.ndarray]:
    labels = np.asarray(labels)
    return {int(c): np.flatnonzero(labels == c) for c in np.unique(labels)}


def stratified_split(labels, train_fraction: float, seed: int):
    """Per-class random split; returns sorted (train_idx, test_idx) index arrays.

    Each class of size ``n`` sends ``max(1, floor(train_fraction * n))``
    samples to training and the rest to test.
    """
    if not 0 < train_fraction < 1:
        raise InvalidInput("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c, idx in sorted(_class_counts(labels).items()):
        if idx.size < 2:
            raise InsufficientClassSize(f"class {c} has {idx.size} sample(s); a split needs at least 2")
        perm = rng.permutation(idx)
        n_train = max(1, math.floor(train_fraction * idx.size + 1e-9))
        train.append(perm[:n_train])
        test.append(perm[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def subsample_per_class(labels, idx, n_i: int, seed: int) -> np.ndarray:
    """Draw exactly ``n_i`` of the indices ``idx`` per class, without replacement."""
    labels = np.asarray(labels)
    idx = np.asarray(idx)
    rng = np.random.default_rng(seed)
    out = []
    for c, pos in sorted(_class_counts(labels[idx]).items()):
        if pos.size < n_i:
            raise InsufficientClassSize(f"class {c} has {pos.size} training samples, fewer than n_i={n_i}")
        out.append(idx[rng.choice(pos, size=n_i, replace=False)])
    return np.sort(np.concatenate(out))


# -- metrics -----------------------------------------------------------------

@dataclass(frozen=True)
class MetricsReport:
    classes: Tuple[int, ...]
    tp: Tuple[int, ...]
    fp: Tuple[int, ...]
    fn: Tuple[int, ...]
    tn: Tuple[int, ...]
    macro_precision: float
    macro_recall: float
    f1: float
    avg_accuracy: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classes"] = list(self.classes)
        for key in ("tp", "fp", "fn", "tn"):
            d[key] = list(d[key])
        return d


def compute_metrics(predictions, truth, classes) -> MetricsReport:
    """Macro precision/recall, F1 of the macro averages, and mean one-vs-rest accuracy.

    A class with no predicted (true) positives adds 0 to the precision (recall) sum.
    """
    pred = np.asarray(predictions)
    true = np.asarray(truth)
    classes = [int(c) for c in classes]
    if pred.shape != true.shape:
        raise LabelMismatch(f"{pred.size} predictions for {true.size} truth labels")
    known = set(classes)
    stray = (set(np.unique(pred).tolist()) | set(np.unique(true).tolist())) - known
    if stray:
        raise LabelMismatch(f"labels {sorted(stray)} are not in the class list")
    n = true.size
    tp, fp, fn, tn = [], [], [], []
    for c in classes:
        p, t = pred == c, true == c
        tp.append(int(np.sum(p & t)))
        fp.append(int(np.sum(p & ~t)))
        fn.append(int(np.sum(~p & t)))
        tn.append(n - tp[-1] - fp[-1] - fn[-1])
    C = len(classes)
    prec = sum(a / (a + b) if a + b else 0.0 for a, b in zip(tp, fp)) / C
    rec = sum(a / (a + b) if a + b else 0.0 for a, b in zip(tp, fn)) / C
    f1 = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
    acc = sum((a + d) / n for a, d in zip(tp, tn)) / C if n else 0.0
    return MetricsReport(tuple(classes), tuple(tp), tuple(fp), tuple(fn), tuple(tn), prec, rec, f1, acc)


# -- fitting by method name -----------------------------------------------------

def fit_method(method: str, X, y, lam: float, sigma_sq: Optional[float], classes,
               allow_indefinite: bool = False):
    family = METHODS[parse_method(method)]
    if family is None:
        return classifiers.rrc_fit(X, y, lam, class_labels=classes)
    return classifiers.krrc_fit(X, y, KernelSpec(family, sigma_sq), lam, class_labels=classes,
                                allow_indefinite=allow_indefinite)


@dataclass(frozen=True)
class GridChoice:
    lam: float
    sigma_sq: Optional[float]
    f1: float


def grid_search(X, y, classes, method: str, lambda_grid, sigma_sq_grid, seed: int,
                allow_indefinite: bool = False) -> GridChoice:
    """Pick (lambda, sigma_sq) maximizing macro F1 on an inner 80/20 holdout.

    Ties go to the smaller lambda, then the smaller sigma_sq, so the choice
    does not depend on grid order. ``naive-rrc`` ignores ``sigma_sq_grid``.
    """
    method = parse_method(method)
    X = np.asarray(X)
    y = np.asarray(y)
    lambdas = sorted(set(float(v) for v in lambda_grid))
    sigmas = sorted(set(float(v) for v in sigma_sq_grid)) if METHODS[method] is not None else [None]
    if not lambdas or not sigmas:
        raise InvalidInput("grids must be nonempty")
    if len(lambdas) == 1 and len(sigmas) == 1:
        return GridChoice(lambdas[0], sigmas[0], float("nan"))
    tr, va = stratified_split(y, INNER_TRAIN_FRACTION, seed)
    best = None
    last_error = None
    for lam in lambdas:
        for s2 in sigmas:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", classifiers.IndefiniteKernelWarning)
                    model = fit_method(method, X[tr], y[tr], lam, s2, classes, allow_indefinite)
            except FactorizationFailure as exc:
                last_error = exc
                continue
            f1 = compute_metrics(model.predict_labels(X[va]), y[va], classes).f1
            if best is None or f1 > best.f1:
                best = GridChoice(lam, s2, f1)
    if best is None:
        raise last_error
    return best


# -- experiment driver -----------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    method: str
    n_i: int
    replicate: int


def cell_key(plan: ExperimentPlan, cell: Cell) -> str:
    return f"{cell.method}__n{cell.n_i}__r{cell.replicate}__s{plan.seed + cell.replicate}"


def run_cell(X: np.ndarray, labels: np.ndarray, plan: ExperimentPlan, cell: Cell) -> dict:
    """Split, subsample, tune, refit and score one (method, n_i, replicate) cell."""
    classes = sorted(int(c) for c in np.unique(labels))
    split_seed = plan.seed + cell.replicate
    row = {"method": cell.method, "n_i": cell.n_i, "replicate": cell.replicate,
           "lambda": float("nan"), "sigma_sq": None}
    row.update({m: float("nan") for m in METRICS})
    row["warn"] = 0
    try:
        train, test = stratified_split(labels, plan.train_fraction, split_seed)
        sub = subsample_per_class(labels, train, cell.n_i, derive_seed(split_seed, cell.n_i, 1))
        choice = grid_search(X[sub], labels[sub], classes, cell.method, plan.lambda_grid,
                             plan.sigma_sq_grid, derive_seed(split_seed, cell.n_i, 2),
                             plan.allow_indefinite)
        row["lambda"], row["sigma_sq"] = choice.lam, choice.sigma_sq
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", classifiers.IndefiniteKernelWarning)
            model = fit_method(cell.method, X[sub], labels[sub], choice.lam, choice.sigma_sq,
                               classes, plan.allow_indefinite)
        if getattr(model, "used_indefinite_solve", False):
            row["warn"] = 1
        m = compute_metrics(model.predict_labels(X[test]), labels[test], classes)
        row.update(precision=m.macro_precision, recall=m.macro_recall, f1=m.f1, accuracy=m.avg_accuracy)
    except (FactorizationFailure, InsufficientClassSize, np.linalg.LinAlgError) as exc:
        row["warn"] = 1
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _run_cell_checkpointed(args) -> dict:
    X, labels, plan, cell, checkpoint_dir = args
    row = run_cell(X, labels, plan, cell)
    if checkpoint_dir is not None:
        atomic_write_text(Path(checkpoint_dir) / f"{cell_key(plan, cell)}.json", json.dumps(row))
    return row


def plan_cells(plan: ExperimentPlan) -> List[Cell]:
    return [Cell(m, n, r) for m in plan.methods for n in plan.subsample_sizes for r in range(plan.replicates)]


def _row_sort_key(row):
    return (row["method"], row["n_i"], row["replicate"])


@dataclass
class ExperimentResults:
    rows: List[dict]
    summary: List[dict] = field(default_factory=list)

    def mean(self, method: str, n_i: int, metric: str) -> float:
        for s in self.summary:
            if (s["method"], s["n_i"], s["metric"]) == (method, n_i, metric):
                return s["mean"]
        raise KeyError((method, n_i, metric))


def summarize(rows: Sequence[dict]) -> List[dict]:
    groups: Dict[Tuple[str, int], List[dict]] = {}
    for r in rows:
        groups.setdefault((r["method"], r["n_i"]), []).append(r)
    out = []
    for (method, n_i), rs in sorted(groups.items()):
        for metric in METRICS:
            v = np.array([r[metric] for r in rs], dtype=float)
            v = v[np.isfinite(v)]
            mean = float(v.mean()) if v.size else float("nan")
            sd = float(v.std(ddof=1)) if v.size > 1 else (0.0 if v.size else float("nan"))
            out.append({"method": method, "n_i": n_i, "metric": metric, "mean": mean, "sd": sd})
    return out


def run_experiment(X, labels, plan: ExperimentPlan, workers: int = 1,
                   checkpoint_dir=None, resume: bool = False, progress=None) -> ExperimentResults:
    """Run every (method, n_i, replicate) cell of ``plan`` on preshapes ``X``.

    With ``checkpoint_dir`` each finished cell is written there as JSON;
    ``resume=True`` reuses those files instead of recomputing.
    """
    X = np.asarray(X, dtype=complex)
    labels = np.asarray(labels, dtype=int)
    counts = {c: idx.size for c, idx in _class_counts(labels).items()}
    for c, n in counts.items():
        n_train = max(1, math.floor(plan.train_fraction * n + 1e-9))
        if n_train < max(plan.subsample_sizes):
            raise InsufficientClassSize(
                f"class {c} gets {n_train} training samples, fewer than n_i={max(plan.subsample_sizes)}"
            )
    cells = plan_cells(plan)
    done: List[dict] = []
    todo: List[Cell] = []
    for cell in cells:
        path = Path(checkpoint_dir) / f"{cell_key(plan, cell)}.json" if checkpoint_dir else None
        if resume and path is not None and path.exists():
            with open(path, encoding="utf-8") as fh:
                done.append(json.load(fh))
        else:
            todo.append(cell)
    tasks = [(X, labels, plan, cell, checkpoint_dir) for cell in todo]
    if workers <= 1:
        for t in tasks:
            done.append(_run_cell_checkpointed(t))
            if progress:
                progress(done[-1])
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for row in ex.map(_run_cell_checkpointed, tasks, chunksize=1):
                done.append(row)
                if progress:
                    progress(row)
    rows = sorted(done, key=_row_sort_key)
    return ExperimentResults(rows, summarize(rows))


# -- CSV output ----------------------------------------------------------------

def _cell_text(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return fmt_float(v)
    return str(v)


def results_csv(rows: Sequence[dict]) -> str:
    lines = [",".join(RESULT_COLUMNS)]
    for r in rows:
        lines.append(",".join(_cell_text(r[c]) for c in RESULT_COLUMNS))
    return "\n".join(lines) + "\n"


def summary_csv(summary: Sequence[dict]) -> str:
    lines = [",".join(SUMMARY_COLUMNS)]
    for s in summary:
        lines.append(",".join(_cell_text(s[c]) for c in SUMMARY_COLUMNS))
    return "\n".join(lines) + "\n"


def metric_plot_csv(rows: Sequence[dict], metric: str) -> str:
    lines = ["method,n_i,replicate,value"]
    for r in rows:
        lines.append(f"{r['method']},{r['n_i']},{r['replicate']},{_cell_text(r[metric])}")
    return "\n".join(lines) + "\n"


def write_results(results: ExperimentResults, out_dir) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    paths = {"results": out_dir / "results.csv", "summary": out_dir / "summary.csv"}
    atomic_write_text(paths["results"], results_csv(results.rows))
    atomic_write_text(paths["summary"], summary_csv(results.summary))
    for metric in METRICS:
        p = out_dir / "plot" / f"{metric}.csv"
        atomic_write_text(p, metric_plot_csv(results.rows, metric))
        paths[f"plot_{metric}"] = p
    return paths


def format_summary_table(summary: Sequence[dict]) -> str:
    """Method x n_i table of ``mean (sd)`` per metric, for the terminal."""
    by_key: Dict[Tuple[str, int], Dict[str, dict]] = {}
    for s in summary:
        by_key.setdefault((s["method"], s["n_i"]), {})[s["metric"]] = s
    header = f"{'method':<10} {'n_i':>4}  " + "  ".join(f"{m:>17}" for m in METRICS)
    lines = [header, "-" * len(header)]
    for (method, n_i), ms in sorted(by_key.items()):
        cells = "  ".join(f"{ms[m]['mean']:>8.4f} ({ms[m]['sd']:.4f})" for m in METRICS)
        lines.append(f"{method:<10} {n_i:>4}  {cells}")
    return "\n".join(lines)
