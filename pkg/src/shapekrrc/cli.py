"""Command-line entry point.

Exit codes: 0 success, 1 usage, 2 I/O or parse failure, 3 data validation,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import classifiers, data, evaluation, kernels, shape
from .errors import (
    DegenerateConfiguration,
    FactorizationFailure,
    InvalidInput,
    LabelMismatch,
    NonUniqueMean,
    ParseError,
)

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4

KERNEL_CHOICES = ("euclidean", "fpg", "rie", "vwg")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _IOFailure(Exception):
    pass


def _float_list(text: str):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals or any(not np.isfinite(v) or v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("values must be positive")
    return vals


def _int_list(text: str):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("counts must be positive")
    return vals


def _positive(text: str) -> float:
    v = float(text)
    if not np.isfinite(v) or v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _default_seed() -> int:
    raw = os.environ.get("SHAPEKRRC_SEED")
    try:
        return int(raw) if raw is not None else 0
    except ValueError:
        return 0


def _load(path, **kw) -> data.LandmarkDataset:
    try:
        return data.load_landmark_csv(path, **kw)
    except OSError as exc:
        raise _IOFailure(str(exc)) from exc


def _preshapes(ds: data.LandmarkDataset) -> np.ndarray:
    """Preshape every record; raises DegenerateConfiguration listing all offending ids."""
    bad, rows = [], []
    for rec in ds.records:
        try:
            rows.append(shape.to_preshape(rec).coords)
        except DegenerateConfiguration:
            bad.append(rec.id)
    if bad:
        raise DegenerateConfiguration("degenerate records: " + ", ".join(map(str, bad)))
    return np.vstack(rows) if rows else np.empty((0, ds.k), dtype=complex)


def _emit_json(doc, path=None):
    text = json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if path:
        data.atomic_write_text(path, text)
    sys.stdout.write(text)


# -- subcommands ---------------------------------------------------------------

def cmd_preshape(args) -> int:
    ds = _load(args.input)
    X = _preshapes(ds)
    data.save_landmark_csv(ds, args.output, points=X, write_classes=False)
    print(f"wrote {len(ds)} preshapes to {args.output}", file=sys.stderr)
    return EXIT_OK


def cmd_kernel_check(args) -> int:
    ds = _load(args.input)
    if len(ds) == 0:
        raise _IOFailure(f"{args.input}: dataset is empty")
    X = _preshapes(ds)
    rng = np.random.default_rng(args.seed)
    if args.max_shapes and X.shape[0] > args.max_shapes:
        keep = np.sort(rng.choice(X.shape[0], size=args.max_shapes, replace=False))
        X = X[keep]
        ids = [ds.ids[i] for i in keep]
    else:
        ids = ds.ids
    family = kernels.KernelFamily.parse(args.kernel)
    D = kernels.gram_dist_sq(family, X)
    per_sigma = []
    for s2 in args.sigma_sq_grid:
        per_sigma.append({"sigma_sq": s2, "min_eigenvalue": kernels.min_eigenvalue(np.exp(-D / s2))})
    worst = min(per_sigma, key=lambda r: r["min_eigenvalue"])
    neg = kernels.check_negative_type(family, X, trials=args.trials, rng=rng) if X.shape[0] >= 2 else None
    report = {
        "family": family.value,
        "sigma_sq": worst["sigma_sq"],
        "n": int(X.shape[0]),
        "min_eigenvalue": worst["min_eigenvalue"],
        "psd": worst["min_eigenvalue"] >= -kernels.PSD_TOL,
        "negative_type_max": neg,
        "per_sigma_sq": per_sigma,
    }
    subset = min(args.subset_size, X.shape[0] - 1)
    if subset >= 2 and args.attempts > 0:
        w = kernels.find_psd_violation(family, X, args.sigma_sq_grid, subset, args.attempts, rng)
        if w is not None:
            report["witness"] = w.to_dict(ids=ids)
    _emit_json(report, args.output)
    return EXIT_OK


def _method_for_classify(args, parser):
    method = args.method
    family = evaluation.METHODS[method]
    if family is None:
        if args.kernel or args.sigma_sq is not None:
            parser.error("--kernel/--sigma-sq do not apply to naive-rrc")
        return method, None
    if args.sigma_sq is None:
        parser.error(f"--sigma-sq is required for {method}")
    if args.kernel:
        family = kernels.KernelFamily.parse(args.kernel)
    return method, kernels.KernelSpec(family, args.sigma_sq)


def cmd_classify(args, parser) -> int:
    method, spec = _method_for_classify(args, parser)
    train = _load(args.train)
    test = _load(args.test)
    if train.k != test.k:
        raise InvalidInput(f"train has k={train.k} landmarks but test has k={test.k}")
    Xtr, Xte = _preshapes(train), _preshapes(test)
    classes = sorted({int(c) for c in train.labels})
    if spec is None:
        model = classifiers.rrc_fit(Xtr, train.labels, args.lam, class_labels=classes)
    else:
        model = classifiers.krrc_fit(Xtr, train.labels, spec, args.lam, class_labels=classes,
                                     allow_indefinite=args.allow_indefinite)
    S = model.scores(Xte) if len(test) else np.empty((0, len(classes)))
    pred = np.asarray(classes)[np.argmin(S, axis=1)] if len(test) else np.empty(0, dtype=int)

    lines = [",".join(["id", "true_label", "predicted_label"] + [f"score_{c}" for c in classes])]
    for rec, p, s in zip(test.records, pred, S):
        lines.append(",".join([str(rec.id), str(rec.label), str(int(p))] + [data.fmt_float(v) for v in s]))
    data.atomic_write_text(args.output, "\n".join(lines) + "\n")

    metrics = evaluation.compute_metrics(pred, test.labels, classes)
    doc = {
        "method": method,
        "kernel": spec.to_dict() if spec else None,
        "lambda": args.lam,
        "n_train": len(train),
        "n_test": len(test),
        "indefinite_solve": bool(getattr(model, "used_indefinite_solve", False)),
        "macro_precision": metrics.macro_precision,
        "macro_recall": metrics.macro_recall,
        "f1": metrics.f1,
        "avg_accuracy": metrics.avg_accuracy,
        "confusion": metrics.to_dict(),
    }
    metrics_path = args.metrics or str(Path(args.output).with_suffix(".metrics.json"))
    data.atomic_write_text(metrics_path, json.dumps(doc, indent=2) + "\n")
    if args.save_model:
        classifiers.save_model(model, args.save_model)
    print(f"f1={metrics.f1:.4f} accuracy={metrics.avg_accuracy:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    ds = _load(args.input)
    if len(ds) == 0:
        raise _IOFailure(f"{args.input}: dataset is empty")
    X = _preshapes(ds)
    methods = [m for spec in args.method for m in spec.split(",") if m.strip()]
    plan = evaluation.ExperimentPlan(
        train_fraction=args.train_fraction,
        subsample_sizes=tuple(args.subsample_sizes),
        replicates=args.replicates,
        lambda_grid=tuple(args.lambda_grid),
        sigma_sq_grid=tuple(args.sigma_sq_grid),
        seed=args.seed,
        methods=tuple(methods),
        allow_indefinite=args.allow_indefinite,
    )
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    plan_doc = {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(plan).items()}
    plan_doc["input"] = str(args.input)
    plan_path = out / "plan.json"
    if args.resume and plan_path.exists():
        with open(plan_path, encoding="utf-8") as fh:
            if {k: v for k, v in json.load(fh).items() if k != "input"} != \
                    {k: v for k, v in plan_doc.items() if k != "input"}:
                raise InvalidInput("--resume: plan differs from the checkpointed plan.json")
    data.atomic_write_text(plan_path, json.dumps(plan_doc, indent=2) + "\n")

    total = len(evaluation.plan_cells(plan))
    counter = {"n": 0}

    def progress(row):
        counter["n"] += 1
        if not args.quiet:
            print(f"[{counter['n']}/{total}] {row['method']} n_i={row['n_i']} r={row['replicate']} "
                  f"f1={row['f1']:.4f}{' WARN' if row['warn'] else ''}", file=sys.stderr)

    results = evaluation.run_experiment(X, ds.labels, plan, workers=args.workers,
                                        checkpoint_dir=out / "cells", resume=args.resume,
                                        progress=progress)
    evaluation.write_results(results, out)
    print(evaluation.format_summary_table(results.summary))
    return EXIT_OK


def cmd_synth(args) -> int:
    templates = data.synthetic_templates(args.classes, args.k, args.spread, args.template_seed)
    ds = data.generate_synthetic(templates, args.per_class, args.noise_sd, args.seed)
    data.save_landmark_csv(ds, args.output)
    print(f"wrote {len(ds)} synthetic configurations to {args.output}", file=sys.stderr)
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="shapekrrc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    seed = _default_seed()

    sp = sub.add_parser("preshape", help="normalize landmark configurations to preshapes")
    sp.add_argument("--input", required=True)
    sp.add_argument("--output", required=True)

    sp = sub.add_parser("kernel-check", help="positive-definiteness diagnostics for a kernel family")
    sp.add_argument("--input", required=True)
    sp.add_argument("--kernel", choices=sorted(KERNEL_CHOICES), default="vwg")
    sp.add_argument("--sigma-sq-grid", type=_float_list, default=[1.0])
    sp.add_argument("--attempts", type=int, default=1000)
    sp.add_argument("--subset-size", type=int, default=10)
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--max-shapes", type=int, default=None,
                    help="random subset size for the full-Gram eigenvalue check")
    sp.add_argument("--seed", type=int, default=seed)
    sp.add_argument("--output", help="also write the JSON report here")

    sp = sub.add_parser("classify", help="fit on --train, predict --test")
    sp.add_argument("--train", required=True)
    sp.add_argument("--test", required=True)
    sp.add_argument("--method", required=True, choices=list(evaluation.METHODS))
    sp.add_argument("--kernel", choices=sorted(KERNEL_CHOICES), help="override the method's kernel family")
    sp.add_argument("--lambda", dest="lam", type=_positive, required=True)
    sp.add_argument("--sigma-sq", type=_positive)
    sp.add_argument("--output", required=True)
    sp.add_argument("--metrics", help="metrics JSON path (default: OUTPUT with .metrics.json suffix)")
    sp.add_argument("--allow-indefinite", action="store_true")
    sp.add_argument("--save-model", help="write the fitted model as JSON")
    sp.set_defaults(subparser=sp)

    sp = sub.add_parser("benchmark", help="replicated split/subsample/grid-search benchmark")
    sp.add_argument("--input", required=True)
    sp.add_argument("--output", required=True, help="output directory")
    sp.add_argument("--method", action="append", default=None,
                    help="comma-separated methods; repeatable (default: vwg-krrc,rie-krrc,naive-rrc)")
    sp.add_argument("--train-fraction", type=float, default=0.6)
    sp.add_argument("--subsample-sizes", type=_int_list, default=list(range(10, 101, 10)))
    sp.add_argument("--replicates", type=int, default=20)
    sp.add_argument("--lambda-grid", type=_float_list, default=list(evaluation.DEFAULT_LAMBDA_GRID))
    sp.add_argument("--sigma-sq-grid", type=_float_list, default=list(evaluation.DEFAULT_SIGMA_SQ_GRID))
    sp.add_argument("--seed", type=int, default=seed)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--resume", action="store_true")
    sp.add_argument("--allow-indefinite", action=argparse.BooleanOptionalAction, default=True)
    sp.add_argument("--quiet", action="store_true")

    sp = sub.add_parser("synth", help="write a synthetic template-plus-noise landmark dataset")
    sp.add_argument("--output", required=True)
    sp.add_argument("--classes", type=int, default=7)
    sp.add_argument("--k", type=int, default=15)
    sp.add_argument("--per-class", type=int, default=300)
    sp.add_argument("--noise-sd", type=_positive, default=0.05)
    sp.add_argument("--spread", type=_positive, default=0.12)
    sp.add_argument("--template-seed", type=int, default=1)
    sp.add_argument("--seed", type=int, default=2)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "benchmark":
        if args.method is None:
            args.method = ["vwg-krrc,rie-krrc,naive-rrc"]
        if args.workers < 1 or args.replicates < 1 or not 0 < args.train_fraction < 1:
            parser.error("--workers and --replicates must be >= 1 and --train-fraction in (0, 1)")
        try:
            for spec in args.method:
                for m in spec.split(","):
                    if m.strip():
                        evaluation.parse_method(m)
        except InvalidInput as exc:
            parser.error(str(exc))
    try:
        if args.command == "preshape":
            return cmd_preshape(args)
        if args.command == "kernel-check":
            return cmd_kernel_check(args)
        if args.command == "classify":
            return cmd_classify(args, args.subparser)
        if args.command == "benchmark":
            return cmd_benchmark(args)
        if args.command == "synth":
            return cmd_synth(args)
    except (_IOFailure, ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FactorizationFailure, NonUniqueMean, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DegenerateConfiguration, LabelMismatch, InvalidInput) as exc:
        print(f"invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    parser.error(f"unknown command {args.command}")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
