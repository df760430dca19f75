"""Batch command line: synthesize, extract, train, evaluate, diagnose.

Exit codes: 0 success, 1 usage error, 2 data error (including partial
per-file failures), 3 internal numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .classify import (ConfusionMatrix, KernelConfig, cross_validate,
                       load_model, optimize_kernel_scale, predict_votes,
                       save_model, stratified_folds, train_mcsvm)
from .energy import OperatorKind
from .errors import ConvergenceError, DataError, GearcheckError
from .features import (FEATURE_NAMES, TIME_FEATURE_NAMES, FeatureSet,
                       FeatureTable, extract, read_feature_csv,
                       with_source, write_feature_csv)
from .signals import HealthClass, Signal, load_signal_csv, save_signal_csv
from .synthgear import GearboxConfig, make_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

REPORT_FORMAT = "gearcheck-report-v1"

_CELLS = (
    ("raw_time", OperatorKind.RAW_PASSTHROUGH, FeatureSet.TIME_ONLY,
     "Raw signal", "Time domain"),
    ("raw_combined", OperatorKind.RAW_PASSTHROUGH, FeatureSet.COMBINED,
     "Raw signal", "Time domain + Frequency domain"),
    ("ceeo_time", OperatorKind.CEEO, FeatureSet.TIME_ONLY,
     "CEEO signal", "Time domain"),
    ("ceeo_combined", OperatorKind.CEEO, FeatureSet.COMBINED,
     "CEEO signal", "Time domain + Frequency domain"),
)


class UsageError(GearcheckError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _base_config(args, health=HealthClass.HEALTHY) -> GearboxConfig:
    return GearboxConfig(health=health,
                         pinion_teeth=args.pinion_teeth,
                         gear_teeth=args.gear_teeth,
                         sample_rate=args.sample_rate,
                         duration=args.duration,
                         noise_std=args.noise_std)


def _signal_name(signal: Signal) -> str:
    meta = signal.meta
    return (f"{meta.health.value.lower()}_{meta.motor_freq:g}hz"
            f"_{meta.load:g}lb.csv")


def cmd_synth(args) -> int:
    if not args.out:
        raise UsageError("synth requires --out DIRECTORY")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    signals = make_dataset(_base_config(args), args.seed)
    manifest = []
    for signal in signals:
        name = _signal_name(signal)
        save_signal_csv(signal, out / name)
        manifest.append({"path": name,
                         "health": signal.meta.health.value,
                         "motor_freq": signal.meta.motor_freq,
                         "load": signal.meta.load})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n",
                                       encoding="utf-8")
    print(f"wrote {len(signals)} signal files and manifest.json to {out}")
    return EXIT_OK


def _collect_signal_files(input_path: Path) -> list[Path]:
    if input_path.is_file() and input_path.suffix == ".json":
        entries = json.loads(input_path.read_text(encoding="utf-8"))
        return [input_path.parent / entry["path"] for entry in entries]
    if input_path.is_dir():
        manifest = input_path / "manifest.json"
        if manifest.exists():
            return _collect_signal_files(manifest)
        return sorted(p for p in input_path.glob("*.csv"))
    raise DataError(f"input {input_path} is neither a directory nor a manifest")


def _load_signals(args) -> list[tuple[str, Signal]]:
    if getattr(args, "synth", False):
        signals = make_dataset(_base_config(args), args.seed)
        return [(_signal_name(s), s) for s in signals]
    if not args.input:
        raise UsageError("provide --input DIR|MANIFEST or --synth")
    files = _collect_signal_files(Path(args.input))
    if not files:
        raise DataError(f"no signal files found under {args.input}")
    return [(path.name, load_signal_csv(path)) for path in files]


def _parse_kinds(text: str) -> list[OperatorKind]:
    kinds = []
    for token in text.split(","):
        try:
            kinds.append(OperatorKind(token.strip()))
        except ValueError:
            raise UsageError(f"unknown preprocess kind {token!r} "
                             "(choose from raw, eo, ceeo)") from None
    return kinds


def _parse_sets(text: str) -> list[FeatureSet]:
    sets = []
    for token in text.split(","):
        try:
            sets.append(FeatureSet(token.strip()))
        except ValueError:
            raise UsageError(f"unknown feature set {token!r} "
                             "(choose from time, combined)") from None
    return sets


def cmd_extract(args) -> int:
    named = _load_signals(args)
    kinds = _parse_kinds(args.preprocess)
    sets = _parse_sets(args.features)
    combos = [(kind, fset) for kind in kinds for fset in sets]
    if not args.out:
        raise UsageError("extract requires --out FILE (or DIRECTORY for multiple combos)")
    out = Path(args.out)
    if len(combos) > 1 or (out.exists() and out.is_dir()) or out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        target = lambda k, s: out / f"features_{k.value}_{s.value}.csv"  # noqa: E731
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        target = lambda k, s: out  # noqa: E731

    failures = 0
    for kind, fset in combos:
        rows = []
        for name, signal in named:
            try:
                rows.append(with_source(extract(signal, kind, fset), name))
            except DataError as exc:
                failures += 1
                print(f"warning: {name} [{kind.value}/{fset.value}]: {exc}",
                      file=sys.stderr)
        if not rows:
            raise DataError(f"no feature rows produced for {kind.value}/{fset.value}")
        path = target(kind, fset)
        write_feature_csv(FeatureTable(rows), path)
        print(f"wrote {len(rows)} rows to {path}")
    return EXIT_DATA if failures else EXIT_OK


def _resolve_kernel(args, rows, labels, folds) -> tuple[KernelConfig, list | None]:
    if args.kernel_scale == "auto":
        config, trace = optimize_kernel_scale(rows, labels, k=args.folds,
                                              seed=args.seed,
                                              c_penalty=args.c_penalty,
                                              folds=folds)
        return config, trace
    try:
        scale = float(args.kernel_scale)
    except ValueError:
        raise UsageError(f"--kernel-scale must be 'auto' or a number, "
                         f"got {args.kernel_scale!r}") from None
    return KernelConfig(scale=scale, c_penalty=args.c_penalty), None


def cmd_train(args) -> int:
    table = read_feature_csv(args.features)
    rows = table.matrix()
    labels = table.labels()
    folds = None
    if args.kernel_scale == "auto":
        folds = stratified_folds(labels, args.folds, args.seed)
    kernel, _ = _resolve_kernel(args, rows, labels, folds)
    model = train_mcsvm(rows, labels, kernel,
                        feature_names=table.present_names(),
                        preprocess=args.preprocess)
    if not args.out:
        raise UsageError("train requires --out MODEL.json")
    save_model(model, args.out)
    print(f"trained {len(model.models)} binary machines on {len(labels)} rows "
          f"(classes: {', '.join(model.classes)}); model written to {args.out}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    model = load_model(args.model)
    kind = OperatorKind(args.preprocess) if args.preprocess else \
        OperatorKind(model.preprocess or "raw")
    if args.features:
        fset = FeatureSet(args.features)
    elif model.feature_names is not None and len(model.feature_names) == len(TIME_FEATURE_NAMES):
        fset = FeatureSet.TIME_ONLY
    else:
        fset = FeatureSet.COMBINED
    for path in args.signals:
        signal = load_signal_csv(path)
        vector = extract(signal, kind, fset)
        x = np.array([v for v in vector.values if v is not None])
        label, votes, _ = predict_votes(model, x)
        tally = ", ".join(f"{c}={votes[c]}" for c in model.classes)
        print(f"{path}: {label}  (votes: {tally})")
    return EXIT_OK


def _evaluate_cells(named, labels, classes, folds, args) -> dict:
    tables: dict[OperatorKind, FeatureTable | Exception] = {}
    for kind in (OperatorKind.RAW_PASSTHROUGH, OperatorKind.CEEO):
        try:
            rows = [with_source(extract(signal, kind, FeatureSet.COMBINED), name)
                    for name, signal in named]
            tables[kind] = FeatureTable(rows)
        except GearcheckError as exc:
            tables[kind] = exc

    n_time = len(TIME_FEATURE_NAMES)
    cells = {}
    for key, kind, fset, response, feature_label in _CELLS:
        table = tables[kind]
        if isinstance(table, Exception):
            cells[key] = {"preprocess": kind.value, "feature_set": fset.value,
                          "error": str(table)}
            continue
        try:
            full = table.matrix()
            rows = full[:, :n_time] if fset is FeatureSet.TIME_ONLY else full
            kernel, trace = _resolve_kernel(args, rows, labels, folds)
            result = cross_validate(rows, labels, args.folds, kernel,
                                    classes=classes, folds=folds)
            cm = result.confusion
            cells[key] = {
                "preprocess": kind.value,
                "feature_set": fset.value,
                "kernel_scale": kernel.scale,
                "c_penalty": kernel.c_penalty,
                "scale_grid": trace,
                "confusion": cm.to_dict(),
                "correct": cm.correct,
                "total": cm.total,
                "accuracy": cm.accuracy,
                "accuracy_exact": f"{cm.correct}/{cm.total}",
            }
        except GearcheckError as exc:
            cells[key] = {"preprocess": kind.value, "feature_set": fset.value,
                          "error": str(exc)}
    return cells


def render_report_table(cells: dict) -> str:
    rows = [("Response", "Features", "Accuracy")]
    for key, _, _, response, feature_label in _CELLS:
        cell = cells[key]
        if "error" in cell:
            value = f"FAILED: {cell['error']}"
        else:
            value = f"{100.0 * cell['accuracy']:.2f} % ({cell['accuracy_exact']})"
        rows.append((response, feature_label, value))
    w0 = max(len(r[0]) for r in rows) + 2
    w1 = max(len(r[1]) for r in rows) + 2
    return "\n".join(f"{r[0]:<{w0}}{r[1]:<{w1}}{r[2]}" for r in rows)


def cmd_evaluate(args) -> int:
    named = _load_signals(args)
    labels = []
    for name, signal in named:
        if signal.meta.health is None:
            raise DataError(f"{name}: no health label; evaluation needs labeled signals")
        labels.append(signal.meta.health.value)
    classes = tuple(h.value for h in
                    sorted({s.meta.health for _, s in named},
                           key=lambda h: list(HealthClass).index(h)))
    folds = stratified_folds(labels, args.folds, args.seed, classes)

    cells = _evaluate_cells(named, labels, classes, folds, args)
    report = {
        "schema": REPORT_FORMAT,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "environment": {
            "version": __version__,
            "seed": args.seed,
            "folds": args.folds,
            "c_penalty": args.c_penalty,
            "kernel_scale": args.kernel_scale,
            "input": "synth" if args.synth else str(args.input),
            "duration": args.duration if args.synth else None,
            "noise_std": args.noise_std if args.synth else None,
            "signal_count": len(named),
        },
        "classes": list(classes),
        "rows": [name for name, _ in named],
        "fold_assignment": folds.tolist(),
        "cells": cells,
    }
    text = render_report_table(cells)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        out.with_suffix(".txt").write_text(text + "\n", encoding="utf-8")
        print(f"report written to {out}")
    print(text)
    return EXIT_DATA if any("error" in c for c in cells.values()) else EXIT_OK


def _add_synth_options(parser) -> None:
    parser.add_argument("--duration", type=float, default=30.0,
                        help="record length in seconds (default 30)")
    parser.add_argument("--noise-std", type=float, default=0.2,
                        help="white-noise standard deviation (default 0.2)")
    parser.add_argument("--sample-rate", type=float, default=2048.0,
                        help="sample rate in Hz (default 2048)")
    parser.add_argument("--pinion-teeth", type=int, default=18)
    parser.add_argument("--gear-teeth", type=int, default=27)


def _add_svm_options(parser) -> None:
    parser.add_argument("--folds", type=int, default=5,
                        help="cross-validation fold count (default 5)")
    parser.add_argument("--c-penalty", type=float, default=1.0,
                        help="soft-margin box constraint C (default 1.0)")
    parser.add_argument("--kernel-scale", default="auto",
                        help="Gaussian kernel scale, or 'auto' for grid search")


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="random seed (default 0)")
    common.add_argument("--out", help="output path")
    common.add_argument("--verbose", action="store_true",
                        help="enable info-level logging")

    parser = _Parser(prog="gearcheck",
                     description="Gearbox fault-diagnosis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common],
                       help="write a synthetic 27-signal dataset plus manifest")
    _add_synth_options(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", parents=[common],
                       help="extract feature tables from signal CSVs")
    p.add_argument("--input", help="signal directory or manifest.json")
    p.add_argument("--synth", action="store_true",
                   help="synthesize the default dataset instead of reading files")
    p.add_argument("--preprocess", default="ceeo",
                   help="comma list from raw,eo,ceeo (default ceeo)")
    p.add_argument("--features", default="combined",
                   help="comma list from time,combined (default combined)")
    _add_synth_options(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", parents=[common],
                       help="train a one-vs-one model from a feature CSV")
    p.add_argument("--features", required=True, help="labeled feature CSV")
    p.add_argument("--preprocess", default="ceeo", choices=["raw", "eo", "ceeo"],
                   help="preprocessing the features were computed with "
                        "(recorded in the model for diagnose)")
    _add_svm_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common],
                       help="run the four-way raw/ceeo x time/combined comparison")
    p.add_argument("--input", help="signal directory or manifest.json")
    p.add_argument("--synth", action="store_true",
                   help="evaluate on an in-memory synthetic dataset")
    _add_synth_options(p)
    _add_svm_options(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnose", parents=[common],
                       help="predict the health class of unlabeled signal CSVs")
    p.add_argument("--model", required=True, help="model JSON from train")
    p.add_argument("--preprocess", choices=["raw", "eo", "ceeo"],
                   help="override the preprocessing recorded in the model")
    p.add_argument("--features", choices=["time", "combined"],
                   help="override the feature set implied by the model")
    p.add_argument("signals", nargs="+", help="signal CSV files")
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help and friends
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
