"""Command-line front end.

Subcommands: gen-data, train, compare, scan, bench.  Options may come from
flags or from a JSON config file (flags win).  The CARDLOSS_SEED environment
variable supplies the default seed.  Exit codes: 0 success, 2 usage errors,
3 I/O or parse failures, 4 training divergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    CsvFormatError,
    DivergenceError,
    InvalidArgumentError,
    UndefinedMetricError,
)
from .invariants import PointCloud, scale_scan
from .nn import EpochRecord, TrainConfig, TrainTrace, init_model, train
from .svg import line_chart
from .synthdata import Dataset, DatasetSpec, generate, load_csv, save_csv, split

#: Mandatory leading columns of a trace CSV; pr_auc_macro rides along after.
TRACE_COLUMNS = ("epoch", "train_loss", "acc", "f1_micro", "f1_macro",
                 "pr_auc", "cce", "mse", "sec")
_EXTRA_TRACE_COLUMNS = ("pr_auc_macro",)

_LOSS_NAMES = ("magnitude", "spread", "cce", "mse")
_TABLE_ROWS = ("Acc.", "PR-AUC", "F1Macro", "Loss", "CCE", "MSE")
_CHART_METRICS = ("acc", "f1_micro", "f1_macro", "pr_auc", "cce", "mse")

_HIDDEN_UNITS = 32


def _default_seed() -> int:
    raw = os.environ.get("CARDLOSS_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InvalidArgumentError(f"CARDLOSS_SEED must be an integer, got {raw!r}") from None


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as err:
        raise CsvFormatError(f"config {path}: {err}") from None
    if not isinstance(cfg, dict):
        raise InvalidArgumentError(f"config {path}: top level must be a JSON object")
    return cfg


def _merged(args, defaults: dict, required=()):
    """Resolve option values: explicit flag, then config file, then default."""
    cfg = _load_config(getattr(args, "config", None))
    ns = {}
    for key, default in defaults.items():
        value = getattr(args, key, None)
        if value is None:
            value = cfg.get(key, default)
        ns[key] = value
    for key in required:
        if ns[key] is None:
            args.subparser.error(f"the option --{key.replace('_', '-')} is required")
    return ns


_DATASET_DEFAULTS = {
    "data": None,
    "samples": 10000,
    "classes": 10,
    "informative": 15,
    "redundant": 5,
    "majority": 0.5,
    "class_sep": 1.0,
    "data_seed": 0,
}


def _add_dataset_options(sub, include_data=True):
    if include_data:
        sub.add_argument("--data", help="CSV dataset to load instead of generating one")
    sub.add_argument("--samples", type=int, help="number of samples to generate")
    sub.add_argument("--classes", type=int, help="number of classes")
    sub.add_argument("--informative", type=int, help="informative feature count")
    sub.add_argument("--redundant", type=int, help="redundant feature count")
    sub.add_argument("--majority", type=float, help="majority class fraction")
    sub.add_argument("--class-sep", type=float, dest="class_sep",
                     help="hypercube half-width per coordinate")
    sub.add_argument("--data-seed", type=int, dest="data_seed",
                     help="seed for dataset generation")


def _dataset_from(ns) -> Dataset:
    if ns.get("data"):
        return load_csv(ns["data"])
    spec = DatasetSpec(
        n_samples=ns["samples"],
        n_classes=ns["classes"],
        n_informative=ns["informative"],
        n_redundant=ns["redundant"],
        majority_fraction=ns["majority"],
        class_sep=ns["class_sep"],
        seed=ns["data_seed"],
    )
    return generate(spec)


# ---------------------------------------------------------------------------
# CSV helpers


def read_csv_columns(path):
    """Header list and data rows of a CSV file, with parse-context errors."""
    try:
        with open(path, "r", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise CsvFormatError(f"{path}: file is empty") from None
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise CsvFormatError(
                        f"{path}: line {lineno}: expected {len(header)} fields, "
                        f"found {len(row)}")
                rows.append(row)
    except OSError:
        raise
    return header, rows


def write_trace_csv(trace: TrainTrace, path) -> None:
    """Persist a training trace; column order is part of the interface."""
    columns = TRACE_COLUMNS + _EXTRA_TRACE_COLUMNS
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for rec in trace.records:
            writer.writerow([rec.epoch] + [repr(getattr(rec, c)) for c in columns[1:]])


def read_trace_csv(path) -> TrainTrace:
    header, rows = read_csv_columns(path)
    expected = list(TRACE_COLUMNS + _EXTRA_TRACE_COLUMNS)
    if header[:len(TRACE_COLUMNS)] != list(TRACE_COLUMNS):
        raise CsvFormatError(f"{path}: unexpected trace header {header!r}")
    records = []
    for lineno, row in enumerate(rows, start=2):
        try:
            values = dict(zip(header, row))
            records.append(EpochRecord(
                epoch=int(values["epoch"]),
                **{c: float(values.get(c, "nan")) for c in expected[1:]},
            ))
        except ValueError as err:
            raise CsvFormatError(f"{path}: line {lineno}: {err}") from None
    return TrainTrace(tuple(records))


# ---------------------------------------------------------------------------
# training plumbing shared by train / compare / bench


def _train_once(parts, loss: str, seed: int, lr: float, epochs: int,
                batch_size: int) -> TrainTrace:
    model = init_model(parts.train.n_features, _HIDDEN_UNITS,
                       max(parts.train.n_classes, parts.test.n_classes), seed)
    config = TrainConfig(loss_name=loss, learning_rate=lr, epochs=epochs,
                         batch_size=batch_size, seed=seed)
    return train(model, parts, config)


def _summary_of(trace: TrainTrace) -> dict:
    return {
        "Acc.": float(trace.column("acc").max()),
        "PR-AUC": float(trace.column("pr_auc").max()),
        "F1Macro": float(trace.column("f1_macro").max()),
        "F1Micro": float(trace.column("f1_micro").max()),
        "Loss": float(trace.column("train_loss").min()),
        "CCE": float(trace.column("cce").min()),
        "MSE": float(trace.column("mse").min()),
        "s/epoch": float(trace.column("sec").mean()),
    }


@dataclass(frozen=True)
class RunResult:
    """Outcome of one (loss, seed) training run inside a comparison."""

    loss: str
    seed: int
    trace: TrainTrace
    summary: dict


@dataclass(frozen=True)
class ComparisonReport:
    """All runs of a comparison plus per-loss medians and any run warnings."""

    runs: tuple[RunResult, ...]
    medians: dict
    warnings: tuple[str, ...]

    def runs_for(self, loss: str):
        return [r for r in self.runs if r.loss == loss]


def _compare_worker(payload):
    parts, loss, seed, lr, epochs, batch_size = payload
    return loss, seed, _train_once(parts, loss, seed, lr, epochs, batch_size)


def compare_runs(parts, losses, seeds, lr=0.01, epochs=100, batch_size=32,
                 jobs=1) -> ComparisonReport:
    """Train every (loss, seed) pair on one shared split.

    Individual run failures become warnings instead of aborting the rest.
    """
    payloads = [(parts, loss, seed, lr, epochs, batch_size)
                for loss in losses for seed in seeds]
    results = []
    warnings = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_compare_worker, p): p for p in payloads}
            for future, payload in futures.items():
                try:
                    results.append(future.result())
                except Exception as err:  # noqa: BLE001 - run isolation is the point
                    warnings.append(f"run loss={payload[1]} seed={payload[2]} failed: {err}")
    else:
        for payload in payloads:
            try:
                results.append(_compare_worker(payload))
            except Exception as err:  # noqa: BLE001
                warnings.append(f"run loss={payload[1]} seed={payload[2]} failed: {err}")

    runs = tuple(RunResult(loss, seed, trace, _summary_of(trace))
                 for loss, seed, trace in results)
    medians = {}
    for loss in losses:
        per_loss = [r.summary for r in runs if r.loss == loss]
        if per_loss:
            medians[loss] = {key: statistics.median(s[key] for s in per_loss)
                             for key in per_loss[0]}
    return ComparisonReport(runs, medians, tuple(warnings))


def _write_table_csv(path, losses, values_by_loss) -> None:
    """values_by_loss: loss -> {metric: value}; rows follow the report layout."""
    present = [l for l in losses if l in values_by_loss]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric"] + present)
        for metric in _TABLE_ROWS:
            writer.writerow([metric] +
                            [f"{values_by_loss[l][metric]:.10g}" for l in present])


def _write_charts(report: ComparisonReport, losses, out_dir) -> list:
    written = []
    for metric in _CHART_METRICS:
        series = {}
        for loss in losses:
            runs = report.runs_for(loss)
            if not runs:
                continue
            stacked = np.stack([r.trace.column(metric) for r in runs])
            epochs = runs[0].trace.column("epoch")
            series[loss] = (epochs, np.median(stacked, axis=0))
        if not series:
            continue
        path = os.path.join(out_dir, f"chart_{metric}.svg")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(line_chart(series, f"test {metric} by epoch", "epoch", metric))
        written.append(path)
    return written


def _median_epoch_metric(report, loss, epoch_index, metric):
    values = []
    for run in report.runs_for(loss):
        col = run.trace.column(metric)
        if len(col) > epoch_index:
            values.append(col[epoch_index])
    return statistics.median(values) if values else None


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gen_data(args, parser):
    ns = _merged(args, {
        "samples": None, "classes": None, "informative": None, "redundant": None,
        "majority": None, "class_sep": 1.0, "seed": None, "out": None,
    }, required=("samples", "classes", "informative", "redundant", "majority", "out"))
    seed = ns["seed"] if ns["seed"] is not None else _default_seed()
    spec = DatasetSpec(
        n_samples=ns["samples"], n_classes=ns["classes"],
        n_informative=ns["informative"], n_redundant=ns["redundant"],
        majority_fraction=ns["majority"], class_sep=ns["class_sep"], seed=seed,
    )
    data = generate(spec)
    save_csv(data, ns["out"])
    counts = np.bincount(data.labels, minlength=spec.n_classes)
    print(f"wrote {ns['out']}: {data.n_samples} samples, "
          f"{data.n_features} features, {spec.n_classes} classes")
    print("class counts: " + " ".join(str(c) for c in counts))
    return 0


_TRAIN_DEFAULTS = {
    **_DATASET_DEFAULTS,
    "loss": None,
    "lr": 0.01,
    "epochs": 100,
    "batch_size": 32,
    "seed": None,
    "split_ratio": 0.7,
    "split_seed": 0,
    "out_dir": ".",
}


def _cmd_train(args, parser):
    ns = _merged(args, _TRAIN_DEFAULTS, required=("loss",))
    seed = ns["seed"] if ns["seed"] is not None else _default_seed()
    parts = split(_dataset_from(ns), ns["split_ratio"], ns["split_seed"])
    os.makedirs(ns["out_dir"], exist_ok=True)
    trace_path = os.path.join(ns["out_dir"], f"trace_{ns['loss']}_{seed}.csv")
    try:
        trace = _train_once(parts, ns["loss"], seed, ns["lr"], ns["epochs"],
                            ns["batch_size"])
    except DivergenceError as err:
        if err.partial_trace is not None and err.partial_trace.records:
            write_trace_csv(err.partial_trace, trace_path)
            print(f"wrote partial trace {trace_path}", file=sys.stderr)
        print(f"error: training diverged: {err}", file=sys.stderr)
        return 4
    write_trace_csv(trace, trace_path)
    print(f"wrote {trace_path}")
    if trace.records:
        summary = _summary_of(trace)
        print(f"best test acc {summary['Acc.']:.4f}  "
              f"best PR-AUC {summary['PR-AUC']:.4f}  "
              f"best F1 macro {summary['F1Macro']:.4f}")
        print(f"min train loss {summary['Loss']:.4f}  "
              f"min test CCE {summary['CCE']:.4f}  "
              f"min test MSE {summary['MSE']:.4f}  "
              f"mean {summary['s/epoch']:.4f} s/epoch")
    return 0


def _cmd_compare(args, parser):
    ns = _merged(args, {
        **_DATASET_DEFAULTS,
        "losses": list(_LOSS_NAMES),
        "seeds": None,
        "lr": 0.01,
        "epochs": 100,
        "batch_size": 32,
        "split_ratio": 0.7,
        "split_seed": 0,
        "out_dir": ".",
        "jobs": 1,
    })
    losses = list(ns["losses"])
    for name in losses:
        if name not in _LOSS_NAMES:
            raise InvalidArgumentError(f"unknown loss {name!r}")
    seeds = [int(s) for s in ns["seeds"]] if ns["seeds"] is not None else [_default_seed()]
    parts = split(_dataset_from(ns), ns["split_ratio"], ns["split_seed"])
    report = compare_runs(parts, losses, seeds, ns["lr"], ns["epochs"],
                          ns["batch_size"], jobs=int(ns["jobs"]))

    os.makedirs(ns["out_dir"], exist_ok=True)
    for run in report.runs:
        write_trace_csv(run.trace,
                        os.path.join(ns["out_dir"], f"trace_{run.loss}_{run.seed}.csv"))
    for seed in seeds:
        by_loss = {r.loss: r.summary for r in report.runs if r.seed == seed}
        if by_loss:
            _write_table_csv(os.path.join(ns["out_dir"], f"table_seed{seed}.csv"),
                             losses, by_loss)
    if report.medians:
        _write_table_csv(os.path.join(ns["out_dir"], "median.csv"),
                         losses, report.medians)
    charts = _write_charts(report, losses, ns["out_dir"])

    print(f"ran {len(report.runs)} of {len(losses) * len(seeds)} runs "
          f"({len(seeds)} seed(s); outputs in {ns['out_dir']})")
    for loss in losses:
        med = report.medians.get(loss)
        if med:
            print(f"  {loss:<10} median best acc {med['Acc.']:.4f}  "
                  f"F1 macro {med['F1Macro']:.4f}  PR-AUC {med['PR-AUC']:.4f}  "
                  f"min CCE {med['CCE']:.4f}  min MSE {med['MSE']:.4f}")
    if "magnitude" in report.medians and "cce" in report.medians:
        n_epochs = int(ns["epochs"])
        early = min(5, n_epochs) - 1
        late = n_epochs - 1
        if early >= 0:
            m5 = _median_epoch_metric(report, "magnitude", early, "acc")
            c5 = _median_epoch_metric(report, "cce", early, "acc")
            mN = _median_epoch_metric(report, "magnitude", late, "acc")
            cN = _median_epoch_metric(report, "cce", late, "acc")
            if None not in (m5, c5, mN, cN):
                print(f"warm-up check: epoch {early + 1} acc magnitude {m5:.4f} "
                      f"vs cce {c5:.4f}; epoch {late + 1} acc magnitude {mN:.4f} "
                      f"vs cce {cN:.4f}")
    print(f"wrote {len(charts)} charts")
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def _read_points(path) -> PointCloud:
    header, rows = read_csv_columns(path)
    try:
        [float(v) for v in header]
        numeric_header = True
    except ValueError:
        numeric_header = False
    if numeric_header:
        data_rows = [header] + rows
        first_line = 1
        drop_label = False
    else:
        data_rows = rows
        first_line = 2
        drop_label = bool(header) and header[-1] == "label"
    points = []
    for lineno, row in enumerate(data_rows, start=first_line):
        fields = row[:-1] if drop_label else row
        try:
            points.append([float(v) for v in fields])
        except ValueError as err:
            raise CsvFormatError(f"{path}: line {lineno}: {err}") from None
    if not points:
        raise CsvFormatError(f"{path}: no point rows")
    return PointCloud(np.array(points))


def _cmd_scan(args, parser):
    ns = _merged(args, {
        "points": None, "two_point": None,
        "t_min": 0.01, "t_max": 10.0, "steps": 100, "out": "scan.csv",
    })
    if (ns["points"] is None) == (ns["two_point"] is None):
        args.subparser.error("exactly one of --points or --two-point is required")
    if ns["two_point"] is not None:
        sep = float(ns["two_point"])
        if not (math.isfinite(sep) and sep > 0):
            raise InvalidArgumentError("--two-point separation must be positive")
        cloud = PointCloud(np.array([[0.0], [sep]]))
    else:
        cloud = _read_points(ns["points"])
    steps = int(ns["steps"])
    if steps < 1:
        raise InvalidArgumentError("--steps must be at least 1")
    grid = np.linspace(float(ns["t_min"]), float(ns["t_max"]), steps)
    magnitudes = scale_scan(cloud, grid, "magnitude")
    spreads = scale_scan(cloud, grid, "spread")
    with open(ns["out"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "magnitude", "spread"])
        for (t, mag), (_, spr) in zip(magnitudes, spreads):
            writer.writerow([repr(t), repr(mag), repr(spr)])
    print(f"wrote {ns['out']}: {steps} scales over [{grid[0]}, {grid[-1]}] "
          f"for {cloud.cardinality} points")
    return 0


def _cmd_bench(args, parser):
    ns = _merged(args, {
        **_DATASET_DEFAULTS,
        "losses": list(_LOSS_NAMES),
        "lr": 0.01,
        "epochs": 5,
        "batch_size": 32,
        "seed": None,
        "split_ratio": 0.7,
        "split_seed": 0,
        "out": "timing.csv",
    })
    seed = ns["seed"] if ns["seed"] is not None else _default_seed()
    losses = list(ns["losses"])
    for name in losses:
        if name not in _LOSS_NAMES:
            raise InvalidArgumentError(f"unknown loss {name!r}")
    parts = split(_dataset_from(ns), ns["split_ratio"], ns["split_seed"])
    rows = []
    for loss in losses:
        trace = _train_once(parts, loss, seed, ns["lr"], ns["epochs"], ns["batch_size"])
        secs = trace.column("sec")
        rows.append((loss, float(secs.mean()), float(secs.std()), len(secs)))
    with open(ns["out"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["loss", "mean_sec_per_epoch", "std_sec_per_epoch", "epochs"])
        for loss, mean, std, n in rows:
            writer.writerow([loss, f"{mean:.6f}", f"{std:.6f}", n])
    print(f"batch size {ns['batch_size']}, {ns['epochs']} epoch(s) per loss")
    for loss, mean, std, _ in rows:
        print(f"  {loss:<10} {mean:.4f} s/epoch (std {std:.4f})")
    print(f"wrote {ns['out']}")
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cardloss",
        description="Point-cloud cardinality invariants as classification losses.")
    subs = parser.add_subparsers(dest="command")

    gen = subs.add_parser("gen-data", help="generate a synthetic dataset CSV")
    _add_dataset_options(gen, include_data=False)
    gen.add_argument("--seed", type=int, help="generation seed")
    gen.add_argument("--out", help="output CSV path")
    gen.set_defaults(func=_cmd_gen_data)

    tr = subs.add_parser("train", help="train one model and write its trace")
    _add_dataset_options(tr)
    tr.add_argument("--loss", choices=_LOSS_NAMES, help="training loss")
    tr.add_argument("--lr", type=float, help="SGD learning rate")
    tr.add_argument("--epochs", type=int, help="training epochs")
    tr.add_argument("--batch-size", type=int, dest="batch_size", help="minibatch size")
    tr.add_argument("--seed", type=int, help="model init and shuffle seed")
    tr.add_argument("--split-ratio", type=float, dest="split_ratio", help="train share")
    tr.add_argument("--split-seed", type=int, dest="split_seed", help="split shuffle seed")
    tr.add_argument("--out-dir", dest="out_dir", help="directory for outputs")
    tr.set_defaults(func=_cmd_train)

    cp = subs.add_parser("compare", help="train several losses and seeds, tabulate")
    _add_dataset_options(cp)
    cp.add_argument("--losses", nargs="+", choices=_LOSS_NAMES, help="losses to compare")
    cp.add_argument("--seeds", nargs="+", type=int, help="training seeds")
    cp.add_argument("--lr", type=float, help="SGD learning rate")
    cp.add_argument("--epochs", type=int, help="training epochs")
    cp.add_argument("--batch-size", type=int, dest="batch_size", help="minibatch size")
    cp.add_argument("--split-ratio", type=float, dest="split_ratio", help="train share")
    cp.add_argument("--split-seed", type=int, dest="split_seed", help="split shuffle seed")
    cp.add_argument("--out-dir", dest="out_dir", help="directory for outputs")
    cp.add_argument("--jobs", type=int, help="parallel worker processes")
    cp.set_defaults(func=_cmd_compare)

    sc = subs.add_parser("scan", help="magnitude and spread over a scale grid")
    sc.add_argument("--points", help="CSV of point coordinates")
    sc.add_argument("--two-point", type=float, dest="two_point",
                    help="separation of a builtin two-point cloud")
    sc.add_argument("--t-min", type=float, dest="t_min", help="smallest scale")
    sc.add_argument("--t-max", type=float, dest="t_max", help="largest scale")
    sc.add_argument("--steps", type=int, help="number of grid points")
    sc.add_argument("--out", help="output CSV path")
    sc.set_defaults(func=_cmd_scan)

    be = subs.add_parser("bench", help="seconds per epoch for each loss")
    _add_dataset_options(be)
    be.add_argument("--losses", nargs="+", choices=_LOSS_NAMES, help="losses to time")
    be.add_argument("--lr", type=float, help="SGD learning rate")
    be.add_argument("--epochs", type=int, help="epochs to time per loss")
    be.add_argument("--batch-size", type=int, dest="batch_size", help="minibatch size")
    be.add_argument("--seed", type=int, help="model init and shuffle seed")
    be.add_argument("--split-ratio", type=float, dest="split_ratio", help="train share")
    be.add_argument("--split-seed", type=int, dest="split_seed", help="split shuffle seed")
    be.add_argument("--out", help="output CSV path")
    be.set_defaults(func=_cmd_bench)

    for sub in (gen, tr, cp, sc, be):
        sub.add_argument("--config", help="JSON file of option defaults")
        sub.set_defaults(subparser=sub)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args, parser)
    except SystemExit as exc:  # subparser.error inside a command
        return int(exc.code or 0)
    except (InvalidArgumentError, UndefinedMetricError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except CsvFormatError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except DivergenceError as err:
        print(f"error: training diverged: {err}", file=sys.stderr)
        return 4


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
