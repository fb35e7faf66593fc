import json
import math

import numpy as np
import pytest

from cardloss import cli
from cardloss.cli import (
    TRACE_COLUMNS,
    compare_runs,
    main,
    read_csv_columns,
    read_trace_csv,
)
from cardloss.synthdata import DatasetSpec, generate, load_csv, split

TINY = ["--samples", "150", "--classes", "3", "--informative", "4",
        "--redundant", "1", "--majority", "0.5"]


def run_cli(*argv):
    return main(list(argv))


# ---------------------------------------------------------------- gen-data


def test_gen_data_writes_expected_histogram(tmp_path, capsys):
    out = tmp_path / "data.csv"
    code = run_cli("gen-data", "--samples", "200", "--classes", "4",
                   "--informative", "5", "--redundant", "2",
                   "--majority", "0.7", "--seed", "0", "--out", str(out))
    assert code == 0
    data = load_csv(out)
    hist = np.bincount(data.labels, minlength=4)
    assert hist[0] == 140 and hist.sum() == 200
    assert "class counts:" in capsys.readouterr().out


def test_gen_data_reruns_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    flags = ["gen-data", *TINY, "--seed", "3"]
    assert run_cli(*flags, "--out", str(a)) == 0
    assert run_cli(*flags, "--out", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_data_missing_flag_is_usage_error(tmp_path, capsys):
    code = run_cli("gen-data", "--classes", "4", "--informative", "5",
                   "--redundant", "2", "--majority", "0.7",
                   "--out", str(tmp_path / "x.csv"))
    assert code == 2
    capsys.readouterr()


def test_gen_data_invalid_spec_is_usage_error(tmp_path, capsys):
    code = run_cli("gen-data", "--samples", "100", "--classes", "4",
                   "--informative", "5", "--redundant", "2",
                   "--majority", "1.5", "--out", str(tmp_path / "x.csv"))
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_gen_data_unwritable_path_is_io_error(tmp_path, capsys):
    code = run_cli("gen-data", *TINY, "--out",
                   str(tmp_path / "missing" / "x.csv"))
    assert code == 3
    assert "error:" in capsys.readouterr().err


# ------------------------------------------------------------------- train


def test_train_writes_trace_with_mandated_columns(tmp_path, capsys):
    code = run_cli("train", *TINY, "--loss", "cce", "--epochs", "2",
                   "--seed", "0", "--out-dir", str(tmp_path))
    assert code == 0
    path = tmp_path / "trace_cce_0.csv"
    header, rows = read_csv_columns(path)
    assert tuple(header[:len(TRACE_COLUMNS)]) == TRACE_COLUMNS
    assert len(rows) == 2
    trace = read_trace_csv(path)
    assert [r.epoch for r in trace.records] == [1, 2]
    assert np.isfinite(trace.column("acc")).all()
    out = capsys.readouterr().out
    assert "best test acc" in out


def test_train_single_epoch_single_row(tmp_path):
    code = run_cli("train", *TINY, "--loss", "mse", "--epochs", "1",
                   "--seed", "1", "--out-dir", str(tmp_path))
    assert code == 0
    _, rows = read_csv_columns(tmp_path / "trace_mse_1.csv")
    assert len(rows) == 1


def test_train_env_var_sets_default_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("CARDLOSS_SEED", "7")
    code = run_cli("train", *TINY, "--loss", "cce", "--epochs", "1",
                   "--out-dir", str(tmp_path))
    assert code == 0
    assert (tmp_path / "trace_cce_7.csv").exists()


def test_train_bad_env_seed_is_usage_error(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CARDLOSS_SEED", "not-a-number")
    code = run_cli("train", *TINY, "--loss", "cce", "--epochs", "1",
                   "--out-dir", str(tmp_path))
    assert code == 2
    capsys.readouterr()


def test_train_divergence_exits_4(tmp_path, capsys):
    with np.errstate(over="ignore", invalid="ignore"):
        code = run_cli("train", *TINY, "--loss", "mse", "--epochs", "2",
                       "--lr", "1e300", "--seed", "0", "--out-dir", str(tmp_path))
    assert code == 4
    assert "diverged" in capsys.readouterr().err


def test_train_requires_loss(tmp_path, capsys):
    assert run_cli("train", *TINY, "--out-dir", str(tmp_path)) == 2
    capsys.readouterr()


# ----------------------------------------------------------------- compare


def test_compare_emits_tables_charts_and_warmup_line(tmp_path, capsys):
    code = run_cli("compare", *TINY, "--losses", "magnitude", "cce",
                   "--seeds", "0", "1", "--epochs", "2",
                   "--out-dir", str(tmp_path))
    assert code == 0
    for name in ("trace_magnitude_0.csv", "trace_magnitude_1.csv",
                 "trace_cce_0.csv", "trace_cce_1.csv",
                 "table_seed0.csv", "table_seed1.csv", "median.csv"):
        assert (tmp_path / name).exists(), name
    header, rows = read_csv_columns(tmp_path / "median.csv")
    assert header == ["metric", "magnitude", "cce"]
    assert [r[0] for r in rows] == ["Acc.", "PR-AUC", "F1Macro", "Loss", "CCE", "MSE"]
    charts = sorted(p.name for p in tmp_path.glob("chart_*.svg"))
    assert charts == [f"chart_{m}.svg"
                      for m in sorted(("acc", "f1_micro", "f1_macro", "pr_auc", "cce", "mse"))]
    # one polyline per loss per chart
    svg = (tmp_path / "chart_acc.svg").read_text(encoding="utf-8")
    assert svg.count("<polyline") == 2
    out = capsys.readouterr().out
    assert "warm-up check:" in out


def test_compare_single_loss_single_seed(tmp_path, capsys):
    code = run_cli("compare", *TINY, "--losses", "mse", "--seeds", "3",
                   "--epochs", "1", "--out-dir", str(tmp_path))
    assert code == 0
    header, rows = read_csv_columns(tmp_path / "median.csv")
    assert header == ["metric", "mse"]
    assert len(rows) == 6
    capsys.readouterr()


def test_compare_summary_extrema_match_trace(tmp_path):
    spec = DatasetSpec(n_samples=150, n_classes=3, n_informative=4,
                       n_redundant=1, majority_fraction=0.5, seed=0)
    parts = split(generate(spec), 0.7, seed=0)
    report = compare_runs(parts, ("cce", "spread"), (0,), epochs=3)
    assert not report.warnings
    for run in report.runs:
        assert run.summary["Acc."] == run.trace.column("acc").max()
        assert run.summary["F1Macro"] == run.trace.column("f1_macro").max()
        assert run.summary["Loss"] == run.trace.column("train_loss").min()
        assert run.summary["CCE"] == run.trace.column("cce").min()
        assert run.summary["MSE"] == run.trace.column("mse").min()
        assert run.summary["s/epoch"] == pytest.approx(run.trace.column("sec").mean())


def test_compare_rejects_unknown_loss(tmp_path, capsys):
    code = run_cli("compare", *TINY, "--losses", "hinge",
                   "--out-dir", str(tmp_path))
    assert code == 2
    capsys.readouterr()


# -------------------------------------------------------------------- scan


def test_scan_two_point_matches_closed_form(tmp_path):
    out = tmp_path / "scan.csv"
    code = run_cli("scan", "--two-point", "1.0", "--t-min", "0.01",
                   "--t-max", "10", "--steps", "50", "--out", str(out))
    assert code == 0
    header, rows = read_csv_columns(out)
    assert header == ["t", "magnitude", "spread"]
    assert len(rows) == 50
    for t_s, mag_s, spr_s in rows:
        t = float(t_s)
        expected = 2.0 / (1.0 + math.exp(-t))
        assert abs(float(mag_s) - expected) <= 1e-10
        assert abs(float(spr_s) - expected) <= 1e-10


def test_scan_points_file_single_point_is_constant_one(tmp_path):
    pts = tmp_path / "pts.csv"
    pts.write_text("0.5,0.5\n", encoding="utf-8")
    out = tmp_path / "scan.csv"
    code = run_cli("scan", "--points", str(pts), "--steps", "10",
                   "--out", str(out))
    assert code == 0
    _, rows = read_csv_columns(out)
    assert all(float(r[1]) == 1.0 and float(r[2]) == 1.0 for r in rows)


def test_scan_reads_labeled_csv_dropping_label_column(tmp_path):
    pts = tmp_path / "pts.csv"
    pts.write_text("f0,f1,label\n0.0,0.0,0\n3.0,4.0,1\n", encoding="utf-8")
    out = tmp_path / "scan.csv"
    code = run_cli("scan", "--points", str(pts), "--t-min", "1.0",
                   "--t-max", "1.0", "--steps", "1", "--out", str(out))
    assert code == 0
    _, rows = read_csv_columns(out)
    # distance 5 at t=1: both invariants follow the two-point formula
    assert abs(float(rows[0][1]) - 2.0 / (1.0 + math.exp(-5.0))) <= 1e-10


def test_scan_needs_exactly_one_source(tmp_path, capsys):
    assert run_cli("scan") == 2
    assert run_cli("scan", "--two-point", "1.0", "--points", "x.csv") == 2
    capsys.readouterr()


def test_scan_rejects_bad_grid_and_separation(tmp_path, capsys):
    assert run_cli("scan", "--two-point", "-1.0",
                   "--out", str(tmp_path / "s.csv")) == 2
    assert run_cli("scan", "--two-point", "1.0", "--steps", "0",
                   "--out", str(tmp_path / "s.csv")) == 2
    capsys.readouterr()


# ------------------------------------------------------------------- bench


def test_bench_writes_timing_rows(tmp_path, capsys):
    out = tmp_path / "timing.csv"
    code = run_cli("bench", *TINY, "--losses", "cce", "mse", "--epochs", "1",
                   "--out", str(out))
    assert code == 0
    header, rows = read_csv_columns(out)
    assert header == ["loss", "mean_sec_per_epoch", "std_sec_per_epoch", "epochs"]
    assert [r[0] for r in rows] == ["cce", "mse"]
    assert all(float(r[1]) > 0 for r in rows)
    capsys.readouterr()


# ----------------------------------------------------------- config + misc


def test_config_file_supplies_defaults_and_flags_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "samples": 200, "classes": 4, "informative": 5, "redundant": 2,
        "majority": 0.7, "seed": 5,
    }), encoding="utf-8")
    out = tmp_path / "d.csv"
    code = run_cli("gen-data", "--config", str(cfg), "--majority", "0.5",
                   "--out", str(out))
    assert code == 0
    data = load_csv(out)
    assert data.n_samples == 200
    # flag wins over the config file value
    assert int(np.bincount(data.labels)[0]) == 100
    capsys.readouterr()


def test_config_file_with_invalid_json_is_parse_error(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json", encoding="utf-8")
    code = run_cli("gen-data", "--config", str(cfg), *TINY,
                   "--out", str(tmp_path / "d.csv"))
    assert code == 3
    capsys.readouterr()


def test_no_subcommand_prints_usage(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_trace_csv_round_trip(tmp_path):
    run_cli("train", *TINY, "--loss", "spread", "--epochs", "2",
            "--seed", "2", "--out-dir", str(tmp_path))
    path = tmp_path / "trace_spread_2.csv"
    trace = read_trace_csv(path)
    cli.write_trace_csv(trace, tmp_path / "copy.csv")
    assert (tmp_path / "copy.csv").read_bytes() == path.read_bytes()
