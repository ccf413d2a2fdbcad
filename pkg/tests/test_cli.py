import json

import numpy as np
import pandas as pd
import pytest

from bopi.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, EXIT_VERIFY, main


def run(args):
    return main(args)


@pytest.fixture
def linear_csv(tmp_path):
    # Gaussian-noise linear data large enough for near-nominal coverage.
    rng = np.random.Generator(np.random.PCG64(123))
    n = 2000
    X = rng.random((n, 3)) * 2
    y = 1.0 + X @ [2.0, -1.0, 0.5] + rng.normal(size=n)
    frame = pd.DataFrame({"a": X[:, 0], "b": X[:, 1], "c": X[:, 2], "y": y})
    path = tmp_path / "linear.csv"
    frame.to_csv(path, index=False)
    return path


def read_rows(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [dict(zip(header, line.strip().split(","))) for line in fh]
    return header, rows


# --- verify ----------------------------------------------------------------------

def test_verify_passes_and_writes_reports(tmp_path, capsys):
    code = run(["verify", "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    outp = capsys.readouterr().out
    assert "containment-table: PASS" in outp
    assert "containment-grid: PASS" in outp
    report = json.loads((tmp_path / "verify_report.json").read_text())
    assert report["containment_table"]["passed"] is True
    assert report["containment_grid"]["passed"] is True
    header, rows = read_rows(tmp_path / "verify_cells.csv")
    assert header == ["check", "gamma", "beta", "n", "ratio", "expect_contained", "passed"]
    # Every tabled combination appears among the checked cells.
    combos = {(r["gamma"], r["beta"], r["n"]) for r in rows}
    assert len(combos) >= 16


def test_verify_outputs_byte_identical(tmp_path):
    a, b = tmp_path / "v1", tmp_path / "v2"
    assert run(["verify", "--output-dir", str(a)]) == EXIT_OK
    assert run(["verify", "--output-dir", str(b)]) == EXIT_OK
    for name in ("verify_report.json", "verify_cells.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_verify_detects_tampered_factor(tmp_path, monkeypatch):
    import bopi.verify as verify_mod

    real = verify_mod.tolerance_prediction_ratio
    monkeypatch.setattr(
        verify_mod, "tolerance_prediction_ratio", lambda n, b, g: real(n, b, g) * 0.99
    )
    code = run(["verify", "--output-dir", str(tmp_path)])
    assert code == EXIT_VERIFY


# --- usage / config ---------------------------------------------------------------

def test_unknown_flag_is_usage_error(tmp_path):
    assert run(["verify", "--nope", str(tmp_path)]) == EXIT_USAGE


def test_missing_dataset_is_usage_error(tmp_path):
    assert run(["evaluate", "--output-dir", str(tmp_path)]) == EXIT_USAGE


def test_missing_file_is_data_error(tmp_path):
    code = run(
        [
            "evaluate",
            "--dataset",
            str(tmp_path / "absent.csv"),
            "--response",
            "y",
            "--k-loess",
            "30",
            "--output-dir",
            str(tmp_path),
        ]
    )
    assert code == EXIT_DATA


def test_unknown_response_is_data_error(tmp_path, linear_csv):
    code = run(
        [
            "evaluate",
            "--dataset",
            str(linear_csv),
            "--response",
            "zzz",
            "--k-loess",
            "30",
            "--output-dir",
            str(tmp_path),
        ]
    )
    assert code == EXIT_DATA


def test_config_file_and_flag_override(tmp_path, linear_csv):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        f"dataset: {linear_csv}\nresponse: y\nk_loess: 40\nbetas: [0.9]\n"
        f"cv_folds: 4\nseed: 3\noutput_dir: {tmp_path / 'a'}\nmethods: [ols]\n"
    )
    assert run(["evaluate", "--config", str(cfg)]) == EXIT_OK
    assert (tmp_path / "a" / "report.csv").exists()
    # The flag wins over the config key.
    assert run(["evaluate", "--config", str(cfg), "--output-dir", str(tmp_path / "b")]) == EXIT_OK
    assert (tmp_path / "b" / "report.csv").exists()


def test_malformed_config_is_usage_error(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("betas: [0.9\n")
    assert run(["verify", "--config", str(bad)]) == EXIT_USAGE


# --- evaluate -----------------------------------------------------------------------

def test_evaluate_near_nominal_on_linear_gaussian(tmp_path, linear_csv):
    out = tmp_path / "out"
    code = run(
        [
            "evaluate",
            "--dataset",
            str(linear_csv),
            "--response",
            "y",
            "--betas",
            "0.9",
            "--gamma",
            "0.9",
            "--k-loess",
            "100",
            "--cv-folds",
            "10",
            "--seed",
            "1",
            "--output-dir",
            str(out),
        ]
    )
    assert code == EXIT_OK
    header, rows = read_rows(out / "report.csv")
    assert header == [
        "dataset",
        "method",
        "beta",
        "coverage",
        "mis",
        "sigma_is",
        "wilson_critical",
        "reliable",
        "egsd",
        "egsd_normalized",
        "stars",
    ]
    by_method = {r["method"]: r for r in rows}
    assert set(by_method) == {"conventional", "f-bopi", "a-bopi", "ols"}
    # OLS and the constant-width baseline sit within 3 points of nominal.
    for m in ("ols", "conventional"):
        assert abs(float(by_method[m]["coverage"]) - 0.9) < 0.03
    ref = json.loads((out / "report.json").read_text())
    assert len(ref["rows"]) == 4


def test_evaluate_beta_list_sections_and_determinism(tmp_path, linear_csv):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    args = [
        "evaluate",
        "--dataset",
        str(linear_csv),
        "--response",
        "y",
        "--betas",
        "0.8,0.9,0.95,0.99",
        "--k-loess",
        "60",
        "--cv-folds",
        "5",
        "--methods",
        "conventional,ols",
        "--seed",
        "7",
    ]
    assert run(args + ["--output-dir", str(out1)]) == EXIT_OK
    assert run(args + ["--output-dir", str(out2)]) == EXIT_OK
    assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
    _, rows = read_rows(out1 / "report.csv")
    assert sorted({r["beta"] for r in rows}) == ["0.8", "0.9", "0.95", "0.99"]
    assert len(rows) == 8


# --- tune ---------------------------------------------------------------------------

def test_tune_then_evaluate_roundtrip(tmp_path, linear_csv):
    out = tmp_path / "tuned"
    code = run(
        [
            "tune",
            "--dataset",
            str(linear_csv),
            "--response",
            "y",
            "--betas",
            "0.9",
            "--variant",
            "adaptive",
            "--k-loess",
            "80",
            "--cv-folds",
            "5",
            "--seed",
            "2",
            "--output-dir",
            str(out),
        ]
    )
    assert code == EXIT_OK
    tuned_path = out / "tuned_config.yaml"
    assert tuned_path.exists()
    import yaml

    tuned = yaml.safe_load(tuned_path.read_text())
    entry = tuned["lhnpe"]["0.9"]
    assert entry["feasible"] is True
    assert entry["training_coverage"] >= 0.9
    assert 20 <= entry["k_min"] <= entry["k_max"] <= 80
    code = run(
        [
            "evaluate",
            "--dataset",
            str(linear_csv),
            "--response",
            "y",
            "--betas",
            "0.9",
            "--lhnpe-config",
            str(tuned_path),
            "--cv-folds",
            "5",
            "--methods",
            "a-bopi",
            "--seed",
            "2",
            "--output-dir",
            str(out / "eval"),
        ]
    )
    assert code == EXIT_OK


def test_evaluate_categorical_csv_all_methods(tmp_path):
    # Full one-hot encoding is collinear with the intercept; the OLS
    # baseline must reduce the design instead of failing, and a tuned
    # neighborhood wider than an overridden bandwidth must clamp.
    rng = np.random.Generator(np.random.PCG64(3))
    n = 500
    group = rng.choice(["low", "mid", "high"], size=n)
    x1 = rng.random(n) * 5
    bump = np.select([group == "low", group == "mid"], [0.0, 2.0], default=5.0)
    y = x1 + bump + 0.4 * rng.normal(size=n)
    frame = pd.DataFrame({"x1": x1, "group": group, "y": y})
    frame.loc[5, "x1"] = np.nan
    path = tmp_path / "mixed.csv"
    frame.to_csv(path, index=False)
    tuned = tmp_path / "tuned.yaml"
    tuned.write_text(
        "k_loess: 120\nlhnpe:\n  '0.9':\n    gamma: 0.6\n    k_min: 110\n    k_max: 120\n"
    )
    out = tmp_path / "out"
    code = run(
        [
            "evaluate",
            "--dataset",
            str(path),
            "--response",
            "y",
            "--betas",
            "0.9",
            "--k-loess",
            "60",
            "--lhnpe-config",
            str(tuned),
            "--cv-folds",
            "5",
            "--seed",
            "4",
            "--output-dir",
            str(out),
        ]
    )
    assert code == EXIT_OK
    _, rows = read_rows(out / "report.csv")
    by_method = {r["method"]: r for r in rows}
    assert set(by_method) == {"conventional", "f-bopi", "a-bopi", "ols"}
    for r in rows:
        assert 0.8 < float(r["coverage"]) <= 1.0


# --- simulate ----------------------------------------------------------------------

def test_evaluate_loo_scheme(tmp_path):
    rng = np.random.Generator(np.random.PCG64(9))
    n = 120
    x = rng.random(n)
    frame = pd.DataFrame({"x": x, "y": 2 * x + 0.2 * rng.normal(size=n)})
    path = tmp_path / "tiny.csv"
    frame.to_csv(path, index=False)
    code = run(
        [
            "evaluate",
            "--dataset",
            str(path),
            "--response",
            "y",
            "--betas",
            "0.9",
            "--k-loess",
            "20",
            "--cv-folds",
            "4",
            "--cv-scheme",
            "loo",
            "--methods",
            "conventional",
            "--seed",
            "0",
            "--output-dir",
            str(tmp_path / "out"),
        ]
    )
    assert code == EXIT_OK
    _, rows = read_rows(tmp_path / "out" / "report.csv")
    assert rows[0]["method"] == "conventional"


def test_simulate_outputs_and_determinism(tmp_path):
    args = [
        "simulate",
        "--family",
        "friedman1",
        "--n",
        "240",
        "--n-sim",
        "2",
        "--betas",
        "0.9",
        "--gammas",
        "0.9,0.99",
        "--k-loess",
        "60",
        "--k-fixed",
        "25",
        "--k-min",
        "20",
        "--k-max",
        "30",
        "--cv-folds",
        "5",
        "--seed",
        "11",
    ]
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert run(args + ["--output-dir", str(out1)]) == EXIT_OK
    assert run(args + ["--output-dir", str(out2)]) == EXIT_OK
    for name in ["iterations.csv", "aggregate.json"]:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    agg = json.loads((out1 / "aggregate.json").read_text())
    assert {r["method"] for r in agg["rows"]} == {"conventional", "f-bopi", "a-bopi"}
    hists = sorted(p.name for p in out1.glob("coverage_hist_*.csv"))
    assert len(hists) == 6  # 3 methods x 2 gammas
    header, rows = read_rows(out1 / hists[0])
    assert header == ["coverage", "count"]
    assert sum(int(r["count"]) for r in rows) == 2
