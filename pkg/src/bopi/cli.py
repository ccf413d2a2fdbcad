"""Command-line interface: verification suites, hyper-parameter tuning,
dataset evaluation and Monte Carlo simulation.

Configuration comes from an optional YAML file plus flags; every flag
overrides its config key. Outputs are written with sorted keys and
repr-formatted floats so identical (config, seed) runs produce byte-
identical files.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from .distributions import DomainError
from .intervals import IntervalBand
from .llr import (
    DataError,
    Dataset,
    LoessModel,
    cv_prediction_errors,
    encode_dataset,
    fit_ols,
    ols_band,
    select_bandwidth,
)
from .metrics import summarize_methods
from .prediction import (
    AdaptiveNeighborhood,
    FixedNeighborhood,
    a_bopi_band,
    conventional_band,
    f_bopi_band,
    tune_hyperparams,
)
from .simulate import DgpSpec, SimHyper, run_simulation
from .verify import check_containment_grid, check_containment_table

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3

EVALUATE_METHODS = ("conventional", "f-bopi", "a-bopi", "ols")

DEFAULTS = {
    "response": None,
    "methods": list(EVALUATE_METHODS),
    "betas": [0.8, 0.9, 0.95, 0.99],
    "gamma": 0.9,
    "k_loess": None,
    "k_grid": None,
    "k_fixed": 40,
    "k_min": 30,
    "k_max": 50,
    "cv_folds": 10,
    "cv_scheme": "kfold",
    "seed": 0,
    "output_dir": "bopi-out",
    "variant": "adaptive",
    "family": "friedman1",
    "n": 1500,
    "noise_sd": None,
    "n_sim": 50,
    "threads": None,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p):
    p.add_argument("--config", help="YAML config file; flags override its keys")
    p.add_argument("--output-dir", dest="output_dir", help="directory for report files")
    p.add_argument("--seed", type=int, help="seed for every stochastic step")


def _add_data_opts(p):
    p.add_argument("--dataset", help="CSV file with a header row")
    p.add_argument("--response", help="name of the response column")
    p.add_argument("--betas", help="comma-separated content levels, e.g. 0.8,0.95")
    p.add_argument("--gamma", type=float, help="tolerance confidence level")
    p.add_argument("--k-loess", dest="k_loess", type=int, help="regression bandwidth")
    p.add_argument("--k-grid", dest="k_grid", help="comma-separated bandwidth grid")
    p.add_argument("--k-fixed", dest="k_fixed", type=int, help="fixed error neighborhood")
    p.add_argument("--k-min", dest="k_min", type=int, help="adaptive lower bound")
    p.add_argument("--k-max", dest="k_max", type=int, help="adaptive upper bound")
    p.add_argument("--cv-folds", dest="cv_folds", type=int, help="cross-validation folds")
    p.add_argument("--cv-scheme", dest="cv_scheme", choices=["kfold", "loo"],
                   help="error-set cross-validation scheme")
    p.add_argument("--methods", help="comma-separated method subset")


def build_parser() -> _Parser:
    parser = _Parser(prog="bopi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the interval-containment self checks")
    _add_common(p)

    p = sub.add_parser("tune", help="tune (gamma, neighborhood) on a dataset")
    _add_common(p)
    _add_data_opts(p)
    p.add_argument("--variant", choices=["fixed", "adaptive"], help="neighborhood policy")

    p = sub.add_parser("evaluate", help="cross-validated method comparison on a CSV")
    _add_common(p)
    _add_data_opts(p)
    p.add_argument("--lhnpe-config", dest="lhnpe_config", help="tuned parameter file from 'bopi tune'")

    p = sub.add_parser("simulate", help="Monte Carlo benchmark on a synthetic process")
    _add_common(p)
    p.add_argument("--family", choices=["friedman1", "friedman2"], help="data generating process")
    p.add_argument("--n", type=int, help="sample size per iteration")
    p.add_argument("--n-sim", dest="n_sim", type=int, help="number of iterations")
    p.add_argument("--noise-sd", dest="noise_sd", type=float, help="noise standard deviation")
    p.add_argument("--betas", help="comma-separated content levels")
    p.add_argument("--gammas", help="comma-separated confidence levels")
    p.add_argument("--gamma", type=float, help="single confidence level")
    p.add_argument("--k-loess", dest="k_loess", type=int)
    p.add_argument("--k-fixed", dest="k_fixed", type=int)
    p.add_argument("--k-min", dest="k_min", type=int)
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--cv-folds", dest="cv_folds", type=int)
    p.add_argument("--methods", help="comma-separated subset of conventional,f-bopi,a-bopi")
    p.add_argument("--threads", type=int, help="parallel iterations (BOPI_THREADS also works)")
    return parser


def _parse_floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v != ""]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _parse_ints(text):
    try:
        return [int(v) for v in str(text).split(",") if v != ""]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def merged_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise UsageError(f"malformed config file: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a mapping")
        cfg.update(loaded)
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        cfg[key] = value
    if isinstance(cfg.get("betas"), str):
        cfg["betas"] = _parse_floats(cfg["betas"])
    elif isinstance(cfg.get("betas"), (int, float)):
        cfg["betas"] = [float(cfg["betas"])]
    if isinstance(cfg.get("gammas"), str):
        cfg["gammas"] = _parse_floats(cfg["gammas"])
    elif isinstance(cfg.get("gammas"), (int, float)):
        cfg["gammas"] = [float(cfg["gammas"])]
    if isinstance(cfg.get("k_grid"), str):
        cfg["k_grid"] = _parse_ints(cfg["k_grid"])
    if isinstance(cfg.get("methods"), str):
        cfg["methods"] = [m.strip() for m in cfg["methods"].split(",") if m.strip()]
    for prob_key in ("betas", "gammas"):
        for v in cfg.get(prob_key) or []:
            if not 0.0 < float(v) < 1.0:
                raise UsageError(f"{prob_key} entries must lie in (0, 1), got {v}")
    if "gamma" in cfg and cfg["gamma"] is not None and not 0.0 < float(cfg["gamma"]) < 1.0:
        raise UsageError(f"gamma must lie in (0, 1), got {cfg['gamma']}")
    return cfg


# ---------------------------------------------------------------------------
# Canonical writers
# ---------------------------------------------------------------------------

def _format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, rows, columns):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_value(row[c]) for c in columns])


def write_json(path: Path, payload):
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"not serializable: {type(o)}")

    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=default) + "\n")


def _outdir(cfg) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_verify(cfg) -> int:
    out = _outdir(cfg)
    table = check_containment_table()
    grid = check_containment_grid()
    rows = [
        {
            "check": "containment-table",
            "gamma": c.gamma,
            "beta": c.beta,
            "n": c.n,
            "ratio": c.ratio,
            "expect_contained": c.expect_contained,
            "passed": c.passed,
        }
        for c in table.cells
    ]
    write_csv(
        out / "verify_cells.csv",
        rows,
        ["check", "gamma", "beta", "n", "ratio", "expect_contained", "passed"],
    )
    payload = {
        "containment_table": {
            "passed": table.passed,
            "cells_checked": len(table.cells),
            "failures": [
                {"gamma": c.gamma, "beta": c.beta, "n": c.n, "ratio": c.ratio}
                for c in table.failures
            ],
        },
        "containment_grid": {
            "passed": grid.passed,
            "ratios_checked": grid.n_checked,
            "violations": grid.violations[:100],
            "min_ratio": grid.min_ratio,
            "min_ratio_at": list(grid.min_ratio_at),
        },
    }
    write_json(out / "verify_report.json", payload)
    print(f"containment-table: {'PASS' if table.passed else 'FAIL'} ({len(table.cells)} cells)")
    print(
        f"containment-grid: {'PASS' if grid.passed else 'FAIL'} "
        f"({grid.n_checked} ratios, min {grid.min_ratio:.6f} at {grid.min_ratio_at})"
    )
    return EXIT_OK if table.passed and grid.passed else EXIT_VERIFY


def _load_dataset(cfg) -> Dataset:
    if not cfg.get("dataset"):
        raise UsageError("a dataset CSV must be given (--dataset or config key)")
    if not cfg.get("response"):
        raise UsageError("a response column must be given (--response or config key)")
    path = Path(cfg["dataset"])
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    try:
        frame = pd.read_csv(path)
    except Exception as exc:
        raise DataError(f"malformed CSV {path}: {exc}") from exc
    ds = encode_dataset(frame, cfg["response"])
    if ds.n_dropped_rows:
        print(f"dropped {ds.n_dropped_rows} rows with missing values")
    return ds


def _resolve_k_loess(cfg, ds: Dataset) -> int:
    if cfg.get("k_loess"):
        return int(cfg["k_loess"])
    grid = cfg.get("k_grid")
    if not grid:
        raise UsageError("either k_loess or k_grid must be configured")
    k = select_bandwidth(ds, [int(v) for v in grid], folds=int(cfg["cv_folds"]), seed=int(cfg["seed"]))
    print(f"selected k_loess={k} by {cfg['cv_folds']}-fold cross-validation")
    return k


def cmd_tune(cfg) -> int:
    out = _outdir(cfg)
    ds = _load_dataset(cfg)
    k_loess = _resolve_k_loess(cfg, ds)
    model = LoessModel(ds, k_loess)
    errors = cv_prediction_errors(
        model,
        scheme=cfg.get("cv_scheme", "kfold"),
        folds=int(cfg["cv_folds"]),
        seed=int(cfg["seed"]),
    )
    betas = [float(b) for b in cfg["betas"]]
    results = {}
    for beta in betas:
        result = tune_hyperparams(
            model,
            beta,
            variant=cfg["variant"],
            scheme=cfg.get("cv_scheme", "kfold"),
            folds=int(cfg["cv_folds"]),
            seed=int(cfg["seed"]),
            error_set=errors,
        )
        entry = {
            "variant": cfg["variant"],
            "gamma": result.config.gamma,
            "feasible": result.feasible,
            "training_coverage": result.coverage,
            "training_mis": result.mis,
        }
        if cfg["variant"] == "fixed":
            entry["k_fixed"] = result.config.k
        else:
            entry["k_min"] = result.config.k_min
            entry["k_max"] = result.config.k_max
        results[str(beta)] = entry
        flag = "" if result.feasible else " (coverage constraint not met; widest fallback)"
        print(f"beta={beta}: {entry}{flag}")
    payload = {"k_loess": k_loess, "lhnpe": results}
    with open(out / "tuned_config.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(payload, fh, sort_keys=True)
    write_json(out / "tuned_config.json", payload)
    return EXIT_OK


def _independent_columns(X) -> np.ndarray:
    """Indices of a maximal feature subset independent of the intercept
    and of each other (greedy, in column order).

    Full one-hot encodings are collinear with the intercept, so the OLS
    baseline fits on this reduced design.
    """
    n = X.shape[0]
    basis = [np.full(n, 1.0 / np.sqrt(n))]
    keep = []
    for j in range(X.shape[1]):
        col = X[:, j].astype(float)
        resid = col - sum((b @ col) * b for b in basis)
        norm = np.linalg.norm(resid)
        if norm > 1e-8 * max(np.linalg.norm(col), 1.0):
            basis.append(resid / norm)
            keep.append(j)
    return np.asarray(keep, dtype=int)


def _fold_state(cfg, ds, train_idx, test_idx, seed):
    """Fit everything a fold needs once; bands per beta reuse it."""
    train = Dataset(ds.features[train_idx], ds.response[train_idx], ds.feature_names)
    queries = ds.features[test_idx]
    k_loess = min(int(cfg["_k_loess"]), train.n)
    model = LoessModel(train, k_loess)
    es = cv_prediction_errors(
        model, scheme=cfg.get("cv_scheme", "kfold"), folds=int(cfg["cv_folds"]), seed=seed
    )
    ols_model = None
    ols_keep = None
    if "ols" in cfg["methods"]:
        ols_keep = _independent_columns(train.features)
        if ols_keep.size == 0:
            raise DataError("no usable feature columns for the OLS baseline")
        sub = Dataset(
            train.features[:, ols_keep],
            train.response,
            tuple(train.feature_names[j] for j in ols_keep),
        )
        ols_model = fit_ols(sub)
    return {
        "model": model,
        "es": es,
        "queries": queries,
        "test_idx": test_idx,
        "k_loess": k_loess,
        "ols_model": ols_model,
        "ols_keep": ols_keep,
    }


def _method_bands(cfg, state):
    model, es, queries = state["model"], state["es"], state["queries"]
    k_loess = state["k_loess"]
    bands = {}
    for method in cfg["methods"]:
        if method == "conventional":
            bands[method] = conventional_band(model, es, queries, cfg["_beta"])
        elif method == "f-bopi":
            fixed = FixedNeighborhood(min(int(cfg["k_fixed"]), k_loess), float(cfg["gamma"]))
            bands[method] = f_bopi_band(model, es, queries, cfg["_beta"], fixed)
        elif method == "a-bopi":
            # Clamp configured bounds to the regression bandwidth in use,
            # keeping the window well ordered.
            k_hi = min(int(cfg["k_max"]), k_loess)
            k_lo = min(int(cfg["k_min"]), k_hi)
            adaptive = AdaptiveNeighborhood(k_lo, k_hi, float(cfg["gamma"]))
            bands[method], _ = a_bopi_band(model, es, queries, cfg["_beta"], adaptive)
        elif method == "ols":
            bands[method] = ols_band(
                state["ols_model"], queries[:, state["ols_keep"]], cfg["_beta"]
            )
        else:
            raise UsageError(f"unknown method {method!r}")
    return bands


def cmd_evaluate(cfg) -> int:
    out = _outdir(cfg)
    if cfg.get("lhnpe_config"):
        path = Path(cfg["lhnpe_config"])
        if not path.exists():
            raise UsageError(f"tuned parameter file not found: {path}")
        tuned = yaml.safe_load(path.read_text()) or {}
        if "k_loess" in tuned and not cfg.get("k_loess"):
            cfg["k_loess"] = tuned["k_loess"]
        cfg["_tuned_lhnpe"] = tuned.get("lhnpe", {})
    ds = _load_dataset(cfg)
    for m in cfg["methods"]:
        if m not in EVALUATE_METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {EVALUATE_METHODS}")
    cfg["_k_loess"] = _resolve_k_loess(cfg, ds)

    folds = int(cfg["cv_folds"])
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(cfg["seed"]))))
    perm = rng.permutation(ds.n)
    assignment = np.empty(ds.n, dtype=int)
    for f, chunk in enumerate(np.array_split(perm, folds)):
        assignment[chunk] = f

    dataset_name = Path(cfg["dataset"]).stem
    states = []
    for f in range(folds):
        test_idx = np.flatnonzero(assignment == f)
        train_idx = np.flatnonzero(assignment != f)
        states.append(_fold_state(cfg, ds, train_idx, test_idx, seed=int(cfg["seed"]) + f + 1))

    all_rows = []
    for beta in [float(b) for b in cfg["betas"]]:
        tuned = cfg.get("_tuned_lhnpe", {}).get(str(beta))
        if tuned:
            cfg["gamma"] = tuned.get("gamma", cfg["gamma"])
            cfg["k_fixed"] = tuned.get("k_fixed", cfg["k_fixed"])
            cfg["k_min"] = tuned.get("k_min", cfg["k_min"])
            cfg["k_max"] = tuned.get("k_max", cfg["k_max"])
        cfg["_beta"] = beta
        lowers = {m: np.empty(ds.n) for m in cfg["methods"]}
        uppers = {m: np.empty(ds.n) for m in cfg["methods"]}
        for state in states:
            bands = _method_bands(cfg, state)
            for m, band in bands.items():
                lowers[m][state["test_idx"]] = band.lower
                uppers[m][state["test_idx"]] = band.upper
        full_bands = {m: IntervalBand(lowers[m], uppers[m]) for m in cfg["methods"]}
        reports = summarize_methods(full_bands, ds.response, beta)
        for r in reports:
            all_rows.append(
                {
                    "dataset": dataset_name,
                    "method": r.method,
                    "beta": r.beta,
                    "coverage": r.coverage,
                    "mis": r.mis,
                    "sigma_is": r.sigma_is,
                    "wilson_critical": r.wilson_critical,
                    "reliable": r.reliable,
                    "egsd": r.egsd,
                    "egsd_normalized": r.egsd_normalized,
                    "stars": r.stars,
                }
            )
    columns = [
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
    all_rows.sort(key=lambda r: (r["beta"], r["method"]))
    write_csv(out / "report.csv", all_rows, columns)
    write_json(out / "report.json", {"rows": all_rows})
    for row in all_rows:
        print(
            f"beta={row['beta']}: {row['method']:<12} coverage={row['coverage']:.4f} "
            f"mis={row['mis']:.4g} reliable={row['reliable']} stars={row['stars']!r}"
        )
    return EXIT_OK


def cmd_simulate(cfg) -> int:
    out = _outdir(cfg)
    betas = [float(b) for b in cfg["betas"]]
    gammas = cfg.get("gammas")
    if gammas is None:
        gammas = [float(cfg["gamma"])]
    gammas = [float(g) for g in gammas]
    methods = [m for m in cfg["methods"] if m != "ols"]
    hyper = SimHyper(
        k_loess=int(cfg["k_loess"] or 100),
        k_fixed=int(cfg["k_fixed"]),
        k_min=int(cfg["k_min"]),
        k_max=int(cfg["k_max"]),
        cv_folds=int(cfg["cv_folds"]),
    )
    noise = cfg.get("noise_sd")
    dgp = DgpSpec(cfg["family"], int(cfg["n"]), None if noise is None else float(noise))
    threads = cfg.get("threads")
    result = run_simulation(
        dgp,
        int(cfg["n_sim"]),
        betas,
        gammas,
        methods=methods,
        hyper=hyper,
        seed=int(cfg["seed"]),
        threads=None if threads is None else int(threads),
    )
    write_csv(
        out / "iterations.csv",
        result.iteration_rows(),
        ["iteration", "method", "beta", "gamma", "coverage", "mis"],
    )
    write_json(
        out / "aggregate.json",
        {
            "family": result.family,
            "n": result.n,
            "n_sim": result.n_sim,
            "seed": result.seed,
            "hyper": vars(hyper),
            "rows": result.aggregate_rows(),
        },
    )
    for (method, beta, gamma), series in sorted(result.series.items()):
        counts, edges = np.histogram(series.coverage, bins=20, range=(0.0, 1.0))
        centers = 0.5 * (edges[:-1] + edges[1:])
        rows = [
            {"coverage": c, "count": int(v)}
            for c, v in zip(centers, counts)
        ]
        name = f"coverage_hist_{method}_b{beta}_g{gamma}.csv"
        write_csv(out / name, rows, ["coverage", "count"])
    for row in result.aggregate_rows():
        print(
            f"{row['method']:<12} beta={row['beta']} gamma={row['gamma']}: "
            f"coverage {100 * row['coverage_mean']:.2f} (sd {100 * row['coverage_sd']:.2f}), "
            f"MIS {row['mis_mean']:.4g} (sd {row['mis_sd']:.3g})"
        )
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = merged_config(args)
        handler = {
            "verify": cmd_verify,
            "tune": cmd_tune,
            "evaluate": cmd_evaluate,
            "simulate": cmd_simulate,
        }[args.command]
        return handler(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DomainError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
