"""Batch command-line interface.

Commands: simulate | train | predict | benchmark | evaluate. Settings come
from a flat key=value config file plus repeatable --set overrides; unknown
keys are rejected and every key has a documented default. Identical config
and seed produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import benchmark as bench
from . import forest as forest_mod
from .data import CsvSchema, load_csv, save_csv
from .dgp import DgpConfig, generate
from .errors import (
    ConfigError,
    CsvParseError,
    DegenerateBandwidthError,
    DegenerateGpsError,
    DimensionMismatchError,
    DoseForestError,
    DoseRangeError,
    EmptyDatasetError,
    GridMismatchError,
    ModelFormatError,
    ModelVersionError,
    NoSupportError,
    SchemaError,
    TrainingError,
    UnsupportedKernelError,
)
from .forest import DoseForestParams
from .metrics import pehe, qini, rmse
from .nuisance import ForestParams
from .splitting import SplitConfig

log = logging.getLogger("doseforest")

EXIT_CODES = [
    (ConfigError, 2),
    (SchemaError, 3),
    (CsvParseError, 4),
    (EmptyDatasetError, 5),
    (DegenerateBandwidthError, 6),
    (UnsupportedKernelError, 7),
    (TrainingError, 8),
    (DegenerateGpsError, 9),
    (NoSupportError, 10),
    (DoseRangeError, 11),
    (GridMismatchError, 12),
    (DimensionMismatchError, 13),
    (ModelFormatError, 14),
    (ModelVersionError, 15),
]


def _exit_code(exc: Exception) -> int:
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    if isinstance(exc, OSError):
        return 16
    return 1


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _parse_optional_float(raw: str):
    return None if raw.strip() == "" else float(raw)


def _parse_optional_int(raw: str):
    return None if raw.strip() == "" else int(raw)


# key -> (default given as a string, parser, help)
_DATA_KEYS = {
    "data": ("", str, "input dataset CSV"),
    "outcome_col": ("y", str, "outcome column name"),
    "treatment_col": ("t", str, "treatment column name"),
    "covariate_cols": ("", str, "comma list of covariates; empty = all remaining"),
}

_MODEL_KEYS = {
    "num_trees": ("500", int, "trees in the forest"),
    "honesty_fraction": ("0.5", float, "share of rows that grow structure"),
    "min_node_size": ("50", int, "minimum rows per child, both halves"),
    "min_info_gain": ("0", float, "minimum split gain"),
    "mtry": ("0", int, "features per tree; 0 = ceil(sqrt(p))"),
    "metric": ("d2", str, "curve distance: d1 | d2 | dinf"),
    "zeta": ("0", float, "dose-variety regularizer weight"),
    "kernel": ("gaussian", str, "kernel family"),
    "bandwidth_policy": ("rot", str, "rot | cv | fixed"),
    "bandwidth": ("", _parse_optional_float, "bandwidth for policy=fixed"),
    "grid_size": ("10", int, "dose grid points"),
    "baseline": ("", _parse_optional_float, "baseline dose; empty = observed min"),
    "subsample_fraction": ("0.5", float, "per-tree subsample of the structure half"),
    "nuisance_trees": ("100", int, "trees in each nuisance forest"),
    "nuisance_min_node_size": ("5", int, "leaf size of the nuisance forests"),
    "nuisance_mtry": ("0", int, "nuisance features per split; 0 = ceil(p/3)"),
    "density_floor": ("0.001", float, "lower bound for the dose density"),
    "threshold_cap": ("32", int, "max candidate thresholds per feature on big nodes"),
}

_DGP_KEYS = {
    "kind": ("poly", str, "dose-response shape: poly | exp | sinus"),
    "n": ("1000", int, "rows per dataset"),
    "p_x": ("50", int, "observed covariates"),
    "p_u": ("5", int, "latent outcome covariates"),
    "p_z": ("5", int, "latent treatment covariates"),
    "noise": ("uniform", str, "noise law: uniform | gaussian"),
    "randomized_treatments": ("false", _parse_bool, "redraw doses uniformly"),
}

COMMAND_KEYS = {
    "simulate": {**_DGP_KEYS},
    "train": {**_DATA_KEYS, **_MODEL_KEYS, "model_out": ("model.json", str, "model file")},
    "predict": {
        "model": ("", str, "trained model file"),
        **_DATA_KEYS,
        "predictions_out": ("predictions.csv", str, "output CSV"),
    },
    "benchmark": {
        **_DGP_KEYS,
        **_MODEL_KEYS,
        "reps": ("2", int, "simulation repetitions"),
        "methods": ("gcf,rf,global_dr,oracle", str, "comma list of methods"),
        "rf_trees": ("100", int, "trees of the rf baseline"),
        "rf_min_node_size": ("50", int, "leaf size of the rf baseline"),
    },
    "evaluate": {
        "predictions": ("", str, "CSV with row,cate columns"),
        "truth": ("", str, "truth CSV from simulate (row,t,y,cate_true)"),
        "qini_thresholds": ("median", str, "comma list of dose cuts, or 'median'"),
    },
}


def parse_config_file(path: str) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
            key, _, value = stripped.partition("=")
            values[key.strip()] = value.strip()
    return values


def resolve_settings(command: str, args) -> dict:
    keys = COMMAND_KEYS[command]
    raw = {k: default for k, (default, _, _) in keys.items()}
    file_values = parse_config_file(args.config) if args.config else {}
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    for source in (file_values, overrides):
        for key, value in source.items():
            if key not in keys:
                raise ConfigError(
                    f"unknown key '{key}' for {command}; valid keys: {', '.join(sorted(keys))}"
                )
            raw[key] = value
    out = {}
    for key, value in raw.items():
        parser = keys[key][1]
        try:
            out[key] = parser(value)
        except ConfigError:
            raise
        except ValueError:
            raise ConfigError(f"bad value for '{key}': {value!r}") from None
    return out


def _schema_from(settings: dict) -> CsvSchema:
    cov = settings["covariate_cols"].strip()
    return CsvSchema(
        outcome=settings["outcome_col"],
        treatment=settings["treatment_col"],
        covariates=tuple(c.strip() for c in cov.split(",")) if cov else None,
    )


def _forest_params(settings: dict, seed: int, threads: int) -> DoseForestParams:
    return DoseForestParams(
        num_trees=settings["num_trees"],
        honesty_fraction=settings["honesty_fraction"],
        split=SplitConfig(
            metric=settings["metric"],
            zeta=settings["zeta"],
            min_node_size=settings["min_node_size"],
            min_info_gain=settings["min_info_gain"],
            mtry=settings["mtry"] or None,
            threshold_cap=settings["threshold_cap"],
        ),
        kernel_family=settings["kernel"],
        bandwidth_policy=settings["bandwidth_policy"],
        bandwidth=settings["bandwidth"],
        grid_size=settings["grid_size"],
        baseline=settings["baseline"],
        subsample_fraction=settings["subsample_fraction"],
        nuisance=ForestParams(
            num_trees=settings["nuisance_trees"],
            min_node_size=settings["nuisance_min_node_size"],
            mtry=settings["nuisance_mtry"] or None,
        ),
        density_floor=settings["density_floor"],
        seed=seed,
        threads=threads,
    )


def _dgp_config(settings: dict, seed: int) -> DgpConfig:
    return DgpConfig(
        n=settings["n"],
        p_x=settings["p_x"],
        p_u=settings["p_u"],
        p_z=settings["p_z"],
        drf_kind=settings["kind"],
        seed=seed,
        randomized_test_treatments=settings["randomized_treatments"],
        noise=settings["noise"],
    )


def _out_path(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def cmd_simulate(args) -> int:
    settings = resolve_settings("simulate", args)
    sim = generate(_dgp_config(settings, args.seed))
    data_path = _out_path(args, "data.csv")
    truth_path = _out_path(args, "truth.csv")
    save_csv(sim.dataset, data_path)
    t0 = sim.dataset.t_min
    cate = sim.truth(sim.dataset.t, t0)
    with open(truth_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "t", "y", "cate_true"])
        for i in range(sim.dataset.n):
            writer.writerow(
                [
                    i,
                    repr(float(sim.dataset.t[i])),
                    repr(float(sim.dataset.y[i])),
                    repr(float(cate[i])),
                ]
            )
    print(f"wrote {data_path} and {truth_path} (n={sim.dataset.n}, "
          f"dose range [{sim.dataset.t_min:.4g}, {sim.dataset.t_max:.4g}])")
    return 0


def cmd_train(args) -> int:
    settings = resolve_settings("train", args)
    if not settings["data"]:
        raise ConfigError("train needs data=<csv path>")
    d = load_csv(settings["data"], _schema_from(settings))
    params = _forest_params(settings, args.seed, args.threads)
    model = forest_mod.train(d, params)
    model_path = _out_path(args, settings["model_out"])
    forest_mod.save(model, model_path)
    depths = model.depth_stats()
    print(
        f"trained {len(model.trees)} trees on n={d.n} "
        f"(depth min/mean/max {depths['min']}/{depths['mean']:.2f}/{depths['max']}, "
        f"dose range [{d.t_min:.6g}, {d.t_max:.6g}], "
        f"bandwidth {model.kernel.bandwidth:.6g}); model -> {model_path}"
    )
    return 0


def cmd_predict(args) -> int:
    settings = resolve_settings("predict", args)
    if not settings["model"] or not settings["data"]:
        raise ConfigError("predict needs model=<file> and data=<csv path>")
    model = forest_mod.load(settings["model"])
    d = load_csv(settings["data"], _schema_from(settings))
    curves, _ = model.predict_curve_batch(d.x)
    pts = model.grid.points
    # effect at each row's own dose, clipped into the trained range
    own = model.predict_cate_batch(d.x, np.clip(d.t, pts[0], pts[-1]))
    out = _out_path(args, settings["predictions_out"])
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "cate"] + [repr(float(t)) for t in pts])
        for i in range(d.n):
            writer.writerow(
                [i, repr(float(own[i]))] + [repr(float(v)) for v in curves[i]]
            )
    print(f"wrote {out} ({d.n} rows, {model.grid.size} grid doses)")
    return 0


def cmd_benchmark(args) -> int:
    settings = resolve_settings("benchmark", args)
    methods = tuple(m.strip() for m in settings["methods"].split(",") if m.strip())
    report = bench.run_benchmark(
        _dgp_config(settings, args.seed),
        reps=settings["reps"],
        methods=methods,
        forest_params=_forest_params(settings, args.seed, threads=1),
        rf_params=ForestParams(
            num_trees=settings["rf_trees"],
            min_node_size=settings["rf_min_node_size"],
        ),
        threads=args.threads,
    )
    report_path = _out_path(args, "report.csv")
    adrf_path = _out_path(args, "adrf.csv")
    bench.write_report_csv(report, report_path)
    bench.write_adrf_csv(report, adrf_path)
    for row in report.rows:
        se = "" if row.se is None else f" (se {row.se:.3g})"
        print(f"{row.method} {row.metric}: {row.mean:.4g}{se}")
    print(f"wrote {report_path} and {adrf_path}")
    return 0


def _read_columns(path: str, wanted: list) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in wanted if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        cols = {c: [] for c in wanted}
        for row in reader:
            for c in wanted:
                cols[c].append(float(row[c]))
    return {c: np.asarray(v) for c, v in cols.items()}


def cmd_evaluate(args) -> int:
    settings = resolve_settings("evaluate", args)
    if not settings["predictions"] or not settings["truth"]:
        raise ConfigError("evaluate needs predictions=<csv> and truth=<csv>")
    pred = _read_columns(settings["predictions"], ["cate"])["cate"]
    truth_cols = _read_columns(settings["truth"], ["t", "y", "cate_true"])
    if pred.size != truth_cols["cate_true"].size:
        raise ConfigError(
            f"length mismatch: {pred.size} predictions vs "
            f"{truth_cols['cate_true'].size} truth rows"
        )
    rows = [
        ("pehe", pehe(pred, truth_cols["cate_true"])),
        ("rmse", rmse(pred, truth_cols["cate_true"])),
    ]
    t = truth_cols["t"]
    if settings["qini_thresholds"].strip() == "median":
        thresholds = [float(np.median(t))]
    else:
        thresholds = [float(v) for v in settings["qini_thresholds"].split(",")]
    for thr in thresholds:
        rows.append(
            (f"qini@t>{thr:.6g}", qini(pred, truth_cols["y"], t > thr))
        )
    out = _out_path(args, "metrics.csv")
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for name, value in rows:
            writer.writerow([name, repr(float(value))])
    for name, value in rows:
        print(f"{name}: {value:.6g}")
    print(f"wrote {out}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "predict": cmd_predict,
    "benchmark": cmd_benchmark,
    "evaluate": cmd_evaluate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doseforest",
        description="Honest causal forest for continuous treatments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"{name} (keys: {', '.join(sorted(COMMAND_KEYS[name]))})")
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument(
            "--set", action="append", metavar="KEY=VALUE", help="override one config key"
        )
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1, help="0 = all cores")
        p.add_argument("--out-dir", default=".", help="directory for output files")
        p.add_argument("--verbose", action="store_true", help="per-tree / per-rep progress")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except DoseForestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 16


if __name__ == "__main__":
    sys.exit(main())
