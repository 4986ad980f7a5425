"""Benchmark orchestration: simulated datasets, baselines, and report tables."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace

import numpy as np

from ._util import parallel_map
from .data import Dataset, TreatmentGrid, treatment_grid
from .dgp import DgpConfig, SimData, generate
from .dr import DrfCurve, node_cate, node_drf
from .errors import ConfigError
from .forest import DoseForestModel, DoseForestParams, train
from .kernels import KernelSpec, bandwidth_rot
from .metrics import pehe, rmse
from .nuisance import ForestParams, NuisancePair, fit_gps, fit_outcome, fit_regression_forest

log = logging.getLogger(__name__)

METHODS = ("gcf", "rf", "global_dr", "oracle")

_SEED_RF = 5_000_003
_SEED_GLOBAL = 6_000_003


class RfBaseline:
    """Regression forest on (x ⊕ t); effects are prediction differences."""

    def __init__(self, d: Dataset, params: ForestParams, baseline: float):
        feats = np.column_stack([d.x, d.t])
        self.forest = fit_regression_forest(feats, d.y, params)
        self.baseline = float(baseline)

    def mean_at(self, x: np.ndarray, t) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        t_col = np.broadcast_to(np.asarray(t, dtype=np.float64), (x.shape[0],))
        return self.forest.predict(np.column_stack([x, t_col]))

    def cate_at(self, x: np.ndarray, t) -> np.ndarray:
        return self.mean_at(x, t) - self.mean_at(x, self.baseline)


def baseline_rf(d: Dataset, grid: TreatmentGrid, params: ForestParams) -> RfBaseline:
    return RfBaseline(d, params, grid.baseline)


def baseline_global_dr(
    d: Dataset, grid: TreatmentGrid, nuisances: NuisancePair, spec: KernelSpec
) -> DrfCurve:
    """Kernel doubly robust dose-response over the full sample (no tree)."""
    return node_drf(d, np.arange(d.n), grid, nuisances, spec)


@dataclass(frozen=True)
class MetricRow:
    method: str
    metric: str
    mean: float
    se: float | None
    reps: int


@dataclass
class BenchmarkReport:
    methods: tuple
    rows: list
    doses: np.ndarray  # report dose axis
    adrf_truth: np.ndarray  # median of per-rep truth curves
    adrf: dict  # method -> {"median": (G,), "q025": (G,), "q975": (G,)}
    per_rep: dict  # (method, metric) -> list of per-rep values
    seeds: list
    realized_ranges: list

    def mean_of(self, method: str, metric: str) -> float:
        return float(np.mean(self.per_rep[(method, metric)]))


def _rep_seed(cfg: DgpConfig, rep: int) -> int:
    return cfg.seed + rep


def _global_dr_curve(
    d: Dataset, grid: TreatmentGrid, nuisance_params: ForestParams, density_floor: float
) -> DrfCurve:
    nuis = NuisancePair.from_models(
        fit_outcome(d, nuisance_params),
        fit_gps(d, replace(nuisance_params, seed=nuisance_params.seed + 1), density_floor),
    )
    spec = KernelSpec("gaussian", bandwidth_rot(d.t))
    return baseline_global_dr(d, grid, nuis, spec)


def _run_rep(
    rep: int,
    cfg: DgpConfig,
    methods: tuple,
    forest_params: DoseForestParams,
    rf_params: ForestParams,
    report_doses: np.ndarray,
) -> dict:
    seed_r = _rep_seed(cfg, rep)
    train_sim = generate(replace(cfg, seed=seed_r, randomized_test_treatments=False))
    test_sim = generate(replace(cfg, seed=seed_r, randomized_test_treatments=True))
    d = train_sim.dataset
    grid = treatment_grid(d, forest_params.grid_size, forest_params.baseline)
    t0 = grid.baseline

    # per-row evaluation doses: the randomized test doses, clipped into the
    # trained dose range (test redraws stay inside it by construction)
    te = np.clip(test_sim.dataset.t, grid.points[0], grid.points[-1])
    truth = test_sim.truth(te, t0)
    doses = np.clip(report_doses, grid.points[0], grid.points[-1])

    out = {"seed": seed_r, "range": (d.t_min, d.t_max), "pred": {}, "adrf": {}}
    x_test = test_sim.dataset.x
    for method in methods:
        if method == "gcf":
            model = train(d, replace(forest_params, seed=seed_r, threads=1))
            curves, _ = model.predict_curve_batch(x_test)
            mean_curve = curves.mean(axis=0)
            out["pred"][method] = model.predict_cate_batch(x_test, te)
            out["adrf"][method] = (
                np.interp(doses, model.grid.points, mean_curve) + model.baseline_offset
            )
        elif method == "rf":
            rf = baseline_rf(d, grid, replace(rf_params, seed=seed_r + _SEED_RF))
            out["pred"][method] = rf.mean_at(x_test, te) - rf.mean_at(x_test, t0)
            out["adrf"][method] = np.array(
                [float(np.mean(rf.mean_at(x_test, dose))) for dose in doses]
            )
        elif method == "global_dr":
            curve = _global_dr_curve(
                d,
                grid,
                replace(forest_params.nuisance, seed=seed_r + _SEED_GLOBAL),
                forest_params.density_floor,
            )
            cate = node_cate(curve)
            out["pred"][method] = np.interp(te, grid.points, cate.values)
            out["adrf"][method] = np.interp(doses, grid.points, curve.values)
        elif method == "oracle":
            out["pred"][method] = truth.copy()
            out["adrf"][method] = test_sim.adrf_truth(doses)
        else:
            raise ConfigError(f"unknown method '{method}'; choose from {METHODS}")
    out["truth"] = truth
    out["adrf_truth"] = test_sim.adrf_truth(doses)
    return out


def run_benchmark(
    cfg: DgpConfig,
    reps: int,
    methods=METHODS,
    forest_params: DoseForestParams | None = None,
    rf_params: ForestParams | None = None,
    threads: int = 1,
) -> BenchmarkReport:
    """Repeated simulate/fit/score runs; fresh seed per rep.

    Any rep failure propagates with the failing seed in the message.
    """
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method '{m}'; choose from {METHODS}")
    if forest_params is None:
        forest_params = DoseForestParams()
    if rf_params is None:
        rf_params = ForestParams(num_trees=100, min_node_size=50)

    # a common dose axis for the report, from the first rep's training range
    first = generate(replace(cfg, seed=_rep_seed(cfg, 0), randomized_test_treatments=False))
    report_doses = treatment_grid(
        first.dataset, forest_params.grid_size, forest_params.baseline
    ).points

    def run(rep: int) -> dict:
        try:
            result = _run_rep(rep, cfg, methods, forest_params, rf_params, report_doses)
        except Exception as exc:
            exc.args = (f"rep {rep} (seed {_rep_seed(cfg, rep)}) failed: {exc}",)
            raise
        log.info("rep %d/%d done (seed %d)", rep + 1, reps, _rep_seed(cfg, rep))
        return result

    results = parallel_map(run, range(reps), threads)

    per_rep: dict = {}
    for method in methods:
        for metric, fn in (("pehe", pehe), ("rmse", rmse)):
            per_rep[(method, metric)] = [
                fn(r["pred"][method], r["truth"]) for r in results
            ]
    rows = []
    for (method, metric), vals in per_rep.items():
        arr = np.asarray(vals)
        se = float(np.std(arr, ddof=1) / np.sqrt(reps)) if reps > 1 else None
        rows.append(MetricRow(method, metric, float(arr.mean()), se, reps))

    adrf = {}
    for method in methods:
        mat = np.vstack([r["adrf"][method] for r in results])
        adrf[method] = {
            "median": np.percentile(mat, 50.0, axis=0),
            "q025": np.percentile(mat, 2.5, axis=0),
            "q975": np.percentile(mat, 97.5, axis=0),
        }
    truth_mat = np.vstack([r["adrf_truth"] for r in results])
    return BenchmarkReport(
        methods=methods,
        rows=rows,
        doses=report_doses,
        adrf_truth=np.percentile(truth_mat, 50.0, axis=0),
        adrf=adrf,
        per_rep=per_rep,
        seeds=[r["seed"] for r in results],
        realized_ranges=[r["range"] for r in results],
    )


def write_report_csv(report: BenchmarkReport, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "metric", "mean", "se", "reps"])
        for row in report.rows:
            writer.writerow(
                [
                    row.method,
                    row.metric,
                    repr(row.mean),
                    "" if row.se is None else repr(row.se),
                    row.reps,
                ]
            )


def write_adrf_csv(report: BenchmarkReport, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "t", "truth", "median", "q025", "q975"])
        for method in report.methods:
            stats = report.adrf[method]
            for g, dose in enumerate(report.doses):
                writer.writerow(
                    [
                        method,
                        repr(float(dose)),
                        repr(float(report.adrf_truth[g])),
                        repr(float(stats["median"][g])),
                        repr(float(stats["q025"][g])),
                        repr(float(stats["q975"][g])),
                    ]
                )
