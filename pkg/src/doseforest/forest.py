"""Honest dose-response forest: training, prediction, serialization.

Training splits the data into a structure half (grows trees, fits nuisance
models) and an estimation half (fills leaf effect curves), so leaf estimates
never reuse the responses that shaped the tree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._trees import depth_of, route
from ._util import parallel_map
from .data import Dataset, HonestSplit, TreatmentGrid, honest_split, treatment_grid
from .dr import CateCurve, pseudo_matrix
from .errors import (
    ConfigError,
    DegenerateGpsError,
    DimensionMismatchError,
    DoseRangeError,
    ModelFormatError,
    ModelVersionError,
)
from .kernels import KernelSpec, bandwidth_cv, bandwidth_rot
from .nuisance import ForestParams, NuisancePair, fit_gps, fit_outcome, gps_variance
from .splitting import SplitConfig, SplitContext

FORMAT_MARKER = "doseforest.model"
FORMAT_VERSION = 1

# fixed offsets so the nuisance forests, the honest split, and the trees draw
# from non-overlapping seed ranges
_SEED_OUTCOME = 1_000_003
_SEED_GPS = 2_000_003
_SEED_TREES = 3_000_003

BANDWIDTH_POLICIES = ("rot", "cv", "fixed")


@dataclass(frozen=True)
class DoseForestParams:
    num_trees: int = 500
    honesty_fraction: float = 0.5
    split: SplitConfig = field(default_factory=SplitConfig)
    kernel_family: str = "gaussian"
    bandwidth_policy: str = "rot"
    bandwidth: float | None = None  # required for policy "fixed"
    grid_size: int = 10
    baseline: float | None = None  # None -> observed dose minimum
    subsample_fraction: float = 0.5
    nuisance: ForestParams = field(default_factory=ForestParams)
    gps_forest: ForestParams | None = None  # None -> same as nuisance
    density_floor: float = 1e-3
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.num_trees < 1:
            raise ConfigError("num_trees must be >= 1")
        if not 0.0 < self.honesty_fraction < 1.0:
            raise ConfigError("honesty_fraction must be in (0, 1)")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ConfigError("subsample_fraction must be in (0, 1]")
        if self.bandwidth_policy not in BANDWIDTH_POLICIES:
            raise ConfigError(
                f"bandwidth_policy must be one of {BANDWIDTH_POLICIES}"
            )
        if self.bandwidth_policy == "fixed" and (
            self.bandwidth is None or self.bandwidth <= 0.0
        ):
            raise ConfigError("fixed bandwidth policy needs a positive bandwidth")
        if self.grid_size < 2:
            raise ConfigError("grid_size must be >= 2")
        if self.density_floor <= 0.0:
            raise ConfigError("density_floor must be positive")


@dataclass
class Tree:
    """One grown tree: routing arrays plus per-leaf estimation payload."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_id: np.ndarray  # index into the leaf arrays, -1 on internal nodes
    leaf_values: np.ndarray  # (n_leaves, G) effect curves, 0 at the baseline
    leaf_baseline: np.ndarray  # (n_leaves,) dose-response level at the baseline
    leaf_members: list  # estimation-half row indices per leaf

    def depth(self) -> int:
        return depth_of(self.feature, self.left, self.right)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "leaf_id": self.leaf_id.tolist(),
            "leaf_values": [row.tolist() for row in self.leaf_values],
            "leaf_baseline": self.leaf_baseline.tolist(),
            "leaf_members": [m.tolist() for m in self.leaf_members],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.intp),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.intp),
            right=np.asarray(d["right"], dtype=np.intp),
            leaf_id=np.asarray(d["leaf_id"], dtype=np.intp),
            leaf_values=np.asarray(d["leaf_values"], dtype=np.float64),
            leaf_baseline=np.asarray(d["leaf_baseline"], dtype=np.float64),
            leaf_members=[np.asarray(m, dtype=np.intp) for m in d["leaf_members"]],
        )


@dataclass
class DoseForestModel:
    trees: list
    nuisances: NuisancePair
    grid: TreatmentGrid
    kernel: KernelSpec
    params: DoseForestParams
    baseline_offset: float  # estimation-half mean dose-response level at the baseline
    p: int

    def predict_curve_batch(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(n, G) effect curves and (n,) baseline levels, averaged over trees."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.p:
            raise DimensionMismatchError(
                f"expected {self.p} covariates, got {x.shape[1]}"
            )
        values = np.zeros((x.shape[0], self.grid.size))
        base = np.zeros(x.shape[0])
        for tree in self.trees:
            leaf = tree.leaf_id[route(tree.feature, tree.threshold, tree.left, tree.right, x)]
            values += tree.leaf_values[leaf]
            base += tree.leaf_baseline[leaf]
        b = float(len(self.trees))
        return values / b, base / b

    def predict_curve(self, x: np.ndarray) -> CateCurve:
        values, base = self.predict_curve_batch(x)
        return CateCurve(grid=self.grid, values=values[0], baseline_value=float(base[0]))

    def predict_cate_batch(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Effect at per-row doses, linearly interpolated between grid points."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        pts = self.grid.points
        if np.any(t < pts[0]) or np.any(t > pts[-1]):
            raise DoseRangeError(
                f"dose outside the supported range [{pts[0]}, {pts[-1]}]"
            )
        values, _ = self.predict_curve_batch(x)
        if t.size == 1 and values.shape[0] > 1:
            t = np.full(values.shape[0], t[0])
        j = np.clip(np.searchsorted(pts, t, side="right") - 1, 0, pts.size - 2)
        w = (t - pts[j]) / (pts[j + 1] - pts[j])
        rows = np.arange(values.shape[0])
        return values[rows, j] * (1.0 - w) + values[rows, j + 1] * w

    def predict_cate(self, x: np.ndarray, t: float) -> float:
        return float(self.predict_cate_batch(np.asarray(x)[None, :], float(t))[0])

    def depth_stats(self) -> dict:
        depths = [tree.depth() for tree in self.trees]
        return {
            "min": int(min(depths)),
            "mean": float(np.mean(depths)),
            "max": int(max(depths)),
        }


def _resolve_kernel(params: DoseForestParams, omega1: Dataset) -> KernelSpec:
    if params.bandwidth_policy == "fixed":
        h = float(params.bandwidth)
    elif params.bandwidth_policy == "rot":
        h = bandwidth_rot(omega1.t)
    else:  # cv on a log-spaced ladder around the rule-of-thumb value
        rot = bandwidth_rot(omega1.t)
        candidates = [rot * c for c in (0.125, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0)]
        h = bandwidth_cv(omega1.t, omega1.y, candidates, family=params.kernel_family)
    return KernelSpec(family=params.kernel_family, bandwidth=h)


def _grow_tree(
    tree_index: int,
    ctx: SplitContext,
    x: np.ndarray,
    omega1: np.ndarray,
    omega2: np.ndarray,
    params: DoseForestParams,
    mtry: int,
) -> Tree:
    rng = np.random.default_rng(params.seed + _SEED_TREES + tree_index)
    p = x.shape[1]
    # one feature set per tree, drawn before the growth loop
    feats = np.sort(rng.choice(p, size=mtry, replace=False))
    k = max(1, int(round(omega1.size * params.subsample_fraction)))
    sub = np.sort(rng.choice(omega1, size=k, replace=False))

    feature, threshold, left, right, leaf_id = [], [], [], [], []
    leaf_values, leaf_baseline, leaf_members = [], [], []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf_id.append(-1)
        return len(feature) - 1

    base = ctx.grid.baseline_index
    stack = [(new_node(), sub, omega2)]
    while stack:
        node_id, rows1, rows2 = stack.pop()
        split = None
        if rows2.size >= 2 * ctx.cfg.min_node_size:
            split = ctx.best_split(rows1, feats, est_node=rows2)
        if split is None:
            leaf_id[node_id] = len(leaf_values)
            drf = ctx.pseudo[rows2].mean(axis=0)
            leaf_baseline.append(float(drf[base]))
            leaf_values.append(drf - drf[base])
            leaf_members.append(rows2)
            continue
        go_left = x[rows2, split.feature_index] <= split.threshold
        feature[node_id] = split.feature_index
        threshold[node_id] = split.threshold
        left_id, right_id = new_node(), new_node()
        left[node_id] = left_id
        right[node_id] = right_id
        stack.append((right_id, split.right, rows2[~go_left]))
        stack.append((left_id, split.left, rows2[go_left]))
    return Tree(
        feature=np.asarray(feature, dtype=np.intp),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.intp),
        right=np.asarray(right, dtype=np.intp),
        leaf_id=np.asarray(leaf_id, dtype=np.intp),
        leaf_values=np.asarray(leaf_values, dtype=np.float64),
        leaf_baseline=np.asarray(leaf_baseline, dtype=np.float64),
        leaf_members=leaf_members,
    )


def train(
    d: Dataset,
    params: DoseForestParams,
    *,
    split: HonestSplit | None = None,
    nuisances: NuisancePair | None = None,
    kernel: KernelSpec | None = None,
    sigma_pi: float | None = None,
) -> DoseForestModel:
    """Grow an honest forest on d.

    split, nuisances, kernel, and sigma_pi are normally derived from the data
    and the seed; they can be injected for oracle experiments.
    """
    if not d.t_max > d.t_min:
        raise DegenerateGpsError(
            "weak positivity fails: observed treatment has zero spread"
        )
    if split is None:
        split = honest_split(d, params.honesty_fraction, params.seed)
    omega1_view = d.subset(split.omega1)
    if nuisances is None:
        gps_params = params.gps_forest if params.gps_forest is not None else params.nuisance
        nuisances = NuisancePair.from_models(
            fit_outcome(
                omega1_view,
                replace(
                    params.nuisance,
                    seed=params.seed + _SEED_OUTCOME,
                    threads=params.threads,
                ),
            ),
            fit_gps(
                omega1_view,
                replace(
                    gps_params,
                    min_node_size=min(gps_params.min_node_size, omega1_view.n),
                    seed=params.seed + _SEED_GPS,
                    threads=params.threads,
                ),
                density_floor=params.density_floor,
            ),
        )
    if kernel is None:
        kernel = _resolve_kernel(params, omega1_view)
    if sigma_pi is None:
        sigma_pi = (
            gps_variance(nuisances.gps, split.omega1)
            if nuisances.gps is not None
            else 0.0
        )
    grid = treatment_grid(d, params.grid_size, params.baseline)
    pseudo = pseudo_matrix(
        d.x, d.t, d.y, grid, nuisances, kernel, (d.t_min, d.t_max)
    )
    cfg = replace(params.split, mtry=params.split.resolve_mtry(d.p))
    ctx = SplitContext(d.x, pseudo, grid, sigma_pi, cfg)

    trees = parallel_map(
        lambda b: _grow_tree(b, ctx, d.x, split.omega1, split.omega2, params, cfg.mtry),
        range(params.num_trees),
        params.threads,
    )
    baseline_offset = float(pseudo[split.omega2, grid.baseline_index].mean())
    return DoseForestModel(
        trees=trees,
        nuisances=nuisances,
        grid=grid,
        kernel=kernel,
        params=params,
        baseline_offset=baseline_offset,
        p=d.p,
    )


def _forest_params_to_dict(p: ForestParams) -> dict:
    return {
        "num_trees": p.num_trees,
        "min_node_size": p.min_node_size,
        "mtry": p.mtry,
        "seed": p.seed,
        "bootstrap": p.bootstrap,
    }


def _params_to_dict(params: DoseForestParams) -> dict:
    return {
        "num_trees": params.num_trees,
        "honesty_fraction": params.honesty_fraction,
        "split": {
            "metric": params.split.metric,
            "zeta": params.split.zeta,
            "min_node_size": params.split.min_node_size,
            "min_info_gain": params.split.min_info_gain,
            "mtry": params.split.mtry,
            "threshold_cap": params.split.threshold_cap,
        },
        "kernel_family": params.kernel_family,
        "bandwidth_policy": params.bandwidth_policy,
        "bandwidth": params.bandwidth,
        "grid_size": params.grid_size,
        "baseline": params.baseline,
        "subsample_fraction": params.subsample_fraction,
        "nuisance": _forest_params_to_dict(params.nuisance),
        "gps_forest": None
        if params.gps_forest is None
        else _forest_params_to_dict(params.gps_forest),
        "density_floor": params.density_floor,
        "seed": params.seed,
        # threads is an execution setting, not a model property; not echoed
    }


def _params_from_dict(d: dict) -> DoseForestParams:
    return DoseForestParams(
        num_trees=d["num_trees"],
        honesty_fraction=d["honesty_fraction"],
        split=SplitConfig(**d["split"]),
        kernel_family=d["kernel_family"],
        bandwidth_policy=d["bandwidth_policy"],
        bandwidth=d["bandwidth"],
        grid_size=d["grid_size"],
        baseline=d["baseline"],
        subsample_fraction=d["subsample_fraction"],
        nuisance=ForestParams(**d["nuisance"]),
        gps_forest=None if d["gps_forest"] is None else ForestParams(**d["gps_forest"]),
        density_floor=d["density_floor"],
        seed=d["seed"],
    )


def save(model: DoseForestModel, path: str) -> None:
    """Versioned, self-describing JSON; floats round-trip exactly."""
    if model.nuisances.outcome is None or model.nuisances.gps is None:
        raise ModelFormatError("only models with fitted nuisance forests can be saved")
    doc = {
        "format": FORMAT_MARKER,
        "version": FORMAT_VERSION,
        "p": model.p,
        "params": _params_to_dict(model.params),
        "grid": {
            "points": model.grid.points.tolist(),
            "baseline_index": model.grid.baseline_index,
        },
        "kernel": {"family": model.kernel.family, "bandwidth": model.kernel.bandwidth},
        "baseline_offset": model.baseline_offset,
        "outcome_forest": model.nuisances.outcome.forest.to_dict(),
        "gps": {
            "mean_forest": model.nuisances.gps.mean_forest.to_dict(),
            "residual_sd": model.nuisances.gps.residual_sd,
            "density_floor": model.nuisances.gps.density_floor,
        },
        "trees": [tree.to_dict() for tree in model.trees],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"), allow_nan=False)


def load(path: str) -> DoseForestModel:
    from .nuisance import GpsModel, OutcomeModel, RegressionForest

    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a valid model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_MARKER:
        raise ModelFormatError(f"{path}: missing '{FORMAT_MARKER}' marker")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelVersionError(
            f"{path}: unsupported version {doc.get('version')!r}, expected {FORMAT_VERSION}"
        )
    try:
        params = _params_from_dict(doc["params"])
        grid = TreatmentGrid(
            points=np.asarray(doc["grid"]["points"], dtype=np.float64),
            baseline_index=int(doc["grid"]["baseline_index"]),
        )
        kernel = KernelSpec(
            family=doc["kernel"]["family"], bandwidth=float(doc["kernel"]["bandwidth"])
        )
        outcome = OutcomeModel(forest=RegressionForest.from_dict(doc["outcome_forest"]))
        gps = GpsModel(
            mean_forest=RegressionForest.from_dict(doc["gps"]["mean_forest"]),
            residual_sd=float(doc["gps"]["residual_sd"]),
            density_floor=float(doc["gps"]["density_floor"]),
        )
        trees = [Tree.from_dict(t) for t in doc["trees"]]
        model = DoseForestModel(
            trees=trees,
            nuisances=NuisancePair.from_models(outcome, gps),
            grid=grid,
            kernel=kernel,
            params=params,
            baseline_offset=float(doc["baseline_offset"]),
            p=int(doc["p"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model file ({exc})") from None
    return model
