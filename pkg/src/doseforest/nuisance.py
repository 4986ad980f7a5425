"""Nuisance models fit on the structure half: outcome regression, GPS density,
and the generic CART regression forest they share (also the RF baseline).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._fast import grow_variance_tree, route_rows
from ._trees import depth_of
from ._util import parallel_map
from .data import Dataset
from .errors import ConfigError, DegenerateGpsError, TrainingError

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ForestParams:
    num_trees: int = 100
    min_node_size: int = 5
    mtry: int | None = None  # None -> ceil(p / 3)
    seed: int = 0
    bootstrap: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.num_trees < 1:
            raise ConfigError("num_trees must be >= 1")
        if self.min_node_size < 1:
            raise ConfigError("min_node_size must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("mtry must be >= 1")


@dataclass
class _Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "_Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.intp),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.intp),
            right=np.asarray(d["right"], dtype=np.intp),
            value=np.asarray(d["value"], dtype=np.float64),
        )


@dataclass
class RegressionForest:
    """Bagged CART forest predicting a real target by the mean of per-tree leaf means."""

    trees: list
    params: ForestParams
    n_features: int

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        acc = np.zeros(x.shape[0])
        for tree in self.trees:
            leaf = route_rows(tree.feature, tree.threshold, tree.left, tree.right, x)
            acc += tree.value[leaf]
        return acc / len(self.trees)

    def depths(self) -> list[int]:
        return [depth_of(t.feature, t.left, t.right) for t in self.trees]

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "params": {
                "num_trees": self.params.num_trees,
                "min_node_size": self.params.min_node_size,
                "mtry": self.params.mtry,
                "seed": self.params.seed,
                "bootstrap": self.params.bootstrap,
            },
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionForest":
        return cls(
            trees=[_Tree.from_dict(t) for t in d["trees"]],
            params=ForestParams(**d["params"]),
            n_features=int(d["n_features"]),
        )


def fit_regression_forest(
    features: np.ndarray, targets: np.ndarray, params: ForestParams
) -> RegressionForest:
    """Bootstrap CART forest with variance-reduction splits.

    Deterministic given params.seed: tree i draws from default_rng(seed + i),
    so results do not depend on thread scheduling.
    """
    x = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(targets, dtype=np.float64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise TrainingError("features must be (n, p) with matching targets")
    n, p = x.shape
    if n < 2 or n < params.min_node_size:
        raise TrainingError(
            f"too few rows to fit a forest: n={n}, min_node_size={params.min_node_size}"
        )
    mtry = params.mtry if params.mtry is not None else max(1, math.ceil(p / 3))
    all_rows = np.arange(n, dtype=np.int64)

    def grow(i: int) -> _Tree:
        arrays = grow_variance_tree(
            x, y, all_rows, params.min_node_size, min(mtry, p),
            params.seed + i, params.bootstrap,
        )
        return _Tree(*arrays)

    trees = parallel_map(grow, range(params.num_trees), params.threads)
    return RegressionForest(trees=trees, params=params, n_features=p)


@dataclass
class OutcomeModel:
    """Conditional-mean model mu(t, x), fit on features (x ⊕ t)."""

    forest: RegressionForest

    def predict_at(self, x: np.ndarray, t: float) -> np.ndarray:
        """Predictions for the rows of x, all evaluated at dose t."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        feats = np.empty((x.shape[0], x.shape[1] + 1))
        feats[:, :-1] = x
        feats[:, -1] = t
        return self.forest.predict(feats)


@dataclass
class GpsModel:
    """Gaussian dose density around a forest-estimated conditional mean.

    Homoscedastic: one residual sd for all x. Densities are floored at
    density_floor so inverse weights stay bounded.
    """

    mean_forest: RegressionForest
    residual_sd: float
    density_floor: float

    def density_at(self, x: np.ndarray, t: float) -> np.ndarray:
        """Floored density of dose t given each row of x."""
        mean = self.mean_forest.predict(x)
        z = (t - mean) / self.residual_sd
        pdf = np.exp(-0.5 * z * z) / (self.residual_sd * _SQRT_2PI)
        return np.maximum(pdf, self.density_floor)


class NuisancePair:
    """mu-hat and pi-hat evaluated through a common interface.

    mu_at(x, t) and pi_at(x, t) map the rows of x to predictions and floored
    densities at a single dose t. Oracle substitutes for tests can be built
    with from_functions.
    """

    def __init__(self, mu_at, pi_at, outcome=None, gps=None):
        self.mu_at = mu_at
        self.pi_at = pi_at
        self.outcome = outcome
        self.gps = gps

    @classmethod
    def from_models(cls, outcome: OutcomeModel, gps: GpsModel) -> "NuisancePair":
        return cls(outcome.predict_at, gps.density_at, outcome=outcome, gps=gps)

    @classmethod
    def from_functions(cls, mu_at, pi_at) -> "NuisancePair":
        return cls(mu_at, pi_at)


def fit_outcome(omega1: Dataset, params: ForestParams) -> OutcomeModel:
    """Fit mu-hat on the structure half only; treatment is the last feature."""
    feats = np.column_stack([omega1.x, omega1.t])
    return OutcomeModel(forest=fit_regression_forest(feats, omega1.y, params))


def fit_gps(
    omega1: Dataset, params: ForestParams, density_floor: float = 1e-3
) -> GpsModel:
    """Fit pi-hat on the structure half: forest mean of t given x plus Gaussian residuals."""
    if density_floor <= 0.0:
        raise ConfigError("density_floor must be positive")
    forest = fit_regression_forest(omega1.x, omega1.t, params)
    residuals = omega1.t - forest.predict(omega1.x)
    sd = float(np.std(residuals, ddof=1)) if residuals.size > 1 else 0.0
    if sd <= 0.0:
        raise DegenerateGpsError(
            "treatment is deterministic given covariates; positivity violated"
        )
    return GpsModel(
        mean_forest=forest, residual_sd=max(sd, 1e-6), density_floor=density_floor
    )


def gps_density(model: GpsModel, t: float, x: np.ndarray) -> float:
    """max(density_floor, Normal(t; mean_forest(x), residual_sd))."""
    return float(model.density_at(np.asarray(x, dtype=np.float64)[None, :], t)[0])


def gps_variance(model: GpsModel, node: np.ndarray) -> float:
    """Conditional dose variance averaged over the node.

    Constant under the homoscedastic Gaussian model; kept as an operation so
    heteroscedastic densities can drop in.
    """
    if np.asarray(node).size == 0:
        raise ConfigError("gps_variance needs a non-empty node")
    return model.residual_sd**2
