"""Distance-based splitting: compare child effect curves in function space.

A candidate split is scored by

    gain = (n_left * n_right / n_parent) * D(theta_left, theta_right) + zeta * sigma_pi

where D is a grid-quadrature distance between the children's effect curves
and sigma_pi is the GPS dose variance (weak-positivity regularizer).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import TreatmentGrid
from .dr import CateCurve
from .errors import ConfigError, GridMismatchError

METRICS = ("d1", "d2", "dinf")


@dataclass(frozen=True)
class SplitConfig:
    metric: str = "d2"
    zeta: float = 0.0
    min_node_size: int = 50
    min_info_gain: float = 0.0
    mtry: int | None = None  # None -> ceil(sqrt(p))
    threshold_cap: int = 32  # quantile cap for nodes larger than 256 rows

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ConfigError(f"unknown metric '{self.metric}'; choose from {METRICS}")
        if self.min_node_size < 1:
            raise ConfigError("min_node_size must be >= 1")
        if self.zeta < 0.0 or self.min_info_gain < 0.0:
            raise ConfigError("zeta and min_info_gain must be >= 0")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("mtry must be >= 1")
        if self.threshold_cap < 1:
            raise ConfigError("threshold_cap must be >= 1")

    def resolve_mtry(self, p: int) -> int:
        return min(p, self.mtry if self.mtry is not None else max(1, math.ceil(math.sqrt(p))))


@dataclass(frozen=True)
class Split:
    feature_index: int
    threshold: float
    gain: float
    left: np.ndarray
    right: np.ndarray


def _distance_rows(delta: np.ndarray, metric: str, weights: np.ndarray) -> np.ndarray:
    """Distance per row of delta = theta_left - theta_right sampled on the grid."""
    if metric == "d1":
        return np.abs(delta) @ weights
    if metric == "d2":
        return (delta * delta) @ weights
    return np.max(np.abs(delta), axis=-1)


def curve_distance(a: CateCurve, b: CateCurve, metric: str, grid: TreatmentGrid) -> float:
    """Trapezoid quadrature of the chosen integrand (d1, d2) or the grid max (dinf)."""
    if metric not in METRICS:
        raise ConfigError(f"unknown metric '{metric}'")
    if not (a.grid.same_as(grid) and b.grid.same_as(grid)):
        raise GridMismatchError("curves must share the evaluation grid")
    delta = a.values - b.values
    return float(_distance_rows(delta[None, :], metric, grid.trapezoid_weights())[0])


def criterion(
    left_curve: CateCurve,
    right_curve: CateCurve,
    n1: int,
    n2: int,
    n_parent: int,
    sigma_pi: float,
    cfg: SplitConfig,
) -> float:
    """Size-balanced curve distance plus the dose-variety regularizer."""
    if n1 < 1 or n2 < 1:
        raise ConfigError("both children need at least one sample")
    if n1 + n2 != n_parent:
        raise ConfigError(f"child sizes {n1}+{n2} do not add up to parent {n_parent}")
    d = curve_distance(left_curve, right_curve, cfg.metric, left_curve.grid)
    return (n1 * n2 / n_parent) * d + cfg.zeta * sigma_pi


class SplitContext:
    """Per-forest state shared by every split search.

    Holds the covariate block and the per-sample pseudo-value matrix so a
    candidate evaluation is two masked column means; read-only during growth.
    """

    def __init__(
        self,
        x: np.ndarray,
        pseudo: np.ndarray,
        grid: TreatmentGrid,
        sigma_pi: float,
        cfg: SplitConfig,
    ):
        self.x = np.asarray(x, dtype=np.float64)
        self.pseudo = np.asarray(pseudo, dtype=np.float64)
        if self.pseudo.shape != (self.x.shape[0], grid.size):
            raise ConfigError("pseudo matrix must be (n_rows, grid_size)")
        self.grid = grid
        self.weights = grid.trapezoid_weights()
        self.sigma_pi = float(sigma_pi)
        self.cfg = cfg

    def _candidate_positions(self, sv: np.ndarray, m: int) -> np.ndarray:
        """Boundary positions k (left = first k sorted rows) that satisfy size rules."""
        k = np.arange(1, m)
        ok = (
            (sv[1:] > sv[:-1])
            & (k >= self.cfg.min_node_size)
            & (m - k >= self.cfg.min_node_size)
        )
        pos = k[ok]
        cap = self.cfg.threshold_cap
        if m > 256 and pos.size > cap:
            take = np.unique(np.round(np.linspace(0, pos.size - 1, cap)).astype(np.intp))
            pos = pos[take]
        return pos

    def best_split(
        self,
        node: np.ndarray,
        feature_subset: np.ndarray,
        est_node: np.ndarray | None = None,
    ) -> Split | None:
        """Max-gain candidate over (feature, midpoint threshold) pairs.

        When est_node is given, both children must also receive at least
        min_node_size of its rows (the estimation half). Ties break toward
        the lower feature index, then the lower threshold.
        """
        node = np.asarray(node, dtype=np.intp)
        m = node.size
        cfg = self.cfg
        if m < 2 * cfg.min_node_size:
            return None
        pseudo_node = self.pseudo[node]
        base = self.grid.baseline_index
        best = None  # (gain, feature, threshold, order, pos)
        for f in np.sort(np.asarray(feature_subset, dtype=np.intp)):
            v = self.x[node, f]
            order = np.argsort(v, kind="stable")
            sv = v[order]
            pos = self._candidate_positions(sv, m)
            if pos.size == 0:
                continue
            thresholds = (sv[pos - 1] + sv[pos]) / 2.0
            if est_node is not None:
                est_sorted = np.sort(self.x[est_node, f])
                est_left = np.searchsorted(est_sorted, thresholds, side="right")
                ok = (est_left >= cfg.min_node_size) & (
                    est_sorted.size - est_left >= cfg.min_node_size
                )
                pos, thresholds = pos[ok], thresholds[ok]
                if pos.size == 0:
                    continue
            sums = np.cumsum(pseudo_node[order], axis=0)
            total = sums[-1]
            nl = pos.astype(np.float64)
            left_mean = sums[pos - 1] / nl[:, None]
            right_mean = (total - sums[pos - 1]) / (m - nl)[:, None]
            delta = (left_mean - left_mean[:, base][:, None]) - (
                right_mean - right_mean[:, base][:, None]
            )
            dist = _distance_rows(delta, cfg.metric, self.weights)
            gains = (nl * (m - nl) / m) * dist + cfg.zeta * self.sigma_pi
            j = int(np.argmax(gains))
            if best is None or gains[j] > best[0]:
                best = (float(gains[j]), int(f), float(thresholds[j]), order, int(pos[j]))
        if best is None or best[0] < cfg.min_info_gain:
            return None
        gain, f, thr, order, pos = best
        return Split(
            feature_index=f,
            threshold=thr,
            gain=gain,
            left=np.sort(node[order[:pos]]),
            right=np.sort(node[order[pos:]]),
        )


def best_split(
    d,
    node: np.ndarray,
    feature_subset: np.ndarray,
    grid: TreatmentGrid,
    nuisances,
    spec,
    cfg: SplitConfig,
    sigma_pi: float = 0.0,
    est_node: np.ndarray | None = None,
) -> Split | None:
    """Standalone entry point; builds the pseudo-value cache for one call."""
    from .dr import pseudo_matrix

    pseudo = pseudo_matrix(d.x, d.t, d.y, grid, nuisances, spec, (d.t_min, d.t_max))
    ctx = SplitContext(d.x, pseudo, grid, sigma_pi, cfg)
    return ctx.best_split(node, feature_subset, est_node)
