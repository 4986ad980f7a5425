"""Evaluation metrics: effect-estimation error, dose-response curves, and
uplift ranking quality.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .data import Dataset, TreatmentGrid
from .errors import ConfigError


def _paired(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1 or p.size < 1:
        raise ConfigError("pred and truth must be equal-length non-empty vectors")
    return p, t


def pehe(pred, truth) -> float:
    """Mean absolute effect-estimation error."""
    p, t = _paired(pred, truth)
    return float(np.mean(np.abs(p - t)))


def rmse(pred, truth) -> float:
    p, t = _paired(pred, truth)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def adrf_curve(
    evaluator: Callable[[float, np.ndarray], np.ndarray],
    d: Dataset,
    grid: TreatmentGrid,
) -> np.ndarray:
    """Average of evaluator(t, X) over the rows of d, at each grid dose."""
    return np.array(
        [float(np.mean(evaluator(float(t), d.x))) for t in grid.points]
    )


def _qini_gain_curve(
    scores: np.ndarray, outcomes: np.ndarray, treated: np.ndarray
) -> np.ndarray:
    """Cumulative incremental gain g(k) for k = 0..n, descending-score order."""
    order = np.argsort(-scores, kind="stable")
    y = outcomes[order]
    w = treated[order].astype(np.float64)
    nt = np.cumsum(w)
    nc = np.cumsum(1.0 - w)
    yt = np.cumsum(y * w)
    yc = np.cumsum(y * (1.0 - w))
    control_term = np.where(nc > 0, yc * nt / np.where(nc > 0, nc, 1.0), 0.0)
    return np.concatenate([[0.0], yt - control_term])


def qini(scores, outcomes, treated_flags) -> float:
    """Area between the score-ranked incremental-gain curve and random targeting,
    normalized by total gain * n / 2."""
    scores = np.asarray(scores, dtype=np.float64)
    outcomes = np.asarray(outcomes, dtype=np.float64)
    treated = np.asarray(treated_flags, dtype=bool)
    if not scores.shape == outcomes.shape == treated.shape or scores.ndim != 1:
        raise ConfigError("scores, outcomes, treated_flags must be equal-length vectors")
    if not treated.any() or treated.all():
        raise ConfigError("both treated and control groups must be non-empty")
    g = _qini_gain_curve(scores, outcomes, treated)
    n = scores.size
    total = g[-1]
    if total == 0.0:
        raise ConfigError("total incremental gain is zero; qini is undefined")
    area = float(np.sum((g[:-1] + g[1:]) / 2.0))
    diagonal_area = total * n / 2.0
    return (area - diagonal_area) / (total * n / 2.0)
