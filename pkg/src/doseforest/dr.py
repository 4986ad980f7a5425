"""Kernel-based doubly robust dose-response estimators.

The per-sample pseudo-value at dose t is

    mu_hat(t, x_i) + [K_h(T_i - t) / bmass(t)] / pi_hat(t | x_i) * (y_i - mu_hat(t, x_i))

where bmass is the kernel mass inside the observed dose range (boundary
normalization). Node-level curves are plain means of pseudo-values, which
stays consistent if either nuisance model is correct.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Dataset, Sample, TreatmentGrid
from .errors import ConfigError, DoseRangeError, NoSupportError
from .kernels import KernelSpec, boundary_mass, kernel_deriv, kernel_eval
from .nuisance import NuisancePair


@dataclass(frozen=True)
class DrfCurve:
    """Dose-response level estimates on a treatment grid."""

    grid: TreatmentGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.size,):
            raise ConfigError("curve length must match the grid")
        if not np.all(np.isfinite(v)):
            raise ConfigError("curve values must be finite")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class CateCurve:
    """Effect curve relative to the grid baseline; zero at the baseline by construction."""

    grid: TreatmentGrid
    values: np.ndarray
    baseline_value: float  # dose-response level that was subtracted

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.size,):
            raise ConfigError("curve length must match the grid")
        if not np.all(np.isfinite(v)):
            raise ConfigError("curve values must be finite")
        if v[self.grid.baseline_index] != 0.0:
            raise ConfigError("effect curve must be exactly 0 at the baseline")
        object.__setattr__(self, "values", v)


def pseudo_matrix(
    x: np.ndarray,
    t: np.ndarray,
    y: np.ndarray,
    grid: TreatmentGrid,
    nuisances: NuisancePair,
    spec: KernelSpec,
    t_range: tuple[float, float],
) -> np.ndarray:
    """(n, G) matrix of per-sample pseudo-values at every grid dose.

    Computed once per forest: splitting and leaf estimation then reduce to
    masked column means.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = np.empty((x.shape[0], grid.size))
    for g, dose in enumerate(grid.points):
        mu = nuisances.mu_at(x, float(dose))
        pi = nuisances.pi_at(x, float(dose))
        mass = boundary_mass(spec, float(dose), t_range[0], t_range[1])
        w = kernel_eval(spec, t - float(dose)) / mass / pi
        out[:, g] = mu + w * (y - mu)
    return out


def cdrf_pseudo(
    t: float,
    sample: Sample,
    nuisances: NuisancePair,
    spec: KernelSpec,
    t_range: tuple[float, float],
) -> float:
    """Doubly robust pseudo-value of one sample at dose t."""
    x = np.asarray(sample.x, dtype=np.float64)[None, :]
    mu = float(nuisances.mu_at(x, float(t))[0])
    pi = float(nuisances.pi_at(x, float(t))[0])
    mass = boundary_mass(spec, float(t), t_range[0], t_range[1])
    w = kernel_eval(spec, sample.t - float(t)) / mass / pi
    return mu + w * (sample.y - mu)


def node_drf(
    d: Dataset,
    node: np.ndarray,
    grid: TreatmentGrid,
    nuisances: NuisancePair,
    spec: KernelSpec,
) -> DrfCurve:
    """Mean pseudo-value curve over the node's samples."""
    idx = np.asarray(node, dtype=np.intp)
    if idx.size == 0:
        raise ConfigError("node_drf needs a non-empty node")
    m = pseudo_matrix(
        d.x[idx], d.t[idx], d.y[idx], grid, nuisances, spec, (d.t_min, d.t_max)
    )
    return DrfCurve(grid=grid, values=m.mean(axis=0))


def node_cate(drf: DrfCurve) -> CateCurve:
    """Shift a dose-response curve so the baseline entry is exactly zero."""
    base = float(drf.values[drf.grid.baseline_index])
    return CateCurve(grid=drf.grid, values=drf.values - base, baseline_value=base)


def pdrf_gaussian(t_obs, y_obs, t: float, spec: KernelSpec) -> float:
    """Exact derivative of the Nadaraya-Watson dose-response fit at t.

        sum K'_h(T_i - t) y_i / sum K_h(T_i - t)
      - [sum K_h(T_i - t) y_i] * sum K'_h(T_i - t) / [sum K_h(T_i - t)]^2

    Gaussian only; other families are not differentiable and go through
    pdrf_numeric instead.
    """
    t_obs = np.asarray(t_obs, dtype=np.float64)
    y_obs = np.asarray(y_obs, dtype=np.float64)
    u = t_obs - t
    k = kernel_eval(spec, u)
    # K'_h here is the derivative in t, i.e. -d/du K_h(u)
    kd = -kernel_deriv(spec, u)
    denom = float(np.sum(k))
    if denom <= 0.0:
        raise NoSupportError(f"no kernel mass at t={t}")
    return float(np.sum(kd * y_obs) / denom - np.sum(k * y_obs) * np.sum(kd) / denom**2)


def pdrf_numeric(
    curve_source: Callable[[float], float],
    t: float,
    delta: float,
    t_range: tuple[float, float],
) -> float:
    """Forward difference [mu(t + delta) - mu(t)] / delta."""
    if delta <= 0.0:
        raise ConfigError(f"delta must be positive, got {delta}")
    if not (t_range[0] <= t and t + delta <= t_range[1]):
        raise DoseRangeError(
            f"[{t}, {t + delta}] not contained in dose range {t_range}"
        )
    return (curve_source(t + delta) - curve_source(t)) / delta
