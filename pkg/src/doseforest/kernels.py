"""Second-order symmetric kernels, bandwidth selection, and boundary-mass normalization.

All densities are scaled: K_h(u) = k(u / h) / h for a base kernel k that
integrates to 1. Families other than the Gaussian have support [-1, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, DegenerateBandwidthError, UnsupportedKernelError

_SQRT_2PI = math.sqrt(2.0 * math.pi)

FAMILIES = ("gaussian", "uniform", "epanechnikov", "biweight", "triweight")


@dataclass(frozen=True)
class KernelSpec:
    family: str
    bandwidth: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(
                f"unknown kernel family '{self.family}'; choose from {FAMILIES}"
            )
        if not (math.isfinite(self.bandwidth) and self.bandwidth > 0.0):
            raise ConfigError(f"bandwidth must be positive and finite, got {self.bandwidth}")


def _base_eval(family: str, v: np.ndarray) -> np.ndarray:
    if family == "gaussian":
        return np.exp(-0.5 * v * v) / _SQRT_2PI
    inside = np.abs(v) <= 1.0
    s = 1.0 - v * v
    if family == "uniform":
        body = np.full_like(v, 0.5)
    elif family == "epanechnikov":
        body = 0.75 * s
    elif family == "biweight":
        body = (15.0 / 16.0) * s * s
    else:  # triweight
        body = (35.0 / 32.0) * s * s * s
    return np.where(inside, body, 0.0)


def _base_cdf(family: str, v: np.ndarray) -> np.ndarray:
    """Integral of the base kernel from -inf to v."""
    if family == "gaussian":
        return ndtr(v)
    c = np.clip(v, -1.0, 1.0)
    if family == "uniform":
        return 0.5 * (c + 1.0)
    if family == "epanechnikov":
        return 0.75 * (c - c**3 / 3.0) + 0.5
    if family == "biweight":
        return (15.0 / 16.0) * (c - 2.0 * c**3 / 3.0 + c**5 / 5.0) + 0.5
    return (35.0 / 32.0) * (c - c**3 + 0.6 * c**5 - c**7 / 7.0) + 0.5


def kernel_eval(spec: KernelSpec, u):
    """K_h(u): scaled kernel density at offset u. Accepts scalars or arrays."""
    v = np.asarray(u, dtype=np.float64) / spec.bandwidth
    out = _base_eval(spec.family, v) / spec.bandwidth
    return float(out) if np.isscalar(u) else out


def kernel_deriv(spec: KernelSpec, u):
    """d/du K_h(u). Only the Gaussian family is differentiable everywhere."""
    if spec.family != "gaussian":
        raise UnsupportedKernelError(
            f"kernel_deriv is defined only for the gaussian family, not '{spec.family}'"
        )
    h = spec.bandwidth
    v = np.asarray(u, dtype=np.float64) / h
    out = -v * np.exp(-0.5 * v * v) / _SQRT_2PI / (h * h)
    return float(out) if np.isscalar(u) else out


def bandwidth_rot(values) -> float:
    """Silverman rule of thumb: h = 1.06 * min(sd, IQR / 1.34) * n^(-1/5)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ConfigError("bandwidth_rot needs a 1-d sample of length >= 2")
    sd = float(np.std(arr, ddof=1))
    q75, q25 = np.percentile(arr, [75.0, 25.0])
    iqr_spread = float(q75 - q25) / 1.34
    spread = min(s for s in (sd, iqr_spread) if s > 0.0) if (sd > 0 or iqr_spread > 0) else 0.0
    if spread <= 0.0:
        raise DegenerateBandwidthError("sample is constant; bandwidth undefined")
    return 1.06 * spread * arr.size ** (-0.2)


def _nw_loo_error(values: np.ndarray, targets: np.ndarray, spec: KernelSpec) -> float:
    """Leave-one-out squared error of the Nadaraya-Watson fit of targets on values."""
    diff = values[:, None] - values[None, :]
    w = _base_eval(spec.family, diff / spec.bandwidth)
    np.fill_diagonal(w, 0.0)
    denom = w.sum(axis=1)
    num = w @ targets
    # rows with no kernel mass fall back to the mean of the other targets
    total = targets.sum()
    fallback = (total - targets) / (len(targets) - 1)
    pred = np.where(denom > 0.0, num / np.where(denom > 0.0, denom, 1.0), fallback)
    return float(np.mean((pred - targets) ** 2))


def bandwidth_cv(values, targets, candidates, family: str = "gaussian") -> float:
    """Candidate bandwidth with the smallest LOO error; ties go to the smaller h."""
    values = np.asarray(values, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    cands = np.asarray(candidates, dtype=np.float64)
    if cands.size == 0:
        raise ConfigError("bandwidth_cv needs at least one candidate")
    if values.shape != targets.shape or values.size < 3:
        raise ConfigError("bandwidth_cv needs matching value/target vectors of length >= 3")
    best_h, best_err = None, None
    for h in sorted(float(c) for c in cands):
        err = _nw_loo_error(values, targets, KernelSpec(family, h))
        if best_err is None or err < best_err:
            best_h, best_err = h, err
    return best_h


def boundary_mass(spec: KernelSpec, t, t_min: float, t_max: float):
    """Kernel mass inside the observed dose range: int_{t_min}^{t_max} K_h(s - t) ds.

    Dividing kernel weights by this restores unit mass near the range boundary.
    """
    if not t_min < t_max:
        raise ConfigError("t_min must be strictly below t_max")
    t_arr = np.asarray(t, dtype=np.float64)
    h = spec.bandwidth
    mass = _base_cdf(spec.family, (t_max - t_arr) / h) - _base_cdf(
        spec.family, (t_min - t_arr) / h
    )
    return float(mass) if np.isscalar(t) else mass
