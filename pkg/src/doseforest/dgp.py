"""Synthetic benchmark generator with known per-row effect curves.

Outcome and dose equations:

    Y = mu(T) + 0.2 * (X1^2 + X4) * T + X . bx + U . bu + eps
    T = 20 * beta_pdf(sigmoid(X . bx_t + Z . bz)) + nu

with beta_pdf the Beta(2, 3) density, X/U/Z standard normal, and every
coefficient Unif(-1, 1) with half the entries zeroed at random. Only X is
observed; U and Z never leave this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import ConfigError

DRF_KINDS = ("poly", "exp", "sinus")
NOISE_KINDS = ("uniform", "gaussian")


@dataclass(frozen=True)
class DgpConfig:
    n: int
    p_x: int = 50
    p_u: int = 5
    p_z: int = 5
    drf_kind: str = "poly"
    seed: int = 0
    randomized_test_treatments: bool = False
    noise: str = "uniform"

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.p_x < 4:
            raise ConfigError("heterogeneity uses covariates 1 and 4, need p_x >= 4")
        if min(self.p_u, self.p_z) < 1:
            raise ConfigError("p_u and p_z must be >= 1")
        if self.drf_kind not in DRF_KINDS:
            raise ConfigError(f"unknown drf_kind '{self.drf_kind}'; choose from {DRF_KINDS}")
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"unknown noise '{self.noise}'; choose from {NOISE_KINDS}")


def drf_value(kind: str, t):
    """Population dose-response level at dose t."""
    t_arr = np.asarray(t, dtype=np.float64)
    if kind == "poly":
        out = 0.2 * (t_arr - 5.0) ** 2 - t_arr - 5.0
    elif kind == "exp":
        if np.any(t_arr < 0.0):
            raise ConfigError("exp dose-response is defined for t >= 0")
        # log(1 + exp(t) / (t + 0.1)) - log(11), computed overflow-safe
        out = np.logaddexp(0.0, t_arr - np.log(t_arr + 0.1)) - math.log(11.0)
    elif kind == "sinus":
        out = 5.0 * np.sin(t_arr) + t_arr
    else:
        raise ConfigError(f"unknown drf_kind '{kind}'")
    return float(out) if np.isscalar(t) else out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _beta23_pdf(q: np.ndarray) -> np.ndarray:
    return 12.0 * q * (1.0 - q) ** 2


def _sparse_coeffs(rng: np.random.Generator, size: int) -> np.ndarray:
    beta = rng.uniform(-1.0, 1.0, size)
    return beta * (rng.random(size) < 0.5)


@dataclass(frozen=True)
class SimData:
    """One simulated dataset plus its ground truth."""

    dataset: Dataset
    drf_kind: str
    cate_coeff: np.ndarray = field(repr=False)  # 0.2 * (X1^2 + X4) per row
    confound: np.ndarray = field(repr=False)  # X . bx + U . bu per row
    confound_offset: float  # mean of confound over rows

    def truth(self, t, t0: float | None = None) -> np.ndarray:
        """Per-row true effect of dose t relative to baseline t0 (default: observed min).

        t may be a scalar or one dose per row.
        """
        if t0 is None:
            t0 = self.dataset.t_min
        t_arr = np.broadcast_to(np.asarray(t, dtype=np.float64), self.cate_coeff.shape)
        return (
            drf_value(self.drf_kind, t_arr)
            - drf_value(self.drf_kind, t0)
            + self.cate_coeff * (t_arr - t0)
        )

    def adrf_truth(self, t):
        """Population mean outcome at dose t, averaged over this sample's rows."""
        t_arr = np.asarray(t, dtype=np.float64)
        out = (
            drf_value(self.drf_kind, t_arr)
            + float(np.mean(self.cate_coeff)) * t_arr
            + self.confound_offset
        )
        return float(out) if np.isscalar(t) else out


def generate(cfg: DgpConfig) -> SimData:
    """Draw one dataset; identical seeds give identical draws.

    With randomized_test_treatments the structural dose is replaced by a
    uniform redraw over its observed range (and the outcome recomputed), which
    leaves the covariates and coefficients of the seed unchanged.
    """
    rng = np.random.default_rng(cfg.seed)
    bx_y = _sparse_coeffs(rng, cfg.p_x)
    bu = _sparse_coeffs(rng, cfg.p_u)
    bx_t = _sparse_coeffs(rng, cfg.p_x)
    bz = _sparse_coeffs(rng, cfg.p_z)
    x = rng.standard_normal((cfg.n, cfg.p_x))
    u = rng.standard_normal((cfg.n, cfg.p_u))
    z = rng.standard_normal((cfg.n, cfg.p_z))
    if cfg.noise == "uniform":
        eps = rng.uniform(-1.0, 1.0, cfg.n)
        nu = rng.uniform(-1.0, 1.0, cfg.n)
    else:
        eps = rng.standard_normal(cfg.n)
        nu = rng.standard_normal(cfg.n)

    t = 20.0 * _beta23_pdf(_sigmoid(x @ bx_t + z @ bz)) + nu
    if cfg.randomized_test_treatments:
        t = rng.uniform(t.min(), t.max(), cfg.n)
    if cfg.drf_kind == "exp":
        # the exp response is undefined below 0; clamp the dose at the domain edge
        t = np.maximum(t, 0.0)

    cate_coeff = 0.2 * (x[:, 0] ** 2 + x[:, 3])
    confound = x @ bx_y + u @ bu
    y = drf_value(cfg.drf_kind, t) + cate_coeff * t + confound + eps

    dataset = Dataset(
        x=x,
        t=t,
        y=y,
        covariate_names=tuple(f"x{j + 1}" for j in range(cfg.p_x)),
        outcome_name="y",
        treatment_name="t",
    )
    return SimData(
        dataset=dataset,
        drf_kind=cfg.drf_kind,
        cate_coeff=cate_coeff,
        confound=confound,
        confound_offset=float(np.mean(confound)),
    )
