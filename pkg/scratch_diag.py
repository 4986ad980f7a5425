"""Scratch diagnosis of DR error sources (not part of the package)."""
import numpy as np

from doseforest.data import honest_split, treatment_grid
from doseforest.dgp import DgpConfig, _beta23_pdf, _sigmoid, _sparse_coeffs, drf_value, generate
from doseforest.dr import node_drf
from doseforest.forest import DoseForestParams, _resolve_kernel
from doseforest.kernels import KernelSpec, bandwidth_rot
from doseforest.nuisance import ForestParams, NuisancePair, fit_gps, fit_outcome

cfg = DgpConfig(n=1000, p_x=50, p_u=5, p_z=5, drf_kind="poly", seed=0)
sim = generate(cfg)
d = sim.dataset

# rebuild the DGP draws in the same rng order to obtain oracle quantities
rng = np.random.default_rng(0)
bx_y = _sparse_coeffs(rng, 50)
bu = _sparse_coeffs(rng, 5)
bx_t = _sparse_coeffs(rng, 50)
bz = _sparse_coeffs(rng, 5)
x = rng.standard_normal((1000, 50))
assert np.allclose(x, d.x)
conf_x = x @ bx_y  # X-measurable confound part

coeff = sim.cate_coeff

def mu_oracle(xr, t):
    # row-aligned oracle E[Y | T=t, X]; U-part integrates to 0
    return drf_value("poly", t) + coeff * t + conf_x

# Monte-Carlo oracle density pi(t|x): T = 20*psi(sigmoid(x.bx_t + z.bz)) + U(-1,1)
zw = np.random.default_rng(123).standard_normal((2000, 5)) @ bz  # (2000,)
wx = x @ bx_t  # (1000,)

def pi_oracle(xr, t):
    # P(T in [t-0.?]) density: T | x = 20*psi(sigmoid(wx + zw)) + nu
    link = 20.0 * _beta23_pdf(_sigmoid(wx[:, None] + zw[None, :]))  # (1000, 2000)
    dens = np.mean(np.abs(link - t) < 1.0, axis=1) / 2.0  # nu ~ U(-1,1) smooths exactly
    return np.maximum(dens, 1e-3)

# cache oracle density per grid dose (pi_oracle is expensive)
grid = treatment_grid(d, 10)
link_cache = 20.0 * _beta23_pdf(_sigmoid(wx[:, None] + zw[None, :]))

def pi_oracle_fast(xr, t):
    dens = np.mean(np.abs(link_cache - t) < 1.0, axis=1) / 2.0
    return np.maximum(dens, 1e-3)

hs = honest_split(d, 0.5, 0)
o1 = d.subset(hs.omega1)
outcome = fit_outcome(o1, ForestParams(num_trees=100, min_node_size=5, seed=1))
gps = fit_gps(o1, ForestParams(num_trees=100, min_node_size=5, seed=2))

def mu_forest(xr, t):
    return outcome.predict_at(xr, t)

def pi_forest(xr, t):
    return gps.density_at(xr, t)

params = DoseForestParams()
kern = _resolve_kernel(params, o1)
print("rot bandwidth:", round(kern.bandwidth, 3))

truth = sim.adrf_truth(grid.points)
combos = {
    "mu_oracle+pi_oracle": (mu_oracle, pi_oracle_fast),
    "mu_oracle+pi_forest": (mu_oracle, pi_forest),
    "mu_forest+pi_oracle": (mu_forest, pi_oracle_fast),
    "mu_forest+pi_forest": (mu_forest, pi_forest),
    "mu_forest+pi_none(mu only)": (mu_forest, None),
}
for name, (mu, pi) in combos.items():
    if pi is None:
        vals = np.array([np.mean(mu(d.x, float(t))) for t in grid.points])
    else:
        nuis = NuisancePair.from_functions(mu, pi)
        vals = node_drf(d, np.arange(d.n), grid, nuis, kern).values
    err = vals - truth
    print(f"{name:28s} mean|err|={np.mean(np.abs(err)):8.2f}  err@t0={err[0]:8.2f}  err@end={err[-1]:8.2f}")
print("truth:", np.round(truth, 1))
