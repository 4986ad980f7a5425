"""Scratch: error spread relative to the baseline grid point (what PEHE sees)."""
import numpy as np

from doseforest.data import honest_split, treatment_grid
from doseforest.dgp import DgpConfig, generate
from doseforest.dr import node_drf
from doseforest.kernels import KernelSpec, bandwidth_rot
from doseforest.nuisance import ForestParams, NuisancePair, fit_gps, fit_outcome

for seed in (0, 1):
    cfg = DgpConfig(n=1000, p_x=50, p_u=5, p_z=5, drf_kind="poly", seed=seed)
    sim = generate(cfg)
    d = sim.dataset
    hs = honest_split(d, 0.5, seed)
    o1 = d.subset(hs.omega1)
    grid = treatment_grid(d, 10)
    truth = sim.adrf_truth(grid.points)
    rot = bandwidth_rot(o1.t)

    for oname, ocfg in {
        "mtry17": ForestParams(num_trees=200, min_node_size=5, seed=1),
        "mtry25": ForestParams(num_trees=200, min_node_size=5, mtry=25, seed=1),
        "mtry51": ForestParams(num_trees=200, min_node_size=5, mtry=51, seed=1),
    }.items():
        outcome = fit_outcome(o1, ocfg)
        for gname, gcfg in {
            "gps_root": ForestParams(num_trees=1, min_node_size=o1.n, seed=2),
            "gps50": ForestParams(num_trees=100, min_node_size=50, seed=2),
        }.items():
            gps = fit_gps(o1, gcfg)
            nuis = NuisancePair.from_models(outcome, gps)
            for h in (1.0, 1.5, 2.0, rot):
                kern = KernelSpec("gaussian", h)
                vals = node_drf(d, np.arange(d.n), grid, nuis, kern).values
                err = vals - truth
                rel = err - err[0]
                # uniform-dose PEHE proxy: interpolate the relative error
                tt = np.linspace(grid.points[0], grid.points[-1], 400)
                proxy = np.mean(np.abs(np.interp(tt, grid.points, rel)))
                print(
                    f"seed{seed} {oname} {gname:8s} h={h:5.2f} "
                    f"proxy={proxy:6.2f} rel_err={np.round(rel, 1)}"
                )
        print()
