"""Scratch: GPS coarseness / outcome-forest strength vs root ADRF error and PEHE."""
import time

import numpy as np

from doseforest.benchmark import run_benchmark
from doseforest.data import honest_split, treatment_grid
from doseforest.dgp import DgpConfig, generate
from doseforest.dr import node_drf
from doseforest.forest import DoseForestParams, _resolve_kernel
from doseforest.kernels import KernelSpec, bandwidth_rot
from doseforest.nuisance import ForestParams, NuisancePair, fit_gps, fit_outcome
from doseforest.splitting import SplitConfig

cfg = DgpConfig(n=1000, p_x=50, p_u=5, p_z=5, drf_kind="poly", seed=0)
sim = generate(cfg)
d = sim.dataset
hs = honest_split(d, 0.5, 0)
o1 = d.subset(hs.omega1)
grid = treatment_grid(d, 10)
truth = sim.adrf_truth(grid.points)

outcome_cfgs = {
    "out100/5": ForestParams(num_trees=100, min_node_size=5, seed=1),
    "out200/5/mtry25": ForestParams(num_trees=200, min_node_size=5, mtry=25, seed=1),
}
gps_cfgs = {
    "gps5": ForestParams(num_trees=100, min_node_size=5, seed=2),
    "gps50": ForestParams(num_trees=100, min_node_size=50, seed=2),
    "gps_root": ForestParams(num_trees=1, min_node_size=10**6, seed=2),
}

for oname, ocfg in outcome_cfgs.items():
    outcome = fit_outcome(o1, ocfg)
    for gname, gcfg in gps_cfgs.items():
        gcfg2 = ForestParams(
            num_trees=gcfg.num_trees,
            min_node_size=min(gcfg.min_node_size, o1.n),
            seed=2,
        )
        gps = fit_gps(o1, gcfg2)
        nuis = NuisancePair.from_models(outcome, gps)
        for h in (bandwidth_rot(o1.t), 1.5):
            kern = KernelSpec("gaussian", h)
            vals = node_drf(d, np.arange(d.n), grid, nuis, kern).values
            err = vals - truth
            print(
                f"{oname:18s} {gname:9s} sd={gps.residual_sd:5.2f} h={h:5.2f} "
                f"mean|err|={np.mean(np.abs(err)):7.2f} err@t0={err[0]:8.2f} err@end={err[-1]:8.2f}"
            )
