"""Scratch: full-pipeline PEHE under candidate defaults (literal dose link)."""
import sys
import time

import numpy as np

from doseforest.benchmark import run_benchmark
from doseforest.dgp import DgpConfig
from doseforest.forest import DoseForestParams
from doseforest.nuisance import ForestParams
from doseforest.splitting import SplitConfig

h_mode = sys.argv[1] if len(sys.argv) > 1 else "rot"
reps = int(sys.argv[2]) if len(sys.argv) > 2 else 3

base = dict(
    num_trees=100,
    split=SplitConfig(min_node_size=50),
    nuisance=ForestParams(num_trees=200, min_node_size=5, mtry=26),
    gps_forest=ForestParams(num_trees=100, min_node_size=50),
    seed=0,
)
if h_mode == "rot":
    fp = DoseForestParams(bandwidth_policy="rot", **base)
else:
    fp = DoseForestParams(bandwidth_policy="fixed", bandwidth=float(h_mode), **base)

cfg = DgpConfig(n=1000, p_x=50, p_u=5, p_z=5, drf_kind="poly", seed=0)
t0 = time.time()
rep = run_benchmark(cfg, reps=reps, forest_params=fp, threads=4)
print(f"h={h_mode} reps={reps} wall={time.time()-t0:.0f}s")
for r in rep.rows:
    print(f"  {r.method:10s} {r.metric}: {r.mean:8.3f}" + (f" (se {r.se:.2f})" if r.se else ""))
