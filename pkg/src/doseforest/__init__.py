"""Honest causal forest for heterogeneous effects of continuous treatments.

The forest grows trees that maximize the functional distance between the
children's dose-response effect curves, estimated with a kernel-based doubly
robust estimator, and fills leaf estimates from a held-out half of the data.
"""

from .data import (
    CsvSchema,
    Dataset,
    HonestSplit,
    Sample,
    TreatmentGrid,
    honest_split,
    load_csv,
    save_csv,
    treatment_grid,
)
from .dgp import DgpConfig, SimData, drf_value, generate
from .dr import (
    CateCurve,
    DrfCurve,
    cdrf_pseudo,
    node_cate,
    node_drf,
    pdrf_gaussian,
    pdrf_numeric,
    pseudo_matrix,
)
from .forest import DoseForestModel, DoseForestParams, Tree, load, save, train
from .kernels import (
    KernelSpec,
    bandwidth_cv,
    bandwidth_rot,
    boundary_mass,
    kernel_deriv,
    kernel_eval,
)
from .metrics import adrf_curve, pehe, qini, rmse
from .nuisance import (
    ForestParams,
    GpsModel,
    NuisancePair,
    OutcomeModel,
    RegressionForest,
    fit_gps,
    fit_outcome,
    fit_regression_forest,
    gps_density,
    gps_variance,
)
from .splitting import Split, SplitConfig, SplitContext, best_split, criterion, curve_distance

__version__ = "0.1.0"
