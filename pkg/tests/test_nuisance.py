import numpy as np
import pytest

from doseforest.data import Dataset
from doseforest.errors import ConfigError, DegenerateGpsError, TrainingError
from doseforest.nuisance import (
    ForestParams,
    ForestParams as FP,
    fit_gps,
    fit_outcome,
    fit_regression_forest,
    gps_density,
    gps_variance,
)


def _dataset(n, p, seed=0, t_fn=None, y_fn=None):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    t = t_fn(x, rng) if t_fn else rng.uniform(0, 10, n)
    y = y_fn(x, t, rng) if y_fn else rng.standard_normal(n)
    return Dataset(
        x=x, t=t, y=y, covariate_names=tuple(f"x{i+1}" for i in range(p))
    )


def test_forest_constant_target():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((60, 3))
    y = np.full(60, 2.5)
    forest = fit_regression_forest(x, y, FP(num_trees=5, min_node_size=5, seed=1))
    np.testing.assert_allclose(forest.predict(x), 2.5)


def test_forest_root_only_when_min_node_size_is_n():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((40, 2))
    y = rng.standard_normal(40)
    forest = fit_regression_forest(x, y, FP(num_trees=1, min_node_size=40, seed=0))
    tree = forest.trees[0]
    assert tree.feature.size == 1  # no split happened
    # the root value is the mean of its bootstrap draw of y
    assert y.min() <= tree.value[0] <= y.max()
    np.testing.assert_allclose(forest.predict(x), tree.value[0])


def test_forest_learns_linear_signal():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((500, 4))
    y = x[:, 1] + 0.1 * rng.standard_normal(500)
    forest = fit_regression_forest(
        x[:400], y[:400], FP(num_trees=50, min_node_size=5, seed=3)
    )
    pred = forest.predict(x[400:])
    resid = y[400:] - pred
    r2 = 1.0 - resid.var() / y[400:].var()
    assert r2 > 0.8


def test_forest_deterministic_given_seed():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((200, 5))
    y = rng.standard_normal(200)
    probe = rng.standard_normal((50, 5))
    a = fit_regression_forest(x, y, FP(num_trees=8, min_node_size=10, seed=9))
    b = fit_regression_forest(x, y, FP(num_trees=8, min_node_size=10, seed=9))
    np.testing.assert_array_equal(a.predict(probe), b.predict(probe))
    c = fit_regression_forest(x, y, FP(num_trees=8, min_node_size=10, seed=10))
    assert not np.array_equal(a.predict(probe), c.predict(probe))


def test_forest_threads_do_not_change_result():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((150, 3))
    y = rng.standard_normal(150)
    a = fit_regression_forest(x, y, FP(num_trees=6, seed=2, threads=1))
    b = fit_regression_forest(x, y, FP(num_trees=6, seed=2, threads=4))
    np.testing.assert_array_equal(a.predict(x), b.predict(x))


def test_forest_too_few_rows():
    with pytest.raises(TrainingError):
        fit_regression_forest(np.zeros((1, 2)), np.zeros(1), FP())
    with pytest.raises(TrainingError):
        fit_regression_forest(np.zeros((5, 2)), np.zeros(5), FP(min_node_size=10))


def test_outcome_model_memorizes_with_deep_trees():
    d = _dataset(300, 3, seed=6, y_fn=lambda x, t, rng: x[:, 0] * 2 + t)
    model = fit_outcome(d, FP(num_trees=40, min_node_size=1, seed=0))
    i = 17
    pred = model.predict_at(d.x[i][None, :], float(d.t[i]))[0]
    assert pred == pytest.approx(d.y[i], abs=0.4)


def test_outcome_model_pure_noise_predicts_mean():
    d = _dataset(400, 3, seed=7)
    model = fit_outcome(d, FP(num_trees=30, min_node_size=50, seed=0))
    preds = model.predict_at(d.x, 5.0)
    assert np.mean(np.abs(preds - d.y.mean())) < 0.5


def test_outcome_model_beats_variance_on_signal():
    d = _dataset(
        1000,
        4,
        seed=8,
        y_fn=lambda x, t, rng: 0.2 * (t - 5) ** 2 + x[:, 0] + rng.standard_normal(len(t)),
    )
    model = fit_outcome(d, FP(num_trees=50, min_node_size=10, seed=1))
    preds = np.array([
        model.predict_at(d.x[i][None, :], float(d.t[i]))[0] for i in range(0, 1000, 10)
    ])
    mse = np.mean((preds - d.y[::10]) ** 2)
    assert mse < d.y.var()


def test_gps_residual_sd_close_to_truth():
    d = _dataset(2000, 3, seed=9, t_fn=lambda x, rng: rng.standard_normal(len(x)))
    gps = fit_gps(d, FP(num_trees=30, min_node_size=100, seed=0))
    assert gps.residual_sd == pytest.approx(1.0, abs=0.1)


def test_gps_deterministic_treatment_errors():
    # t is an exact step function of x1 with a wide class gap, so every tree
    # recovers it exactly and the residual spread collapses to zero
    rng = np.random.default_rng(10)
    x1 = np.concatenate([rng.uniform(-2, -1, 100), rng.uniform(1, 2, 100)])
    x = np.column_stack([x1, rng.standard_normal(200)])
    t = np.where(x1 > 0, 3.0, 1.0)
    d = Dataset(x=x, t=t, y=rng.standard_normal(200), covariate_names=("x1", "x2"))
    with pytest.raises(DegenerateGpsError):
        fit_gps(d, FP(num_trees=10, min_node_size=5, mtry=2, seed=0))


def test_gps_density_floor_binds():
    d = _dataset(300, 2, seed=11)
    gps = fit_gps(d, FP(num_trees=10, min_node_size=20, seed=0), density_floor=0.01)
    far = float(d.t.max() + 10 * gps.residual_sd)
    assert gps_density(gps, far, d.x[0]) == 0.01
    rng = np.random.default_rng(0)
    for _ in range(1000):
        t = float(rng.uniform(-50, 50))
        x = rng.standard_normal(2)
        assert gps_density(gps, t, x) >= 0.01


def test_gps_density_normal_shape():
    d = _dataset(300, 2, seed=12)
    gps = fit_gps(d, FP(num_trees=10, min_node_size=20, seed=0))
    x = d.x[5]
    mean = float(gps.mean_forest.predict(x[None, :])[0])
    peak = gps_density(gps, mean, x)
    assert peak == pytest.approx(1.0 / (gps.residual_sd * np.sqrt(2 * np.pi)), rel=1e-12)
    # halving the sd doubles the peak
    gps2 = type(gps)(gps.mean_forest, gps.residual_sd / 2, gps.density_floor)
    assert gps_density(gps2, mean, x) == pytest.approx(2 * peak, rel=1e-12)


def test_gps_variance_is_residual_variance():
    d = _dataset(300, 2, seed=13)
    gps = fit_gps(d, FP(num_trees=10, min_node_size=20, seed=0))
    node_a = np.arange(10)
    node_b = np.arange(100, 140)
    assert gps_variance(gps, node_a) == gps_variance(gps, node_b)
    assert gps_variance(gps, node_a) == pytest.approx(gps.residual_sd**2, rel=1e-12)
    gps_half = type(gps)(gps.mean_forest, 0.5, gps.density_floor)
    assert gps_variance(gps_half, node_a) == 0.25
    with pytest.raises(ConfigError):
        gps_variance(gps, np.array([], dtype=int))


def test_nuisances_only_see_their_view():
    d = _dataset(100, 2, seed=14)
    omega1 = np.arange(50)
    view = d.subset(omega1)
    model = fit_outcome(view, FP(num_trees=3, min_node_size=10, seed=0))
    # the view owns copies of the first 50 rows; the other half is unreachable
    assert view.n == 50
    assert model.forest.n_features == 3
    with pytest.raises(IndexError):
        view.sample(77)


def test_forest_params_validation():
    with pytest.raises(ConfigError):
        ForestParams(num_trees=0)
    with pytest.raises(ConfigError):
        ForestParams(min_node_size=0)
