import json

import numpy as np
import pytest

from doseforest.data import Dataset, honest_split
from doseforest.dgp import DgpConfig, generate
from doseforest.dr import node_cate, node_drf
from doseforest.errors import (
    DegenerateGpsError,
    DimensionMismatchError,
    DoseRangeError,
    ModelFormatError,
    ModelVersionError,
)
from doseforest.forest import DoseForestModel, DoseForestParams, load, save, train
from doseforest.kernels import KernelSpec
from doseforest.nuisance import ForestParams, NuisancePair
from doseforest.splitting import SplitConfig


def small_params(**kw):
    defaults = dict(
        num_trees=8,
        grid_size=6,
        split=SplitConfig(min_node_size=10),
        nuisance=ForestParams(num_trees=10, min_node_size=5),
        seed=3,
    )
    defaults.update(kw)
    return DoseForestParams(**defaults)


@pytest.fixture(scope="module")
def sim_dataset():
    return generate(DgpConfig(n=300, p_x=6, p_u=2, p_z=2, seed=5)).dataset


@pytest.fixture(scope="module")
def trained(sim_dataset):
    return train(sim_dataset, small_params())


def oracle_nuisances():
    return NuisancePair.from_functions(
        lambda xr, dose: 0.5 * dose + xr[:, 0],
        lambda xr, dose: np.full(xr.shape[0], 0.25),
    )


def test_single_leaf_tree(sim_dataset):
    d = sim_dataset
    params = small_params(num_trees=1, split=SplitConfig(min_node_size=d.n))
    model = train(d, params)
    tree = model.trees[0]
    assert tree.feature.size == 1 and tree.leaf_values.shape[0] == 1
    # prediction equals the root estimation-half curve everywhere
    for probe in (d.x[0], d.x[123], np.zeros(d.p)):
        np.testing.assert_array_equal(
            model.predict_curve(probe).values, tree.leaf_values[0]
        )


def test_same_seed_byte_identical_models(sim_dataset, tmp_path):
    params = small_params()
    a = train(sim_dataset, params)
    b = train(sim_dataset, params)
    save(a, str(tmp_path / "a.json"))
    save(b, str(tmp_path / "b.json"))
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_threads_do_not_change_model(sim_dataset, tmp_path):
    a = train(sim_dataset, small_params(threads=1))
    b = train(sim_dataset, small_params(threads=4))
    save(a, str(tmp_path / "a.json"))
    save(b, str(tmp_path / "b.json"))
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_predict_curve_is_mean_of_tree_curves(trained, sim_dataset):
    model = trained
    x = sim_dataset.x[17]
    expected = np.zeros(model.grid.size)
    from doseforest._trees import route

    for tree in model.trees:
        leaf = tree.leaf_id[
            route(tree.feature, tree.threshold, tree.left, tree.right, x[None, :])
        ][0]
        assert leaf >= 0  # every probe lands in exactly one leaf
        expected += tree.leaf_values[leaf]
    expected /= len(model.trees)
    np.testing.assert_array_equal(model.predict_curve(x).values, expected)


def test_predict_cate_baseline_grid_and_interp(trained):
    model = trained
    x = np.zeros(model.p)
    curve = model.predict_curve(x)
    assert curve.values[model.grid.baseline_index] == 0.0
    pts = model.grid.points
    assert model.predict_cate(x, float(pts[0])) == 0.0
    for g in (1, 3, 5):
        assert model.predict_cate(x, float(pts[g])) == curve.values[g]
    mid = (pts[1] + pts[2]) / 2.0
    want = (curve.values[1] + curve.values[2]) / 2.0
    assert model.predict_cate(x, float(mid)) == pytest.approx(want, rel=1e-12)


def test_predict_errors(trained):
    model = trained
    with pytest.raises(DimensionMismatchError):
        model.predict_curve(np.zeros(model.p + 1))
    with pytest.raises(DoseRangeError):
        model.predict_cate(np.zeros(model.p), model.grid.points[-1] + 1.0)


def test_leaf_budget_and_leaf_curves_recompute(trained, sim_dataset):
    # every estimation-half row sits in exactly one leaf of every tree, and
    # each leaf curve equals the doubly robust node estimate of its members
    model = trained
    d = sim_dataset
    hs = honest_split(d, model.params.honesty_fraction, model.params.seed)
    for tree in model.trees:
        members = np.concatenate(tree.leaf_members)
        np.testing.assert_array_equal(np.sort(members), hs.omega2)
        for leaf, rows in enumerate(tree.leaf_members):
            drf = node_drf(d, rows, model.grid, model.nuisances, model.kernel)
            cate = node_cate(drf)
            np.testing.assert_allclose(
                tree.leaf_values[leaf], cate.values, rtol=1e-9, atol=1e-12
            )


def test_save_load_round_trip(trained, sim_dataset, tmp_path):
    model = trained
    path = str(tmp_path / "model.json")
    save(model, path)
    back = load(path)
    rng = np.random.default_rng(0)
    probes = rng.standard_normal((100, model.p))
    a_curves, a_base = model.predict_curve_batch(probes)
    b_curves, b_base = back.predict_curve_batch(probes)
    np.testing.assert_array_equal(a_curves, b_curves)
    np.testing.assert_array_equal(a_base, b_base)
    assert back.baseline_offset == model.baseline_offset
    doses = rng.uniform(model.grid.points[0], model.grid.points[-1], 100)
    np.testing.assert_array_equal(
        model.predict_cate_batch(probes, doses), back.predict_cate_batch(probes, doses)
    )


def test_load_rejects_truncated(trained, tmp_path):
    path = tmp_path / "model.json"
    save(trained, str(path))
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(ModelFormatError):
        load(str(path))


def test_load_rejects_wrong_version(trained, tmp_path):
    path = tmp_path / "model.json"
    save(trained, str(path))
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelVersionError):
        load(str(path))


def test_load_rejects_wrong_format(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps({"something": "else"}))
    with pytest.raises(ModelFormatError):
        load(str(path))


def test_train_rejects_constant_treatment():
    rng = np.random.default_rng(1)
    d = Dataset(
        x=rng.standard_normal((50, 2)),
        t=np.full(50, 2.0),
        y=rng.standard_normal(50),
        covariate_names=("a", "b"),
    )
    with pytest.raises(DegenerateGpsError):
        train(d, small_params())


def _honesty_setup(perturb_row=None, delta=0.0):
    rng = np.random.default_rng(11)
    n = 240
    x = rng.standard_normal((n, 3))
    t = rng.uniform(0, 10, n)
    y = np.sin(t) + x[:, 0] + 0.1 * rng.standard_normal(n)
    if perturb_row is not None:
        y = y.copy()
        y[perturb_row] += delta
    d = Dataset(x=x, t=t, y=y, covariate_names=("a", "b", "c"))
    hs = honest_split(d, 0.5, seed=2)
    params = small_params(num_trees=4, split=SplitConfig(min_node_size=15), seed=9)
    model = train(
        d,
        params,
        split=hs,
        nuisances=oracle_nuisances(),
        kernel=KernelSpec("gaussian", 1.0),
        sigma_pi=0.0,
    )
    return d, hs, model


def test_honesty_estimation_rows_do_not_shape_structure():
    # changing an estimation-half outcome must leave every tree's structure
    # untouched (with pinned nuisances) and only move leaf curves
    d0, hs, base = _honesty_setup()
    row = int(hs.omega2[4])
    _, _, bumped = _honesty_setup(perturb_row=row, delta=50.0)
    changed = False
    for t_a, t_b in zip(base.trees, bumped.trees):
        np.testing.assert_array_equal(t_a.feature, t_b.feature)
        np.testing.assert_array_equal(t_a.threshold, t_b.threshold)
        if not np.array_equal(t_a.leaf_values, t_b.leaf_values):
            changed = True
    assert changed


def test_honesty_structure_rows_do_not_shape_leaf_estimates():
    # changing a structure-half outcome may re-shape trees, but every leaf
    # curve must still be the doubly robust estimate of its estimation rows
    d0, hs, base = _honesty_setup()
    row = int(hs.omega1[7])
    d1, _, bumped = _honesty_setup(perturb_row=row, delta=50.0)
    for tree in bumped.trees:
        for leaf, rows in enumerate(tree.leaf_members):
            assert not np.isin(rows, hs.omega1).any()
            drf = node_drf(d1, rows, bumped.grid, bumped.nuisances, bumped.kernel)
            np.testing.assert_allclose(
                tree.leaf_values[leaf], node_cate(drf).values, rtol=1e-9, atol=1e-12
            )


def test_depth_stats_and_summary(trained):
    stats = trained.depth_stats()
    assert 0 <= stats["min"] <= stats["mean"] <= stats["max"]
