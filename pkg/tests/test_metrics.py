import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doseforest.data import Dataset, TreatmentGrid
from doseforest.errors import ConfigError
from doseforest.metrics import adrf_curve, pehe, qini, rmse


def test_pehe_values():
    assert pehe([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert pehe([1.0, 3.0], [0.0, 0.0]) == 2.0  # abs errors {1, 3}
    assert pehe([7.0], [0.0]) == 7.0
    with pytest.raises(ConfigError):
        pehe([1.0], [1.0, 2.0])


def test_rmse_values():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([1.0, 3.0], [0.0, 0.0]) == pytest.approx(np.sqrt(5.0))
    assert rmse([4.0, 1.0, -2.0], [1.0, -2.0, -5.0]) == pytest.approx(3.0)
    with pytest.raises(ConfigError):
        rmse([1.0], [1.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50),
    st.integers(0, 2**31 - 1),
)
def test_mae_never_exceeds_rms(errors, seed):
    truth = np.zeros(len(errors))
    pred = np.asarray(errors)
    assert pehe(pred, truth) <= rmse(pred, truth) + 1e-9


def _qini_bruteforce(scores, y, w):
    """Exhaustive prefix-sum evaluation, loop-coded."""
    n = len(scores)
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    g = [0.0]
    for k in range(1, n + 1):
        top = order[:k]
        nt = sum(1 for i in top if w[i])
        nc = k - nt
        yt = sum(y[i] for i in top if w[i])
        yc = sum(y[i] for i in top if not w[i])
        g.append(yt - (yc * nt / nc if nc > 0 else 0.0))
    area = sum((g[k - 1] + g[k]) / 2.0 for k in range(1, n + 1))
    total = g[n]
    return (area - total * n / 2.0) / (total * n / 2.0)


def test_qini_eight_row_hand_instance():
    base = [1.0, 1.0, 2.0, 2.0, 0.0, 0.0, 3.0, 3.0]
    uplift = [4.0, 4.0, 2.0, 2.0, 1.0, 1.0, 0.5, 0.5]
    w = np.array([True, False, True, False, True, False, True, False])
    y = np.array([b + (u if t else 0.0) for b, u, t in zip(base, uplift, w)])
    scores = np.asarray(uplift)
    # hand-computed: gain curve [0,5,4,7,6,5.5,7,9.5,7.5], area 47.75,
    # diagonal 30 -> (47.75 - 30) / 30
    assert qini(scores, y, w) == pytest.approx(17.75 / 30.0, rel=1e-12)
    assert qini(scores, y, w) == pytest.approx(_qini_bruteforce(uplift, list(y), list(w)))
    # negated oracle ranks worst-first: negative score
    negated = qini(-scores, y, w)
    assert negated == pytest.approx(-0.26388888888888895, rel=1e-9)
    assert negated < 0.0


@pytest.mark.parametrize("seed", range(12))
def test_qini_matches_bruteforce_small_instances(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 13))
    scores = rng.standard_normal(n)
    y = rng.standard_normal(n)
    w = rng.random(n) < 0.5
    if not w.any():
        w[0] = True
    if w.all():
        w[-1] = False
    got = qini(scores, y, w)
    want = _qini_bruteforce(list(scores), list(y), list(w))
    assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_qini_random_targeting_near_zero():
    rng = np.random.default_rng(1)
    n = 10_000
    w = rng.random(n) < 0.5
    y = rng.standard_normal(n) + w * 1.0  # positive average uplift
    scores = np.full(n, 3.14)  # equal scores: ranking is arbitrary
    assert abs(qini(scores, y, w)) < 0.02


def test_qini_group_empty_errors():
    with pytest.raises(ConfigError):
        qini([1.0, 2.0], [0.0, 1.0], [True, True])
    with pytest.raises(ConfigError):
        qini([1.0, 2.0], [0.0, 1.0], [False, False])


def test_adrf_curve_constant_evaluator():
    rng = np.random.default_rng(2)
    d = Dataset(
        x=rng.standard_normal((20, 2)),
        t=rng.uniform(0, 10, 20),
        y=rng.standard_normal(20),
        covariate_names=("a", "b"),
    )
    grid = TreatmentGrid(points=np.linspace(0, 10, 5), baseline_index=0)
    curve = adrf_curve(lambda t, x: np.full(x.shape[0], 2.5), d, grid)
    np.testing.assert_array_equal(curve, np.full(5, 2.5))


def test_adrf_curve_oracle_matches_truth():
    from doseforest.dgp import DgpConfig, drf_value, generate

    sim = generate(DgpConfig(n=40, p_x=5, p_u=2, p_z=2, seed=3))
    grid = TreatmentGrid(points=np.linspace(0.0, 5.0, 6), baseline_index=0)

    def oracle(t, x):
        return drf_value("poly", t) + sim.cate_coeff * t + sim.confound

    got = adrf_curve(oracle, sim.dataset, grid)
    want = sim.adrf_truth(grid.points)
    np.testing.assert_allclose(got, want, atol=1e-9)
