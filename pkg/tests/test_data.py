import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doseforest.data import (
    CsvSchema,
    Dataset,
    honest_split,
    load_csv,
    save_csv,
    treatment_grid,
)
from doseforest.errors import (
    ConfigError,
    CsvParseError,
    EmptyDatasetError,
    SchemaError,
)


def make_dataset(n=10, p=2, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(
        x=rng.standard_normal((n, p)),
        t=rng.uniform(0, 20, n),
        y=rng.standard_normal(n),
        covariate_names=tuple(f"x{i+1}" for i in range(p)),
    )


def test_load_csv_three_rows(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y,t,x1,x2\n1.0,0.5,0.1,0.2\n2.0,1.5,0.3,0.4\n3.0,2.5,0.5,0.6\n")
    d = load_csv(str(path), CsvSchema(outcome="y", treatment="t"))
    assert d.n == 3 and d.p == 2
    assert d.covariate_names == ("x1", "x2")
    assert d.t_min == 0.5 and d.t_max == 2.5
    np.testing.assert_array_equal(d.y, [1.0, 2.0, 3.0])


def test_load_csv_constant_treatment_is_fine(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y,t,x1\n1.0,2.0,0.1\n2.0,2.0,0.3\n")
    d = load_csv(str(path), CsvSchema(outcome="y", treatment="t"))
    assert d.t_min == d.t_max == 2.0  # positivity is checked at training, not here


def test_load_csv_parse_error_names_row_and_column(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y,t,x1\n1.0,0.5,0.1\n2.0,abc,0.3\n")
    with pytest.raises(CsvParseError, match="row 2.*'t'"):
        load_csv(str(path), CsvSchema(outcome="y", treatment="t"))


def test_load_csv_missing_column(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y,x1\n1.0,0.1\n")
    with pytest.raises(SchemaError, match="'t'"):
        load_csv(str(path), CsvSchema(outcome="y", treatment="t"))


def test_load_csv_empty(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("")
    with pytest.raises(EmptyDatasetError):
        load_csv(str(path), CsvSchema(outcome="y", treatment="t"))
    path.write_text("y,t,x1\n")
    with pytest.raises(EmptyDatasetError):
        load_csv(str(path), CsvSchema(outcome="y", treatment="t"))


def test_load_csv_nan_rejected(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y,t,x1\nnan,0.5,0.1\n")
    with pytest.raises(CsvParseError, match="row 1"):
        load_csv(str(path), CsvSchema(outcome="y", treatment="t"))


def test_load_csv_explicit_covariates(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y,t,x1,junk,x2\n1.0,0.5,0.1,9,0.2\n")
    d = load_csv(str(path), CsvSchema(outcome="y", treatment="t", covariates=("x1", "x2")))
    assert d.covariate_names == ("x1", "x2")
    np.testing.assert_array_equal(d.x, [[0.1, 0.2]])


def test_csv_round_trip_bit_identical(tmp_path):
    rng = np.random.default_rng(3)
    d = Dataset(
        x=rng.standard_normal((50, 3)) * 1e-7,
        t=rng.uniform(-5, 5, 50),
        y=rng.standard_normal(50) * 1e9,
        covariate_names=("a", "b", "c"),
    )
    path = tmp_path / "d.csv"
    save_csv(d, str(path))
    back = load_csv(str(path), CsvSchema(outcome="y", treatment="t"))
    np.testing.assert_array_equal(back.x, d.x)
    np.testing.assert_array_equal(back.t, d.t)
    np.testing.assert_array_equal(back.y, d.y)
    save_csv(back, str(tmp_path / "d2.csv"))
    assert (tmp_path / "d.csv").read_bytes() == (tmp_path / "d2.csv").read_bytes()


def test_honest_split_deterministic():
    d = make_dataset(n=10)
    a = honest_split(d, 0.5, seed=7)
    b = honest_split(d, 0.5, seed=7)
    np.testing.assert_array_equal(a.omega1, b.omega1)
    np.testing.assert_array_equal(a.omega2, b.omega2)


def test_honest_split_exact_and_rounded_sizes():
    assert honest_split(make_dataset(n=100), 0.5, seed=0).omega1.size == 50
    assert honest_split(make_dataset(n=101), 0.5, seed=0).omega1.size in (50, 51)


def test_honest_split_bad_fraction():
    d = make_dataset()
    for frac in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ConfigError):
            honest_split(d, frac, seed=0)


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(2, 200),
    fraction=st.floats(0.01, 0.99),
    seed=st.integers(0, 2**31 - 1),
)
def test_honest_split_is_partition(n, fraction, seed):
    d = make_dataset(n=n)
    hs = honest_split(d, fraction, seed)
    merged = np.concatenate([hs.omega1, hs.omega2])
    assert np.array_equal(np.sort(merged), np.arange(n))
    assert hs.omega1.size >= 1 and hs.omega2.size >= 1
    assert abs(hs.omega1.size / n - fraction) <= 1.0 / n + 1e-12


def test_treatment_grid_points():
    d = make_dataset(n=30)
    d = Dataset(x=d.x, t=np.linspace(0, 20, 30), y=d.y, covariate_names=d.covariate_names)
    g = treatment_grid(d, 5)
    np.testing.assert_allclose(g.points, [0, 5, 10, 15, 20])
    assert g.baseline_index == 0
    assert treatment_grid(d, 5, baseline=4.9).baseline_index == 1  # snaps to 5


def test_treatment_grid_errors():
    d = make_dataset(n=5)
    with pytest.raises(ConfigError):
        treatment_grid(d, 1)
    with pytest.raises(ConfigError):
        treatment_grid(d, 5, baseline=d.t_max + 1.0)


@settings(max_examples=30, deadline=None)
@given(g=st.integers(2, 64), lo=st.floats(-100, 100), width=st.floats(0.1, 1000))
def test_treatment_grid_uniform_spacing(g, lo, width):
    t = np.linspace(lo, lo + width, max(g, 2))
    d = Dataset(
        x=np.zeros((t.size, 1)), t=t, y=np.zeros(t.size), covariate_names=("x1",)
    )
    pts = treatment_grid(d, g).points
    gaps = np.diff(pts)
    assert np.all(np.abs(gaps - gaps[0]) <= 1e-12 * max(1.0, abs(lo) + width))


def test_subset_cannot_address_rest():
    d = make_dataset(n=10)
    view = d.subset(np.arange(5))
    assert view.n == 5
    np.testing.assert_array_equal(view.y, d.y[:5])
    with pytest.raises(IndexError):
        view.sample(7)
