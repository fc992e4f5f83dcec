import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mohardy.errors import DomainError
from mohardy.grid import Cube, Grid, GridFunction, dilate_translate, integrate, sample_points

from conftest import indicator


def test_cube_convention():
    Q = Cube(0.0, 1.0)
    assert np.allclose(Q.lo, [-0.5]) and np.allclose(Q.hi, [0.5])
    Q2 = Cube((0.0, 0.0), 2.0)
    assert np.allclose(Q2.lo, [-1, -1]) and Q2.volume == 4.0
    with pytest.raises(DomainError):
        Cube(0.0, 0.0)


def test_grid_rejects_bad_dimension():
    with pytest.raises(DomainError):
        Grid.box(0, 1, 8, 3)


def test_integrate_constant_on_unit_interval():
    g = Grid.box(-1.0, 2.0, 300)
    f = GridFunction(g, np.ones(g.shape))
    assert abs(integrate(f, Cube(0.5, 1.0)) - 1.0) <= g.spacing


def test_integrate_zero_is_exact(grid1):
    assert integrate(grid1.zeros()) == 0.0


def test_integrate_linear_oracle():
    g = Grid.box(0.0, 1.0, 1024)
    f = GridFunction.from_callable(g, lambda x: x[..., 0])
    # antiderivative x^2/2 on [0, 1]
    assert integrate(f) == pytest.approx(0.5, abs=1e-3)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_integrate_affine_is_midpoint_exact(a, b):
    g = Grid.box(0.0, 2.0, 64)
    f = GridFunction.from_callable(g, lambda x: a * x[..., 0] + b)
    assert integrate(f) == pytest.approx(2 * a + 2 * b, abs=1e-12)


def test_dilate_translate_identity(grid1):
    f = GridFunction.from_callable(grid1, lambda x: np.exp(-x[..., 0] ** 2))
    assert np.allclose(dilate_translate(f, 1.0, 0.0).values, f.values, atol=1e-14)


def test_dilate_translate_preserves_mass(grid1):
    f = GridFunction.from_callable(grid1, lambda x: np.exp(-4 * x[..., 0] ** 2))
    for t, shift in ((0.5, 0.3), (1.5, -0.7)):
        out = dilate_translate(f, t, shift)
        assert abs(integrate(out) - integrate(f)) <= 2 * grid1.spacing


def test_dilate_box_bump_2d():
    g = Grid.box(-2.0, 2.0, 128, 2)
    box = GridFunction.from_callable(g, lambda x: np.prod(np.clip(2 - 2 * np.abs(x), 0, 1), axis=-1))
    out = dilate_translate(box, 0.5)
    # peak quadruples, support halves
    assert out.values.max() == pytest.approx(4 * box.values.max(), rel=1e-12)
    supp = g.coordinates()[out.values > 1e-12]
    assert np.abs(supp).max() <= 0.5 + g.spacing


def test_dilate_rejects_nonpositive(grid1):
    with pytest.raises(DomainError):
        dilate_translate(grid1.zeros(), 0.0)


def test_bytes_and_csv_round_trip(grid2, tmp_path):
    rng = np.random.default_rng(0)
    f = GridFunction(grid2, rng.standard_normal(grid2.shape))
    g = GridFunction.from_bytes(f.to_bytes())
    assert g.grid == f.grid and np.array_equal(g.values, f.values)
    p = tmp_path / "f.csv"
    f.to_csv(p)
    assert np.array_equal(GridFunction.from_csv(grid2, p).values, f.values)


def test_sample_points(grid1):
    f = indicator(grid1, 0.0, 1.0)
    assert list(sample_points(grid1, [[0.5], [2.0]], f)) == [1.0, 0.0]
