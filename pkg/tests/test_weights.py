import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mohardy.errors import DomainError
from mohardy.grid import Grid, GridFunction
from mohardy.growth import builtin_family
from mohardy.weights import (CubeLattice, a_p_loc_constant, a_p_phi_alpha_constant, a_p_ratios, box_sums,
                             check_doubling, check_measure_ratio, default_lattice, ratio_report_csv)


def _brute_ap(w, p, lattice, normalizer=None):
    """Loop over lattice cubes, computing each average directly."""
    h = lattice.grid.spacing
    worst = 0.0
    for i, (s, k) in enumerate(zip(lattice.starts, lattice.sizes)):
        block = w[s[0]:s[0] + k] if w.ndim == 1 else w[s[0]:s[0] + k, s[1]:s[1] + k]
        vol = (k * h) ** w.ndim
        N = vol if normalizer is None else normalizer[i]
        A = block.sum() * h ** w.ndim / N
        if p == 1:
            r = A / block.min()
        else:
            r = A * (np.sum(block ** (-1 / (p - 1))) * h ** w.ndim / N) ** (p - 1)
        worst = max(worst, r)
    return worst


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 4.0])
def test_unit_weight_is_exactly_one(grid1, p):
    lat = default_lattice(grid1, 1.0, 4)
    assert a_p_loc_constant(GridFunction(grid1, np.ones(grid1.shape)), p, lat) == 1.0


@pytest.mark.parametrize("c", [0.125, 3.0, 1024.0])
def test_constant_weight_is_one(grid1, c):
    lat = default_lattice(grid1, 1.0, 4)
    for p in (1.0, 2.0):
        assert a_p_loc_constant(GridFunction(grid1, np.full(grid1.shape, c)), p, lat) == pytest.approx(1.0, abs=1e-12)


def test_exponential_weight_against_brute_force(grid1):
    lat = default_lattice(grid1, 1.0, 4)
    w = np.exp(np.abs(grid1.coordinates()[..., 0]))
    got = a_p_loc_constant(GridFunction(grid1, w), 1.0, lat)
    assert math.isfinite(got)
    assert got == pytest.approx(_brute_ap(w, 1.0, lat), rel=1e-12)
    # the exponential weight is locally A_1 with a mild constant
    assert got < math.e


def test_growth_function_slices(grid1):
    lat = default_lattice(grid1, 1.0, 8)
    phi = builtin_family("product", {"weight": {"kind": "exp", "rate": 1.0}, "orlicz": {"kind": "power", "p": 0.8}})
    w = np.exp(np.abs(grid1.coordinates()[..., 0]))
    assert a_p_loc_constant(phi, 2.0, lat) == pytest.approx(_brute_ap(w, 2.0, lat), rel=1e-12)
    rows = []
    a_p_loc_constant(phi, 2.0, lat, report=rows)
    assert len(rows) == len(lat)
    assert ratio_report_csv(rows).splitlines()[0] == "c0,side,t,ratio"


def test_phi_alpha_constant_unit_weight(grid1):
    lat = default_lattice(grid1, math.inf, 8)
    one = GridFunction(grid1, np.ones(grid1.shape))
    for alpha in (0.5, 1.0, 3.0):
        v = a_p_phi_alpha_constant(one, 1.0, alpha, lat)
        assert v <= 1.0
        # unit cubes give (1 + 1)^(-alpha); the worst is the smallest cube
        assert v == pytest.approx((1 + lat.volumes.min()) ** -alpha)


def test_phi_alpha_zero_recovers_global_form(grid1):
    lat = default_lattice(grid1, math.inf, 8)
    w = GridFunction(grid1, 1 + np.abs(grid1.coordinates()[..., 0]) ** 0.5)
    assert a_p_phi_alpha_constant(w, 2.0, 0.0, lat) == pytest.approx(a_p_loc_constant(w, 2.0, lat), rel=1e-14)


def test_phi_alpha_polynomial_weight_brute_force():
    g = Grid.box(-8.0, 8.0, 256)
    lat = default_lattice(g, math.inf, 4)
    w = (1 + np.abs(g.coordinates()[..., 0])) ** 0.5
    norm = (1 + lat.volumes) * lat.volumes
    got = a_p_phi_alpha_constant(GridFunction(g, w), 2.0, 1.0, lat)
    assert got == pytest.approx(_brute_ap(w, 2.0, lat, norm), rel=1e-12)


def test_doubling_lebesgue(grid1):
    lat = default_lattice(grid1, math.inf, 8)
    rep = check_doubling(builtin_family("power", {"p": 1.0}), [1.0], lat)
    # translation invariance: equal cubes have equal measure, so 2Q/Q = 2 exactly
    assert rep.worst_ratio_small == pytest.approx(2.0, rel=1e-14)
    assert rep.worst_ratio_large <= 2.0 + 1e-14


def test_doubling_lebesgue_2d(grid2):
    lat = default_lattice(grid2, 1.0, 4)
    rep = check_doubling(builtin_family("power", {"p": 1.0}), [1.0], lat)
    assert rep.worst_ratio_small == pytest.approx(4.0, rel=1e-14)


def test_doubling_exponential_weight_finite(grid1):
    phi = builtin_family("product", {"weight": {"kind": "exp", "rate": 1.0}, "orlicz": {"kind": "power", "p": 1.0}})
    rep = check_doubling(phi, [1.0], default_lattice(grid1, math.inf, 8))
    assert math.isfinite(rep.worst_ratio_small) and math.isfinite(rep.worst_ratio_large)
    assert rep.worst_ratio_small >= 2.0


def test_measure_ratio_examples(grid1):
    one = builtin_family("power", {"p": 1.0})
    unit = CubeLattice(grid1, np.array([[128]]), np.array([64]))
    # E = Q: 1/phi_alpha(|Q|)
    assert check_measure_ratio(one, 1.0, 1.0, unit, [1.0], depth=0) == pytest.approx(0.5)
    # E = half of a unit cube with p = 1, alpha = 1 gives (1/2)/2 / (1/2)
    assert check_measure_ratio(one, 1.0, 1.0, unit, [1.0], depth=1) == pytest.approx(0.5)


def test_measure_ratio_polynomial_weight_scan(grid1):
    phi = builtin_family("phi_alpha_weighted", {"gamma": 0.5, "p": 1.0, "alpha": 1.0})
    v = check_measure_ratio(phi, 2.0, 1.0, default_lattice(grid1, 4.0, 16), [1.0], depth=3)
    assert 0 < v < math.inf


def test_rejects_bad_inputs(grid1):
    lat = default_lattice(grid1, 1.0, 4)
    with pytest.raises(DomainError):
        a_p_ratios(np.zeros(grid1.shape), 2.0, lat)
    with pytest.raises(DomainError):
        a_p_ratios(np.ones(grid1.shape), 0.5, lat)
    with pytest.raises(DomainError):
        CubeLattice(grid1, np.array([[0]]), np.array([512]), 1.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31), p=st.sampled_from([1.0, 2.0, 3.0]))
def test_ap_at_least_one_and_scale_invariant(seed, p):
    g = Grid.box(0.0, 4.0, 64)
    rng = np.random.default_rng(seed)
    w = np.exp(rng.uniform(-2, 2, g.shape))
    lat = default_lattice(g, 1.0, 2)
    a = a_p_loc_constant(GridFunction(g, w), p, lat)
    assert a >= 1 - 1e-12
    assert a_p_loc_constant(GridFunction(g, 4.0 * w), p, lat) == a


def test_box_sums_match_slicing():
    rng = np.random.default_rng(3)
    v = rng.standard_normal((16, 16))
    starts = np.array([[0, 0], [3, 5], [8, 8]])
    sizes = np.array([4, 2, 8])
    want = [v[a:a + k, b:b + k].sum() for (a, b), k in zip(starts, sizes)]
    assert np.allclose(box_sums(v, starts, sizes), want, atol=1e-12)
