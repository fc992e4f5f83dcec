import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as quad_int

from mohardy.errors import DomainError, PreconditionError
from mohardy.grid import Grid, GridFunction, integrate
from mohardy.growth import builtin_family
from mohardy import maximal as mx
from mohardy.maximal import (MaximalParams, Profile, bump, conv_profile,
                             default_dictionary, default_psi0, grand_maximal, h_phi_quasinorm,
                             k_b_operator, m_loc, maximal_function, nontangential_vertical_maximal,
                             peetre_maximal, vertical_maximal)

from conftest import indicator

KINDS = ("grand", "grand0", "nontangential", "vertical", "vertical_nt", "peetre", "mloc")


@pytest.fixture(scope="module")
def g():
    return Grid.box(-4.0, 4.0, 256)


@pytest.mark.parametrize("which", KINDS)
def test_zero_maps_to_zero(g, which):
    assert np.all(maximal_function(g.zeros(), which).values == 0)


def test_mloc_constant(g):
    f = GridFunction(g, np.full(g.shape, -2.5))
    out = m_loc(f, 1.0).values
    # cubes near the box edge stick out (zero extension); the interior is exact
    h = g.spacing
    inner = np.abs(g.coordinates()[..., 0]) < 4 - 1 - h
    assert np.allclose(out[inner], 2.5, rtol=1e-13)


def _mloc_oracle(a, i, kmax):
    best = a[i]
    N = len(a)
    for k in range(1, kmax + 1):
        for s in range(i - k + 1, i + 1):
            lo, hi = max(s, 0), min(s + k, N)
            best = max(best, a[lo:hi].sum() / k)
    return best


def test_mloc_interval_scan(g):
    f = indicator(g, 0, 1)
    out = m_loc(f, 1.0).values
    kmax = int(round(1 / g.spacing))
    for x in (2.0, 1.5, 0.75, -0.5):
        i = g.locate([x])[0]
        assert out[i] == pytest.approx(_mloc_oracle(f.values, i, kmax), rel=1e-13)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_mloc_dominates_nonnegative(seed):
    g = Grid.box(0.0, 4.0, 64)
    f = GridFunction(g, np.random.default_rng(seed).exponential(size=g.shape))
    assert np.all(m_loc(f, 1.0).values >= f.values - 1e-14)


def test_vertical_below_nontangential(g):
    f = GridFunction.from_callable(g, lambda x: np.sign(np.sin(5 * x[..., 0])))
    p = MaximalParams()
    v = grand_maximal(f, p, variant="vertical").values
    nt = grand_maximal(f, p, variant="nontangential").values
    assert np.all(v <= nt + 1e-14)
    assert np.all(maximal_function(f, "grand0").values <= maximal_function(f, "grand").values + 1e-14)


def test_grand_single_profile_quadrature():
    g = Grid.box(-2.0, 2.0, 2048)
    prof = Profile(lambda u: np.clip(1 - np.abs(u[..., 0]), 0, None), 1.0, "tent")
    d = mx.TestFunctionDictionary((prof,), 2, 1.0, 1)
    p = MaximalParams(t_points=8)
    out = grand_maximal(indicator(g, 0, 1), p, d).values
    ts = p.t_grid(g)
    for x in (-0.3, 0.5, 1.2):
        direct = max(quad_int.quad(lambda y: max(0.0, 1 - abs((x - y) / t)) / t, 0, 1, points=[x - t, x, x + t])[0]
                     for t in ts)
        assert out[g.locate([x])[0]] == pytest.approx(direct, abs=2 * g.spacing / ts[0])


def test_vertical_single_scale(g):
    f = GridFunction.from_callable(g, lambda x: np.cos(x[..., 0]))
    out = vertical_maximal(f, j_max=0).values
    assert np.allclose(out, np.abs(conv_profile(f.values, g, default_psi0(1), 1.0)), atol=1e-14)


def test_vertical_fine_scales_approach_f():
    g = Grid.box(-4.0, 4.0, 1024)
    f = GridFunction.from_callable(g, lambda x: 1 + 0.5 * np.cos(x[..., 0]))
    psi = default_psi0(1)
    u = np.linspace(-1, 1, 20001)
    mass = float(np.sum(psi(u[:, None])) * (u[1] - u[0]))
    j = MaximalParams().jmax(g)
    t = 2.0 ** -j
    finest = np.abs(conv_profile(f.values, g, psi, t))
    r = np.arange(-int(1 / (t * g.spacing)) - 1, int(1 / (t * g.spacing)) + 2) * g.spacing
    discrete_mass = float(np.sum(psi(r[:, None] / t)) / t * g.spacing)
    inner = np.abs(g.coordinates()[..., 0]) < 3
    assert np.allclose(finest[inner], f.values[inner] * discrete_mass, rtol=1e-3)
    assert discrete_mass == pytest.approx(mass, rel=1e-2)


def test_vertical_rejects_zero_mass(g):
    odd = Profile(lambda u: u[..., 0] * bump(np.abs(u[..., 0])), 1.0, "odd")
    with pytest.raises(PreconditionError):
        vertical_maximal(indicator(g, 0, 1), odd, 2)


def test_peetre_dominates_vertical(g):
    f = indicator(g, 0, 1)
    j = 4
    pv = peetre_maximal(f, A=2, B=1, j_max=j).values
    assert np.all(pv >= vertical_maximal(f, j_max=j).values - 1e-14)


def test_peetre_flat_weights_give_global_sup(g):
    f = indicator(g, 0, 1)
    pv = peetre_maximal(f, A=0, B=0, j_max=3).values
    assert np.allclose(pv, pv.max(), rtol=0, atol=0)
    assert pv.max() == pytest.approx(vertical_maximal(f, j_max=3).values.max(), rel=1e-14)


def test_peetre_brute_force(g):
    f = GridFunction.from_callable(g, lambda x: bump(np.abs(x[..., 0]) / 0.5))
    A, B, j_max = 4.0, 2.0, 3
    out = peetre_maximal(f, A=A, B=B, j_max=j_max).values
    x = g.coordinates()[..., 0]
    convs = [np.abs(conv_profile(f.values, g, default_psi0(1), 2.0 ** -j)) for j in range(j_max + 1)]
    for x0 in (-3.0, 0.1, 2.5):
        i = g.locate([x0])[0]
        best = 0.0
        for j, c in enumerate(convs):
            for k in range(len(x)):
                y = abs(x[i] - x[k])
                best = max(best, c[k] / ((1 + 2 ** j * y) ** A * 2 ** (B * y)))
        assert out[i] == pytest.approx(best, rel=1e-12)
    assert out[g.locate([3.5])[0]] < out[g.locate([0.0])[0]]


def test_kb_delta_readout(g):
    i0 = g.locate([0.0])[0]
    v = np.zeros(g.shape)
    v[i0] = 1 / g.spacing
    x = g.coordinates()[..., 0]
    out = k_b_operator(GridFunction(g, v), 1.5).values
    assert np.allclose(out, 2.0 ** (-1.5 * np.abs(x - x[i0])), rtol=1e-10)


def test_kb_flat_kernel(g):
    f = GridFunction.from_callable(g, lambda x: np.exp(-x[..., 0] ** 2))
    out = k_b_operator(f, 0.0).values
    assert np.allclose(out, integrate(f.abs()), rtol=1e-10)


def test_kb_indicator_closed_form():
    g = Grid.box(-4.0, 4.0, 4096)
    out = k_b_operator(indicator(g, 0, 1), 1.0).values
    exact = (2 ** -1 - 2 ** -2) / math.log(2)
    assert out[g.locate([2.0])[0]] == pytest.approx(exact, rel=2e-3)


def test_kb_rejects_negative_b(g):
    with pytest.raises(DomainError):
        k_b_operator(g.zeros(), -1.0)


def test_h_phi_homogeneity(g):
    f = GridFunction.from_callable(g, lambda x: np.sin(2 * x[..., 0]) * bump(np.abs(x[..., 0]) / 3))
    phi = builtin_family("theta")
    base = h_phi_quasinorm(f, phi)
    for c in (0.25, 3.0, -2.0):
        assert h_phi_quasinorm(f * c, phi) == pytest.approx(abs(c) * base, rel=1e-9)


def test_h_phi_linear_is_l1_of_grand(g):
    a = GridFunction.from_callable(g, lambda x: np.sign(x[..., 0]) * (np.abs(x[..., 0]) < 0.25))
    G = maximal_function(a, "grand")
    assert h_phi_quasinorm(a, builtin_family("power", {"p": 1})) == pytest.approx(integrate(G), rel=1e-9)


def test_dictionary_is_nested_and_versioned():
    small = default_dictionary(1, 2, 1.0)
    big = default_dictionary(1, 2, 4.0)
    assert len(small) == 9 and len(big) > len(small)
    assert [p.name for p in big.profiles[:9]] == [p.name for p in small.profiles]
    assert small.version == big.version


def test_maximal_2d_runs(grid2):
    f = GridFunction.from_callable(grid2, lambda x: bump(np.sqrt(np.sum(x ** 2, -1))))
    for which in ("grand", "vertical", "vertical_nt", "mloc"):
        out = maximal_function(f, which)
        assert out.values.shape == grid2.shape and np.all(np.isfinite(out.values))


def test_unknown_kind(g):
    with pytest.raises(DomainError):
        maximal_function(g.zeros(), "nope")
