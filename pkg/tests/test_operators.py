import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from mohardy.corpus import shipped_atom_functions
from mohardy.errors import DomainError, PreconditionError, ResolutionError
from mohardy.grid import Grid, GridFunction
from mohardy.growth import builtin_family
from mohardy.operators import (LocalRieszKernel, Symbol, boundedness_experiment, cutoff,
                               far_field_constant, psdo_apply, psdo_operator, riesz_local,
                               riesz_multiplier_bound, riesz_operator)


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(-1 / (1 - u[inside] ** 2))
    return out


@pytest.fixture(scope="module")
def g():
    return Grid.box(-4.0, 4.0, 256)


# -- local Riesz transforms ------------------------------------------------------


def test_cutoff_profile():
    x = np.array([[0.0], [0.5], [0.75], [1.0], [1.5]])
    v = cutoff(x)
    assert v[0] == 1 and v[1] == 1 and v[3] == 0 and v[4] == 0
    assert 0 < v[2] < 1


def test_kernel_is_odd(g):
    k = LocalRieszKernel.build(g, 1)
    assert np.allclose(k.values, -k.values[::-1], atol=0)
    assert abs(k.total) < 1e-12
    assert k.radius_cells == math.ceil(1 / g.spacing)


def test_kernel_2d_odd_in_its_direction():
    g2 = Grid.box(-4.0, 4.0, 64, 2)
    k = LocalRieszKernel.build(g2, 2)
    assert np.allclose(k.values, -k.values[:, ::-1])
    assert np.allclose(k.values, k.values[::-1, :])


def test_riesz_annihilates_constants_inside(g):
    r = riesz_local(GridFunction(g, np.full(g.shape, 2.0)), 1).values
    x = g.coordinates()[..., 0]
    interior = np.abs(x) < 4 - 1 - g.spacing
    assert np.max(np.abs(r[interior])) < 1e-12


def test_riesz_of_even_function_vanishes_at_origin():
    g = Grid.box(-4.0, 4.0, 255)
    x = g.coordinates()[..., 0]
    centre = int(np.argmin(np.abs(x)))
    assert x[centre] == pytest.approx(0.0, abs=1e-14)
    f = GridFunction(g, np.exp(-4 * x ** 2))
    assert abs(riesz_local(f, 1).values[centre]) < 1e-12


@pytest.mark.parametrize("x0", [0.3, 0.6, 0.9])
def test_riesz_narrow_bump_against_quadrature(x0):
    g = Grid.box(-4.0, 4.0, 4096)
    width = 0.1
    f = GridFunction.from_callable(g, lambda x: _bump(x[..., 0] / width))
    r = riesz_local(f, 1)
    i = g.locate([x0])[0]
    xi = g.coordinates()[i, 0]
    kern = lambda y: (xi - y) / (xi - y) ** 2 * cutoff(np.array([[xi - y]]))[0] * _bump(y / width)
    want = integrate.quad(kern, -width, width, epsabs=1e-14, limit=200)[0]
    assert r.values[i] == pytest.approx(want, rel=1e-7)


def test_riesz_requires_resolution():
    with pytest.raises(ResolutionError):
        riesz_local(Grid.box(-4.0, 4.0, 32).zeros(), 1)


def test_riesz_direction_range(g):
    with pytest.raises(DomainError):
        riesz_local(g.zeros(), 2)


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 32 - 1))
def test_riesz_linear(a, b, seed):
    grid = Grid.box(-4.0, 4.0, 128)
    rng = np.random.default_rng(seed)
    f = GridFunction(grid, rng.standard_normal(grid.shape))
    h = GridFunction(grid, rng.standard_normal(grid.shape))
    lhs = riesz_local(f * a + h * b, 1).values
    rhs = a * riesz_local(f, 1).values + b * riesz_local(h, 1).values
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_riesz_l2_ratio_below_multiplier_bound(g):
    rng = np.random.default_rng(5)
    bound = riesz_multiplier_bound(g, 1)
    assert math.isfinite(bound) and bound > 0
    phi = builtin_family("power", {"p": 1.0})
    corpus = [GridFunction(g, rng.standard_normal(g.shape)) for _ in range(5)]
    res = boundedness_experiment(riesz_operator(1), phi, corpus, "weighted_Lp", p=2.0)
    assert 0 < res.worst <= bound * (1 + 1e-9)


def test_riesz_bounded_on_shipped_atoms(g):
    phi = builtin_family("theta")
    atoms = [f for f, _, _ in shipped_atom_functions(g)]
    res = boundedness_experiment(riesz_operator(1), phi, atoms, "h_phi")
    assert len(res.ratios) == len(atoms)
    assert res.worst < 100


# -- pseudo-differential operators ----------------------------------------------


def test_identity_symbol(g):
    rng = np.random.default_rng(0)
    f = GridFunction(g, rng.standard_normal(g.shape))
    out = psdo_apply(Symbol.identity(1), f)
    assert not np.iscomplexobj(out.values)
    assert np.allclose(out.values, f.values, atol=1e-12)


def test_multiplier_symbol(g):
    a = lambda x: 1.0 + 0.5 * np.sin(x[..., 0])
    f = GridFunction.from_callable(g, lambda x: np.exp(-x[..., 0] ** 2))
    out = psdo_apply(Symbol.multiplier(a, 1, bound=1.5), f)
    assert np.allclose(out.values, a(g.coordinates()) * f.values, atol=1e-12)


def _direct_sum(sigma, f, pad):
    """``Tf`` from an explicit DFT matrix on the padded torus."""
    grid = f.grid
    N = grid.points_per_axis
    M = pad * N
    h = grid.spacing
    big = np.zeros(M)
    big[:N] = f.values
    m = np.arange(M)
    D = np.exp(-2j * np.pi * np.outer(m, m) / M)
    F = D @ big
    xi = np.fft.fftfreq(M, h)
    x = grid.coordinates()[..., 0]
    out = np.empty(N, dtype=complex)
    for i in range(N):
        s = sigma(np.array([[x[i]]]), xi[:, None])
        out[i] = np.sum(s * np.exp(2j * np.pi * i * m / M) * F) / M
    return out


def test_smoothing_on_spike_matches_direct_sum():
    grid = Grid.box(-4.0, 4.0, 64)
    v = np.zeros(grid.shape)
    v[30:32] = 5.0
    f = GridFunction(grid, v)
    sigma = Symbol.smoothing(1, 0.5)
    fast = psdo_apply(sigma, f)
    slow = _direct_sum(sigma, f, 2)
    assert np.allclose(fast.values, slow.real, atol=1e-10)
    assert np.max(np.abs(slow.imag)) < 1e-10
    general = Symbol(sigma.evaluator, 1, sigma.bounds, name="general")
    assert np.allclose(psdo_apply(general, f).values, fast.values, atol=1e-10)


def test_smoothing_bound_dominates_exact_derivatives():
    xi = np.linspace(-200, 200, 400_001)
    q = 1 + xi ** 2
    derivs = [q ** -0.5, -xi * q ** -1.5, (2 * xi ** 2 - 1) * q ** -2.5,
              3 * xi * (3 - 2 * xi ** 2) * q ** -3.5]
    worst = max(float(np.max(np.abs(d) * (1 + np.abs(xi)) ** k)) for k, d in enumerate(derivs))
    assert 5.8 < worst < 6.0
    amp = 0.5
    assert Symbol.smoothing(1, amp).bound((0,), (3,)) >= worst * (1 + amp)


def test_symbol_checks():
    assert Symbol.identity(1).check().ok
    assert Symbol.smoothing(1).check().ok
    assert Symbol.smoothing(2).check().ok
    growing = Symbol(lambda x, xi: np.sqrt(np.sum(xi ** 2, axis=-1)) + 0 * x[..., 0], 1, 10.0,
                     name="abs-xi")
    assert not growing.check().ok
    with pytest.raises(PreconditionError):
        psdo_apply(growing, Grid.box(-1.0, 1.0, 16).zeros())
    with pytest.raises(PreconditionError):
        psdo_operator(growing)


def test_psdo_rejects_bad_arguments(g):
    with pytest.raises(DomainError):
        psdo_apply(Symbol.identity(2), g.zeros())
    with pytest.raises(DomainError):
        psdo_apply(Symbol.identity(1), g.zeros(), pad=0)


def test_psdo_2d_identity():
    g2 = Grid.box(-4.0, 4.0, 32, 2)
    rng = np.random.default_rng(1)
    f = GridFunction(g2, rng.standard_normal(g2.shape))
    assert np.allclose(psdo_apply(Symbol.identity(2), f).values, f.values, atol=1e-12)


def test_smoothing_l2_ratio_bounded(g):
    rng = np.random.default_rng(2)
    corpus = [GridFunction(g, rng.standard_normal(g.shape)) for _ in range(4)] + [g.zeros()]
    phi = builtin_family("power", {"p": 1.0})
    res = boundedness_experiment(psdo_operator(Symbol.smoothing(1, 0.5)), phi, corpus,
                                 "weighted_Lp")
    assert res.skipped == [4]
    # |a| <= 1.5 and |b| <= 1 bound the L^2 ratio
    assert res.worst <= 1.5 * (1 + 1e-9)


def test_experiment_norm_errors(g):
    phi = builtin_family("theta")
    with pytest.raises(DomainError):
        boundedness_experiment(lambda f: f, phi, [g.zeros()], "sobolev")
    with pytest.raises(DomainError):
        boundedness_experiment(lambda f: f, phi, [g.zeros()], "bmo_phi")
    with pytest.raises(DomainError):
        boundedness_experiment(lambda f: f, phi, [object()], "weighted_Lp")


# -- far field ---------------------------------------------------------------------


def test_far_field_constant(g):
    x = g.coordinates()[..., 0]
    G = GridFunction(g, 1.0 / np.maximum(np.abs(x - 0.5), 1e-3) ** 2)
    assert far_field_constant(G, [0.5], 2.0, 1.0) == pytest.approx(1.0)
    assert far_field_constant(G, [0.5], 1.0, 1.0) == pytest.approx(1.0 / np.min(np.abs(x - 0.5)[np.abs(x - 0.5) >= 1]))
    with pytest.raises(DomainError):
        far_field_constant(G, [0.0], 2.0, 100.0)


def test_riesz_far_field_decay(g):
    f = GridFunction.from_callable(g, lambda x: _bump(x[..., 0] / 0.2) * x[..., 0])
    r = riesz_local(f, 1)
    # the local kernel is cut off, so the transform vanishes beyond distance 1.2
    x = g.coordinates()[..., 0]
    assert np.max(np.abs(r.values[np.abs(x) > 1.2 + g.spacing])) < 1e-15
    assert far_field_constant(r, [0.0], 2.0, 0.5) < math.inf
