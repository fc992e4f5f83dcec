import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mohardy.errors import DomainError, NotAGrowthFunctionError
from mohardy.grid import Cube
from mohardy.growth import (GrowthFunction, TypeSamples, builtin_family, check_uniform_type,
                            default_type_samples, estimate_lower_type_index, from_descriptor,
                            quasi_subadditivity_constant, regularize)


def test_product_identity_weight():
    phi = builtin_family("product", {"weight": "one", "orlicz": {"kind": "power", "p": 1}})
    assert float(phi(np.zeros(1), 2.0)) == 2.0


def test_log_family_spot_values():
    phi = builtin_family("log", {"alpha": 1, "beta": 1, "gamma": 1})
    assert float(phi(np.zeros(1), 0.0)) == 0.0
    assert float(phi(np.zeros(1), 1.0)) == pytest.approx(1 / (1 + math.log(math.e + 1)), rel=1e-15)
    # x-dependence enters through ln(e + |x|)
    x = np.array([2.0])
    assert float(phi(x, 3.0)) == pytest.approx(3 / (math.log(math.e + 2) + math.log(math.e + 3)))


def test_sqrt_has_lower_type_half_with_constant_one():
    phi = builtin_family("power", {"p": 0.5})
    chk = check_uniform_type(phi, 0.5, "lower")
    assert chk.holds
    assert chk.worst_constant == pytest.approx(1.0, rel=1e-12)


def test_upper_type_trivial_at_s_equal_one():
    phi = builtin_family("theta")
    s = TypeSamples(np.zeros((5, 1)), np.ones(5), 2.0 ** np.arange(-2, 3))
    chk = check_uniform_type(phi, 0.0, "upper", s, constant=1.0)
    assert chk.worst_constant == 1.0 and chk.holds


def test_theta_lower_type_against_dense_sweep():
    phi = builtin_family("theta")
    samples = default_type_samples(1, "lower", kmin=-8, kmax=8)
    chk = check_uniform_type(phi, 0.5, "lower", samples)
    assert chk.holds
    # dense oracle on the same s,t range
    s = np.geomspace(2.0 ** -8, 1.0, 801)[:, None]
    t = np.geomspace(2.0 ** -8, 2.0 ** 8, 801)[None, :]
    theta = lambda u: u / np.log(np.e + u)
    dense = float(np.max(theta(s * t) / (np.sqrt(s) * theta(t))))
    assert chk.worst_constant <= dense * (1 + 1e-12)
    assert chk.worst_constant >= 0.95 * dense
    assert dense <= phi.declared_constant(0.5, "lower")


@pytest.mark.parametrize("p0", [0.25, 0.5, 0.8])
def test_lower_type_index_of_power(p0):
    phi = builtin_family("power", {"p": p0})
    assert estimate_lower_type_index(phi, 1e-3) == pytest.approx(p0, abs=1e-3)


def test_lower_type_index_linear():
    assert estimate_lower_type_index(builtin_family("power", {"p": 1.0}), 1e-3) == pytest.approx(1.0, abs=1e-3)


def test_lower_type_index_log_family():
    est = estimate_lower_type_index(builtin_family("log"), 1e-3)
    assert 0 < est <= 1


def test_lower_type_index_rejects_non_growth():
    # min(t, 1) is flat for t >= 1, so no positive lower type exists
    bad = GrowthFunction(lambda x, t: np.broadcast_to(np.minimum(t, 1.0),
                                                      np.broadcast_shapes(np.shape(x)[:-1], np.shape(t))).copy(),
                         1.0, name="flat")
    with pytest.raises(NotAGrowthFunctionError):
        estimate_lower_type_index(bad, 1e-2)


def test_unknown_family_and_bad_params():
    with pytest.raises(DomainError):
        builtin_family("nope")
    with pytest.raises(DomainError):
        from_descriptor({"alpha": 1})
    with pytest.raises(DomainError):
        builtin_family("log", {"alpha": 1.5})
    with pytest.raises(DomainError):
        builtin_family("power", {"p": -1})


def test_validate_catches_decreasing_function():
    bad = GrowthFunction(lambda x, t: np.where(np.asarray(t) > 0, 1.0 / (1 + np.asarray(t)), 0.0)
                         * np.ones(np.shape(x)[:-1]), 1.0, name="bad")
    with pytest.raises(DomainError):
        bad.validate()


def test_quasi_subadditivity_of_concave_family():
    rng = np.random.default_rng(1)
    assert quasi_subadditivity_constant(builtin_family("power", {"p": 1.0}), rng) <= 1 + 1e-12
    assert quasi_subadditivity_constant(builtin_family("theta"), rng) <= 2.0


def test_regularize_power():
    phi = builtin_family("power", {"p": 0.5})
    reg = regularize(phi)
    t = np.array([0.01, 1.0, 50.0])
    # int_0^t s^{p-1} ds = t^p / p
    assert np.allclose(reg(np.zeros((3, 1)), t), np.sqrt(t) / 0.5, rtol=1e-10)


def test_weight_measure_of_cube():
    phi = builtin_family("product", {"weight": {"kind": "exp", "rate": 1.0},
                                     "orlicz": {"kind": "power", "p": 1.0}})
    Q = Cube(0.5, 1.0)
    assert phi.weight_integral(Q, 1 / 256) == pytest.approx(math.e - 1, rel=1e-5)


def test_critical_degree():
    assert builtin_family("power", {"p": 1.0}).critical_degree(1) == 0
    assert builtin_family("theta").critical_degree(1) == 1
    assert builtin_family("power", {"p": 0.3}).critical_degree(2) == 4


@settings(max_examples=60, deadline=None)
@given(s=st.floats(1e-6, 1.0), t=st.floats(1e-6, 1e6), p=st.sampled_from([0.3, 0.5, 0.9]))
def test_theta_declared_lower_constant_holds(s, t, p):
    phi = builtin_family("theta", {"p": p})
    x = np.zeros(1)
    lhs = float(phi(x, s * t))
    rhs = phi.declared_constant(p, "lower") * s ** p * float(phi(x, t))
    assert lhs <= rhs * (1 + 1e-12)
