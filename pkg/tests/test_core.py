import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from onum.core import (
    Arrival,
    DomainError,
    Instance,
    LinearUtility,
    LogUtility,
    Network,
    UtilizationState,
    check_marginal_bounds,
    linear_arrival,
    log_arrival,
    make_value_function,
    phi_eval,
    phi_integral,
    phi_integral_array,
    phi_inverse,
    validate_conditions,
)
from dataclasses import replace

pos = st.floats(0.05, 50.0)
ratio = st.floats(1.0, 200.0)


def test_network_defaults():
    net = Network(3)
    assert net.capacities == (1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        Network(0)
    with pytest.raises(DomainError):
        Network(2, (1.0, 0.0))


def test_arrival_validation():
    assert Arrival(LinearUtility(1.0), (2, 0, 2), 0.5).links == (0, 2)
    with pytest.raises(DomainError):
        Arrival(LinearUtility(1.0), (), 0.5)
    with pytest.raises(DomainError):
        Arrival(LinearUtility(1.0), (0,), -0.1)
    with pytest.raises(DomainError):
        Instance(Network(2), (linear_arrival(1.0, (2,), 0.1),))


def test_log_arrival_scale_defaults_to_link_count():
    assert log_arrival(2.0, (0, 3, 4), 0.1).utility.k == 3.0


def test_utilities():
    g = LogUtility(2.0, 3.0)
    assert g.value(0.0) == 0.0
    assert g.value(1.0) == pytest.approx(6 * math.log(2))
    assert g.marginal(1.0) == pytest.approx(3.0)
    h = LinearUtility(1.5)
    assert h.value(0.0) == 0.0 and h.value(2.0) == 3.0 and h.marginal(7.0) == 1.5


@given(a=pos, k=st.integers(1, 5), y=st.floats(0.0, 5.0))
def test_log_utility_concave(a, k, y):
    g = LogUtility(a, float(k))
    h = 1e-4
    assert g.marginal(y + h) < g.marginal(y)
    # second difference nonpositive
    assert g.value(y + 2 * h) - 2 * g.value(y + h) + g.value(y) <= 1e-12 * max(1.0, a * k)


def test_make_value_function_examples():
    vf = make_value_function(1.0, math.e)
    assert vf.alpha == pytest.approx(2.0) and vf.beta == pytest.approx(0.5)
    assert vf(1.0) == pytest.approx(math.e, rel=1e-12)

    flat = make_value_function(5.0, 5.0)
    assert flat.alpha == 1.0 and flat.beta == 1.0
    assert all(flat(y) == 5.0 for y in np.linspace(0, 1, 11))

    vf3 = make_value_function(1.0, math.e ** 3)
    assert vf3.alpha == pytest.approx(4.0) and vf3.beta == pytest.approx(0.25)
    assert vf3(0.625) == pytest.approx(math.exp(1.5), rel=1e-12)


@pytest.mark.parametrize("m,M", [(0.0, 1.0), (-1.0, 1.0), (2.0, 1.0)])
def test_make_value_function_rejects(m, M):
    with pytest.raises(DomainError):
        make_value_function(m, M)


def test_phi_eval_examples(vf_e):
    assert phi_eval(vf_e, 0.3) == 1.0
    assert phi_eval(vf_e, 1.0) == pytest.approx(math.e, rel=1e-12)
    assert phi_eval(vf_e, 0.75) == pytest.approx(math.exp(0.5), rel=1e-12)
    with pytest.raises(DomainError):
        phi_eval(vf_e, 1.01)


def test_phi_integral_examples(vf_e):
    assert phi_integral(vf_e, 0.0, 0.5) == pytest.approx(0.5, abs=1e-14)
    assert phi_integral(vf_e, 0.0, 1.0) == pytest.approx(0.5 + (math.e - 1) / 2, abs=1e-12)
    assert phi_integral(vf_e, 0.5, 0.75) == pytest.approx((math.exp(0.5) - 1) / 2, abs=1e-12)
    with pytest.raises(DomainError):
        phi_integral(vf_e, 0.6, 0.5)
    with pytest.raises(DomainError):
        phi_integral(vf_e, 0.0, 1.5)


@settings(max_examples=60)
@given(m=pos, r=ratio, y0=st.floats(0, 1), y1=st.floats(0, 1))
def test_phi_integral_matches_quadrature(m, r, y0, y1):
    vf = make_value_function(m, m * r)
    y0, y1 = sorted((y0, y1))
    quad, _ = integrate.quad(lambda y: phi_eval(vf, y), y0, y1, points=[vf.beta], epsabs=1e-13,
                             epsrel=1e-13, limit=200)
    assert phi_integral(vf, y0, y1) == pytest.approx(quad, abs=1e-10 * max(1.0, m * r))


@given(m=pos, r=ratio, pts=st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_phi_integral_additive(m, r, pts):
    vf = make_value_function(m, m * r)
    a, b, c = sorted(pts)
    lhs = phi_integral(vf, a, c)
    rhs = phi_integral(vf, a, b) + phi_integral(vf, b, c)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@given(m=pos, r=ratio)
def test_phi_integral_array_agrees(m, r):
    vf = make_value_function(m, m * r)
    y0 = np.linspace(0, 1, 17)
    y1 = np.minimum(y0 + 0.2, 1.0)
    vec = phi_integral_array(vf, y0, y1)
    assert np.allclose(vec, [phi_integral(vf, a, b) for a, b in zip(y0, y1)], rtol=1e-13, atol=1e-14)


@settings(max_examples=30)
@given(m=pos, r=ratio)
def test_phi_monotone_and_continuous(m, r):
    vf = make_value_function(m, m * r)
    ys = np.linspace(0, 1, 10_001)
    vals = np.array([phi_eval(vf, float(y)) for y in ys])
    assert np.all(np.diff(vals) >= 0)
    left = phi_eval(vf, max(vf.beta - 1e-12, 0.0))
    assert phi_eval(vf, vf.beta) == pytest.approx(left, rel=1e-9)


def test_phi_inverse(vf_e):
    assert phi_inverse(vf_e, 0.5) == 0.0
    assert phi_inverse(vf_e, math.exp(0.5)) == pytest.approx(0.75)
    assert phi_inverse(vf_e, 100.0) == 1.0


def test_validate_conditions_canonical(vf_e):
    rep = validate_conditions(vf_e, 1000)
    assert rep.passed
    assert abs(rep.min_growth_slack) < 1e-4


def test_validate_conditions_halved_alpha_fails(vf_e):
    bad = replace(vf_e, alpha=vf_e.alpha / 2)
    rep = validate_conditions(bad, 1000)
    assert rep.endpoints_ok and rep.monotone_ok
    assert not rep.growth_ok and not rep.passed


def test_validate_conditions_degenerate():
    rep = validate_conditions(make_value_function(5.0, 5.0), 1000)
    assert rep.passed


def test_validate_conditions_needs_two_points(vf_e):
    with pytest.raises(DomainError):
        validate_conditions(vf_e, 1)


@settings(max_examples=40)
@given(m=pos, r=ratio)
def test_canonical_always_valid(m, r):
    assert validate_conditions(make_value_function(m, m * r), 200).passed


def test_check_marginal_bounds_examples():
    net = Network(2)
    assert check_marginal_bounds(Instance(net, (log_arrival(2.0, (0,), 0.5),)), 1.0, 3.0)
    assert not check_marginal_bounds(Instance(net, (log_arrival(4.0, (0,), 0.5),)), 1.0, 3.0)
    assert check_marginal_bounds(Instance(net, (linear_arrival(2.0, (0, 1), 1.0),)), 1.0, 3.0)
    assert check_marginal_bounds(Instance(net), 1.0, 3.0)


def test_utilization_state():
    s = UtilizationState.zeros(3)
    t = s.copy()
    t.omega[0] = 0.5
    assert s.omega[0] == 0.0 and s.feasible()
    assert not UtilizationState(np.array([1.2])).feasible()
