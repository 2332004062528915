import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import phi_power
from toadfront import (DomainError, PhiProfile, Regime, TradeoffSpec, classify_regime, eta,
                       eval_m, eval_phi)
from toadfront.model import eta_ratio_constant, phi_sandwich_constant

SPECS = [
    TradeoffSpec.power_law(1.0, 1 / 3),
    TradeoffSpec.power_law(0.1, 2 / 3, 0.1),
    TradeoffSpec.power_law(0.3, 1.0),
    TradeoffSpec.power_law(2.0, 4 / 3, 0.5),
    TradeoffSpec.log_power(2.0, 1.0),
    TradeoffSpec.log_power(1.0, 2.5, 2.0),
    TradeoffSpec.linear_plus(0.7),
    TradeoffSpec.linear_plus(0.7, TradeoffSpec.power_law(1.0, 0.5)),
    TradeoffSpec.zero(1.0),
    TradeoffSpec.tabulated([(1.0, 0.0), (2.0, 0.5), (4.0, 0.9), (8.0, 2.0)]),
]


def test_m_values():
    assert eval_m(TradeoffSpec.power_law(1, 1), 1.0) == 0.0
    assert eval_m(TradeoffSpec.power_law(1, 2), 3.0) == pytest.approx(8.0, abs=1e-14)
    assert eval_m(TradeoffSpec.log_power(2, 1), math.e) == pytest.approx(2.0, abs=1e-14)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_m_vanishes_at_theta_min(spec):
    assert eval_m(spec, spec.theta_min) == 0.0


def test_m_rejects_below_theta_min():
    with pytest.raises(DomainError):
        eval_m(TradeoffSpec.power_law(1, 1), 0.5)


def test_constructor_validation():
    with pytest.raises(DomainError):
        TradeoffSpec.power_law(-1, 1)
    with pytest.raises(DomainError):
        TradeoffSpec.tabulated([(1.0, 0.0), (2.0, -1.0)])
    with pytest.raises(DomainError):
        TradeoffSpec("bogus")


@pytest.mark.parametrize("spec,limit", [
    (TradeoffSpec.power_law(1, 0.5), 0.0),
    (TradeoffSpec.power_law(0.3, 1.0), 0.3),
    (TradeoffSpec.power_law(1, 2.0), math.inf),
    (TradeoffSpec.log_power(1, 3.0), 0.0),
    (TradeoffSpec.linear_plus(0.7), 0.49),
    (TradeoffSpec.zero(), 0.0),
])
def test_regime_limit(spec, limit):
    assert spec.regime_limit == pytest.approx(limit, rel=1e-12)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_dict_round_trip(spec):
    assert TradeoffSpec.from_dict(spec.to_dict()) == spec


@given(st.sampled_from(SPECS), st.floats(0, 50), st.floats(0, 50))
def test_monotone(spec, a, b):
    t1, t2 = spec.theta_min + min(a, b), spec.theta_min + max(a, b)
    assert eval_m(spec, t2) >= eval_m(spec, t1)
    prof = _profile(spec)
    assert eval_phi(prof, t2) >= eval_phi(prof, t1) - 1e-12


_PROFILES = {}


def _profile(spec):
    if spec not in _PROFILES:
        _PROFILES[spec] = PhiProfile(spec)
    return _PROFILES[spec]


def test_phi_closed_form_and_oracle():
    p1 = PhiProfile(TradeoffSpec.power_law(1, 1))
    assert eval_phi(p1, 1.0) == 0.0
    assert eval_phi(p1, 2.0) == pytest.approx(2 / 3, rel=1e-12)
    p13 = PhiProfile(TradeoffSpec.power_law(1, 1 / 3))
    for th in (1.5, 8.0, 100.0, 1e4):
        assert eval_phi(p13, th) == pytest.approx(phi_power(1.0, 1 / 3, 1.0, th), rel=1e-10)


def test_phi_quadrature_matches_closed_form():
    # the p=2 closed form against the generic quadrature path (p slightly off 2)
    exact = PhiProfile(TradeoffSpec.power_law(1.5, 2.0))
    near = PhiProfile(TradeoffSpec.power_law(1.5, 2.0 + 1e-12))
    for th in (1.2, 5.0, 300.0):
        assert eval_phi(near, th) == pytest.approx(eval_phi(exact, th), rel=1e-9)


def test_eta_values():
    prof = PhiProfile(TradeoffSpec.power_law(1, 1))
    assert eta(prof, 1.0, 2 / 3) == pytest.approx(2.0, rel=1e-12)
    assert eta(prof, 1.0, 0.0) == 1.0
    assert eta(prof, 1.0, 1e-12) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DomainError):
        eta(PhiProfile(TradeoffSpec.zero()), 1.0, 1.0)


@given(st.sampled_from([s for s in SPECS if s.kind != "zero"]),
       st.floats(0.05, 5.0), st.floats(1e-2, 1e4))
def test_eta_round_trip(spec, a, t):
    prof = _profile(spec)
    e = eta(prof, a, t)
    assert eval_phi(prof, e) == pytest.approx(a * t, rel=1e-8)


def test_eta_slope_p13():
    prof = PhiProfile(TradeoffSpec.power_law(1, 1 / 3, 0.1))
    t = np.geomspace(1e2, 1e6, 25)
    e = np.array([eta(prof, 1.0, v) for v in t])
    slope = np.polyfit(np.log(t), np.log(e), 1)[0]
    assert slope == pytest.approx(6 / 7, abs=0.01)


@pytest.mark.parametrize("spec", [TradeoffSpec.power_law(1, 1 / 3), TradeoffSpec.log_power(1, 2),
                                  TradeoffSpec.power_law(0.1, 2 / 3, 0.1)])
def test_phi_sandwich(spec):
    D, lower = phi_sandwich_constant(PhiProfile(spec))
    assert lower
    assert math.isfinite(D) and D >= 1.0


@pytest.mark.parametrize("a", [0.25, 4.0])
def test_eta_comparability(a):
    C, r = eta_ratio_constant(PhiProfile(TradeoffSpec.power_law(1, 1 / 3)), a)
    assert math.isfinite(C) and C < 100
    d = np.diff(r)
    assert np.all(d <= 1e-12) or np.all(d >= -1e-12)  # monotone towards a limit


def test_theta_d():
    s = TradeoffSpec.power_law(1, 1 / 3, 0.1)
    assert s.theta_d == pytest.approx(0.1 * 1.5**3)
    assert TradeoffSpec.power_law(1, 1).theta_d is None


def test_classify_regime():
    assert classify_regime(TradeoffSpec.power_law(1, 1 / 3), 0.4) is Regime.ACCELERATING
    assert classify_regime(TradeoffSpec.power_law(1, 4 / 3), 0.2) is Regime.LINEAR
    for s in SPECS:
        assert classify_regime(s, -0.1) is Regime.EXTINCTION


def test_tabulated_extrapolation_linear_in_sqrt_m():
    s = TradeoffSpec.tabulated([(1.0, 0.0), (2.0, 1.0), (3.0, 4.0)])
    r = np.sqrt(s.m(np.array([4.0, 5.0, 6.0])))
    assert np.allclose(np.diff(r, 2), 0.0, atol=1e-12)
