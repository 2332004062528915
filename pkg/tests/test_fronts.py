import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from toadfront import DomainError, InsufficientDataError
from toadfront.fronts import (FrontTrace, LinearSpeedFit, PowerLawFit, fit_exponent, fit_speed,
                              front_position, trait_front)
from toadfront import TradeoffSpec
from toadfront.pde import Density1D, GridSpec, SimConfig, init_field


def trace(f, t=None, **kw):
    t = np.linspace(1.0, 60.0, 120) if t is None else t
    return FrontTrace(t, f(t), np.sqrt(t), **kw)


def test_step_profile():
    x = np.linspace(0, 20, 201)
    rho = np.where(x <= 7.0, 1.0, 0.0)
    assert abs(front_position(Density1D(x, rho), 0.5) - 7.0) <= x[1] - x[0]


def test_missing_level():
    x = np.linspace(0, 10, 11)
    assert math.isnan(front_position(np.full(11, 1e-3), 1e-2, x=x))


def test_gaussian_level_set():
    x = np.linspace(0, 20, 2001)
    rho = np.exp(-(x - 5.0) ** 2)
    h = x[1] - x[0]
    # linear interpolation error is O(h^2 f''/f')
    assert front_position(Density1D(x, rho), math.exp(-4.0)) == pytest.approx(7.0, abs=h * h * 4)


def test_threshold_must_be_positive():
    with pytest.raises(DomainError):
        front_position(np.ones(3), 0.0, x=np.arange(3.0))


def test_trait_front_of_initial_data():
    g = GridSpec(-10.0, 10.0, 1.0, 11.0, 41, 201)
    f = init_field(SimConfig(g, TradeoffSpec.power_law(0.3, 1.0), dt=0.01, t_final=1.0))
    # smoothing by a half step, then cut off three cells above the box top
    assert 2.0 - g.dtheta <= trait_front(f, 1e-2) <= 2.0 + 4 * g.dtheta


def test_exact_power_law():
    fit = fit_exponent(trace(lambda t: 4 * t**1.2), (10, 60))
    assert fit.value == pytest.approx(1.2, abs=1e-6)
    assert fit.extras["prefactor"] == pytest.approx(4.0, rel=1e-6)
    assert fit.stderr >= 0 and fit.window == (10.0, 60.0)


def test_linear_trace_exponent_one():
    fit = fit_exponent(trace(lambda t: 3 * t), (10, 60))
    assert abs(fit.value - 1.0) <= max(fit.stderr, 1e-12) + 1e-12


def test_speed():
    fit = fit_speed(trace(lambda t: 2 + 0.7 * t), (5, 60))
    assert fit.value == pytest.approx(0.7, abs=1e-12)
    assert fit.extras["intercept"] == pytest.approx(2.0, abs=1e-10)


def test_trait_exponent():
    fit = fit_exponent(trace(lambda t: t), (10, 60), which="theta")
    assert fit.value == pytest.approx(0.5, abs=1e-9)


def test_missing_points_raise():
    t = np.linspace(1, 60, 120)
    x = np.where(t < 58, np.nan, t)
    with pytest.raises(InsufficientDataError):
        fit_speed(FrontTrace(t, x, x), (20, 60))


def test_valid_until_truncates_window():
    tr = trace(lambda t: t**1.5, valid_until=30.0)
    fit = fit_exponent(tr, (10, 60))
    assert fit.window[1] == 30.0


def test_window_fractions():
    tr = trace(lambda t: t)
    lo, hi = tr.window(0.2, 1.0)
    assert lo == pytest.approx(0.2 * 60.0) and hi == pytest.approx(60.0)


def test_trace_times_must_increase():
    with pytest.raises(DomainError):
        FrontTrace([0.0, 1.0, 1.0], [1, 2, 3], [1, 2, 3])


def test_estimators_follow_the_estimator_protocol():
    t = np.linspace(1, 10, 30)[:, None]
    est = PowerLawFit().fit(t, 2 * t[:, 0] ** 0.8)
    assert est.exponent_ == pytest.approx(0.8)
    assert np.allclose(est.predict(t), 2 * t[:, 0] ** 0.8)
    assert est.score(t, 2 * t[:, 0] ** 0.8) == pytest.approx(1.0)
    assert clone(est).get_params() == {}
    lin = LinearSpeedFit().fit(t, 1 + 3 * t[:, 0])
    assert lin.speed_ == pytest.approx(3.0)


@given(st.floats(0.3, 3.0), st.floats(0.1, 10.0))
def test_power_law_recovered(k, A):
    fit = fit_exponent(trace(lambda t: A * t**k), (5, 60))
    assert fit.value == pytest.approx(k, abs=1e-8)
