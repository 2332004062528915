"""Front extraction and spreading-law fits.

Positions are level sets of the spatial density (or of the trait marginal
``max_x n``) located by linear interpolation between bracketing nodes.
Missing positions are stored as ``nan``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import DomainError, InsufficientDataError

MIN_POINTS = 8


@dataclass
class FrontTrace:
    """Time series of front positions at one threshold."""

    times: np.ndarray
    x_front: np.ndarray
    theta_front: np.ndarray
    threshold: float = 1e-2
    valid_until: float | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.x_front = np.asarray(self.x_front, dtype=float)
        self.theta_front = np.asarray(self.theta_front, dtype=float)
        if self.times.ndim != 1 or np.any(np.diff(self.times) <= 0):
            raise DomainError("front trace times must be strictly increasing")
        if not (self.x_front.shape == self.theta_front.shape == self.times.shape):
            raise DomainError("front trace arrays must share the time axis")

    @property
    def horizon(self):
        return float(self.times[-1]) if self.times.size else 0.0

    def window(self, lo_frac=0.2, hi_frac=1.0):
        """Fit window as fractions of the valid horizon."""
        end = self.horizon if self.valid_until is None else min(self.horizon, self.valid_until)
        return (lo_frac * end, hi_frac * end)


@dataclass
class FitResult:
    value: float
    stderr: float
    window: tuple
    r_squared: float
    n_points: int = 0
    kind: str = "exponent"
    extras: dict = field(default_factory=dict)


def _level_crossing(coord, values, threshold):
    """Largest coordinate where ``values >= threshold``, interpolated linearly."""
    if not threshold > 0:
        raise DomainError("threshold must be positive")
    values = np.asarray(values, dtype=float)
    above = np.nonzero(values >= threshold)[0]
    if above.size == 0:
        return np.nan
    k = int(above[-1])
    if k == values.size - 1:
        return float(coord[k])
    v0, v1 = values[k], values[k + 1]
    w = (v0 - threshold) / (v0 - v1)
    return float(coord[k] + w * (coord[k + 1] - coord[k]))


def front_position(density, threshold=1e-2, x=None):
    """Rightmost point where the density reaches ``threshold``.

    ``density`` is a :class:`~toadfront.pde.Density1D` or, with ``x`` given,
    a plain array of values on that grid.  Returns ``nan`` when the level is
    never attained.
    """
    if x is None:
        x, values = density.x, density.values
    else:
        values = density
    return _level_crossing(np.asarray(x, dtype=float), values, threshold)


def trait_front(field2d, threshold=1e-2):
    """Largest trait where ``max_x n(., theta)`` reaches ``threshold``."""
    marginal = np.max(field2d.values, axis=0)
    return _level_crossing(field2d.grid.theta, marginal, threshold)


class PowerLawFit(BaseEstimator, RegressorMixin):
    """Least-squares fit of ``y = A t**k`` in log-log coordinates.

    Attributes
    ----------
    exponent_, prefactor_, stderr_, r_squared_ : float
    """

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=2)
        t = X[:, 0]
        if np.any(t <= 0) or np.any(y <= 0):
            raise DomainError("power-law fit needs positive times and positions")
        res = stats.linregress(np.log(t), np.log(y))
        self.exponent_ = float(res.slope)
        self.prefactor_ = float(np.exp(res.intercept))
        self.stderr_ = float(res.stderr)
        self.r_squared_ = float(res.rvalue**2)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "exponent_")
        X = check_array(X)
        return self.prefactor_ * X[:, 0] ** self.exponent_


class LinearSpeedFit(BaseEstimator, RegressorMixin):
    """Least-squares fit of ``y = y0 + c t``; ``speed_`` is ``c``."""

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=2)
        res = stats.linregress(X[:, 0], y)
        self.speed_ = float(res.slope)
        self.intercept_ = float(res.intercept)
        self.stderr_ = float(res.stderr)
        self.r_squared_ = float(res.rvalue**2)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "speed_")
        X = check_array(X)
        return self.intercept_ + self.speed_ * X[:, 0]


def _window_points(trace, window, which):
    lo, hi = window
    if trace.valid_until is not None:
        hi = min(hi, trace.valid_until)
    pos = trace.x_front if which == "x" else trace.theta_front
    sel = (trace.times >= lo) & (trace.times <= hi) & np.isfinite(pos)
    t, y = trace.times[sel], pos[sel]
    if t.size < MIN_POINTS:
        raise InsufficientDataError(
            f"{t.size} valid front samples in window [{lo:g}, {hi:g}], need {MIN_POINTS}")
    return t, y, (float(lo), float(hi))


def fit_exponent(trace, window=None, which="x"):
    """Log-log slope of the front position against time."""
    window = trace.window() if window is None else window
    t, y, window = _window_points(trace, window, which)
    if np.any(y <= 0):
        raise DomainError("exponent fit needs positive front positions")
    est = PowerLawFit().fit(t[:, None], y)
    return FitResult(est.exponent_, est.stderr_, window, est.r_squared_, t.size, "exponent",
                     {"prefactor": est.prefactor_})


def fit_speed(trace, window=None, which="x"):
    """Slope of the front position against time."""
    window = trace.window() if window is None else window
    t, y, window = _window_points(trace, window, which)
    est = LinearSpeedFit().fit(t[:, None], y)
    return FitResult(est.speed_, est.stderr_, window, est.r_squared_, t.size, "speed",
                     {"intercept": est.intercept_})
