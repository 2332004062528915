"""Mortality trade-offs, the trait action Phi, the trait-spreading scale eta_a
and regime classification.

A trade-off ``m`` is described by a :class:`TradeoffSpec`.  Every kind is
shifted so that ``m(theta_min) == 0`` and is nondecreasing on
``[theta_min, inf)``.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, NumericError

KINDS = ("power", "logpower", "linear_plus", "zero", "tabulated")

# relative slack when testing theta >= theta_min on floating point grids
_DOMAIN_RTOL = 1e-12


class Regime(enum.Enum):
    EXTINCTION = "extinction"
    LINEAR = "linear"
    ACCELERATING = "accelerating"


@dataclass(frozen=True)
class TradeoffSpec:
    """Parametric trade-off ``m(theta)``.

    Use the named constructors (:meth:`power_law`, :meth:`log_power`,
    :meth:`linear_plus`, :meth:`zero`, :meth:`tabulated`) rather than the
    raw fields.
    """

    kind: str
    theta_min: float = 1.0
    C: float = 1.0
    p: float = 1.0
    mu: float = 0.0
    sub: TradeoffSpec | None = None
    knots: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown trade-off kind {self.kind!r}")
        if not self.theta_min > 0:
            raise DomainError("theta_min must be positive")
        if self.kind in ("power", "logpower"):
            if not (self.C > 0 and self.p > 0):
                raise DomainError(f"{self.kind} trade-off needs C > 0 and p > 0")
        if self.kind == "linear_plus":
            if not self.mu > 0:
                raise DomainError("linear_plus trade-off needs mu > 0")
            if self.sub is not None and self.sub.theta_min != self.theta_min:
                raise DomainError("nested trade-off must share theta_min")
        if self.kind == "tabulated":
            th = np.array([k[0] for k in self.knots], dtype=float)
            mv = np.array([k[1] for k in self.knots], dtype=float)
            if len(th) < 2:
                raise DomainError("tabulated trade-off needs at least two knots")
            if np.any(np.diff(th) <= 0):
                raise DomainError("tabulated knots must be strictly increasing in theta")
            if th[0] != self.theta_min or mv[0] != 0.0:
                raise DomainError("first tabulated knot must be (theta_min, 0)")
            if np.any(np.diff(mv) < 0):
                raise DomainError("tabulated m must be nondecreasing")

    # -- constructors -------------------------------------------------------
    @classmethod
    def power_law(cls, C, p, theta_min=1.0):
        return cls("power", theta_min=float(theta_min), C=float(C), p=float(p))

    @classmethod
    def log_power(cls, C, p, theta_min=1.0):
        return cls("logpower", theta_min=float(theta_min), C=float(C), p=float(p))

    @classmethod
    def linear_plus(cls, mu, sub=None, theta_min=1.0):
        return cls("linear_plus", theta_min=float(theta_min), mu=float(mu), sub=sub)

    @classmethod
    def zero(cls, theta_min=1.0):
        return cls("zero", theta_min=float(theta_min))

    @classmethod
    def tabulated(cls, knots, theta_min=None):
        knots = tuple((float(a), float(b)) for a, b in knots)
        if theta_min is None:
            theta_min = knots[0][0]
        return cls("tabulated", theta_min=float(theta_min), knots=knots)

    @classmethod
    def from_dict(cls, d):
        """Build from a tagged record ``{kind, C, p, mu, theta_min, ...}``."""
        d = dict(d)
        kind = d.pop("kind")
        theta_min = float(d.pop("theta_min", 1.0))
        if kind == "power":
            return cls.power_law(d["C"], d["p"], theta_min)
        if kind == "logpower":
            return cls.log_power(d["C"], d["p"], theta_min)
        if kind == "zero":
            return cls.zero(theta_min)
        if kind == "linear_plus":
            sub = d.get("sub")
            if sub is not None:
                sub = cls.from_dict({**sub, "theta_min": theta_min})
            return cls.linear_plus(d["mu"], sub, theta_min)
        if kind == "tabulated":
            return cls.tabulated(d["knots"], theta_min)
        raise DomainError(f"unknown trade-off kind {kind!r}")

    def to_dict(self):
        d = {"kind": self.kind, "theta_min": self.theta_min}
        if self.kind in ("power", "logpower"):
            d.update(C=self.C, p=self.p)
        elif self.kind == "linear_plus":
            d["mu"] = self.mu
            if self.sub is not None:
                sub = self.sub.to_dict()
                sub.pop("theta_min")
                d["sub"] = sub
        elif self.kind == "tabulated":
            d["knots"] = [list(k) for k in self.knots]
        return d

    # -- evaluation ---------------------------------------------------------
    def _check(self, theta):
        theta = np.asarray(theta, dtype=float)
        lo = self.theta_min * (1 - _DOMAIN_RTOL)
        if np.any(theta < lo) or np.any(np.isnan(theta)):
            raise DomainError(f"theta below theta_min={self.theta_min}")
        return np.maximum(theta, self.theta_min)

    @cached_property
    def _pchip(self):
        th = np.array([k[0] for k in self.knots])
        mv = np.array([k[1] for k in self.knots])
        interp = PchipInterpolator(th, mv, extrapolate=False)
        th_last, m_last = th[-1], mv[-1]
        root = math.sqrt(m_last)
        dm_last = float(interp.derivative()(th_last))
        # linear extrapolation of sqrt(m) past the last knot
        slope = dm_last / (2 * root) if root > 0 else 0.0
        return interp, th_last, root, slope

    def m(self, theta):
        """Penalty rate ``m(theta)`` (vectorised)."""
        theta = self._check(theta)
        tm = self.theta_min
        k = self.kind
        if k == "power":
            return self.C * (theta**self.p - tm**self.p)
        if k == "logpower":
            return self.C * np.log(theta / tm) ** self.p
        if k == "zero":
            return np.zeros_like(theta)
        if k == "linear_plus":
            out = self.mu**2 * (theta - tm)
            if self.sub is not None:
                out = out + self.sub.m(theta)
            return out
        interp, th_last, root, slope = self._pchip
        out = np.where(theta <= th_last, interp(np.minimum(theta, th_last)), 0.0)
        ext = (root + slope * (theta - th_last)) ** 2
        return np.where(theta <= th_last, out, ext)

    def dm(self, theta):
        """First derivative ``m'(theta)``."""
        theta = self._check(theta)
        tm = self.theta_min
        k = self.kind
        if k == "power":
            return self.C * self.p * theta ** (self.p - 1)
        if k == "logpower":
            L = np.log(theta / tm)
            if self.p < 1:
                L = np.maximum(L, 1e-300)
            return self.C * self.p * L ** (self.p - 1) / theta
        if k == "zero":
            return np.zeros_like(theta)
        if k == "linear_plus":
            out = np.full_like(theta, self.mu**2)
            if self.sub is not None:
                out = out + self.sub.dm(theta)
            return out
        interp, th_last, root, slope = self._pchip
        inside = interp.derivative()(np.minimum(theta, th_last))
        ext = 2 * slope * (root + slope * (theta - th_last))
        return np.where(theta <= th_last, inside, ext)

    def d2m(self, theta):
        """Second derivative ``m''(theta)``."""
        theta = self._check(theta)
        tm = self.theta_min
        k = self.kind
        if k == "power":
            return self.C * self.p * (self.p - 1) * theta ** (self.p - 2)
        if k == "logpower":
            L = np.maximum(np.log(theta / tm), 1e-300)
            p = self.p
            return self.C * p * ((p - 1) * L ** (p - 2) - L ** (p - 1)) / theta**2
        if k == "zero":
            return np.zeros_like(theta)
        if k == "linear_plus":
            return self.sub.d2m(theta) if self.sub is not None else np.zeros_like(theta)
        interp, th_last, root, slope = self._pchip
        inside = interp.derivative(2)(np.minimum(theta, th_last))
        return np.where(theta <= th_last, inside, 2 * slope**2)

    # -- asymptotic class ---------------------------------------------------
    @property
    def regime_limit(self):
        """``lim m(theta)/theta`` as theta -> infinity (0, a positive value, or inf)."""
        k = self.kind
        if k == "power":
            if self.p < 1:
                return 0.0
            return self.C if self.p == 1 else math.inf
        if k in ("logpower", "zero"):
            return 0.0
        if k == "linear_plus":
            return self.mu**2 + (self.sub.regime_limit if self.sub is not None else 0.0)
        _, _, _, slope = self._pchip
        return math.inf if slope > 0 else 0.0

    @property
    def is_sublinear(self):
        return self.regime_limit == 0.0

    @property
    def critical_mu(self):
        """``sqrt(lim m/theta)`` when that limit is finite and positive, else None."""
        lim = self.regime_limit
        if 0 < lim < math.inf:
            return math.sqrt(lim)
        return None

    @cached_property
    def theta_d(self):
        """Threshold past which ``m(theta)/theta`` is nonincreasing (sublinear kinds only)."""
        if not self.is_sublinear:
            return None
        tm = self.theta_min
        if self.kind == "power":
            return tm * (1.0 / (1.0 - self.p)) ** (1.0 / self.p)
        if self.kind == "logpower":
            return tm * math.exp(self.p)
        if self.kind == "zero":
            return tm
        # tabulated with flat extrapolation: scan for the last increase of m/theta
        th = np.array([k[0] for k in self.knots])
        grid = np.linspace(tm, th[-1] * 2, 4000)
        ratio = self.m(grid) / grid
        inc = np.nonzero(np.diff(ratio) > 0)[0]
        return float(grid[inc[-1] + 1]) if len(inc) else tm


def eval_m(spec, theta):
    """Scalar or array ``m(theta)``; raises :class:`DomainError` below theta_min."""
    out = spec.m(theta)
    return float(out) if np.ndim(out) == 0 else out


def _closed_form_phi(spec):
    tm = spec.theta_min
    if spec.kind == "zero":
        return lambda th: 0.0 * th
    if spec.kind == "power" and spec.p == 1:
        c = math.sqrt(spec.C)
        return lambda th: c * (2.0 / 3.0) * (th - tm) ** 1.5
    if spec.kind == "power" and spec.p == 2:
        c = math.sqrt(spec.C)

        def phi2(th):
            r = np.sqrt(th**2 - tm**2)
            return c * 0.5 * (th * r - tm**2 * np.log((th + r) / tm))

        return phi2
    if spec.kind == "linear_plus" and spec.sub is None:
        return lambda th: spec.mu * (2.0 / 3.0) * (th - tm) ** 1.5
    return None


class PhiProfile:
    """Cumulative trait action ``Phi(theta) = int_{theta_min}^theta sqrt(m)``.

    The cumulative table on geometric knots is computed once at construction
    and never mutated afterwards, so a profile can be shared between workers.
    """

    def __init__(self, spec, theta_span=1e9, n_knots=160, rtol=1e-10):
        self.spec = spec
        self.rtol = rtol
        self._closed = _closed_form_phi(spec)
        tm = spec.theta_min
        scale = max(tm, 1.0)
        offsets = np.concatenate([[0.0], np.geomspace(1e-3 * scale, theta_span * scale, n_knots)])
        self.knots = tm + offsets
        if self._closed is not None:
            self.values = np.asarray(self._closed(self.knots), dtype=float)
        else:
            seg = [self._segment(a, b) for a, b in zip(self.knots[:-1], self.knots[1:])]
            self.values = np.concatenate([[0.0], np.cumsum(seg)])
        self.knots.setflags(write=False)
        self.values.setflags(write=False)

    def _segment(self, a, b):
        """``int_a^b sqrt(m)`` with ``s = a + u**2`` to absorb a sqrt endpoint."""
        if b <= a:
            return 0.0
        m = self.spec.m

        def f(u):
            return math.sqrt(max(float(m(a + u * u)), 0.0)) * 2.0 * u

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(f, 0.0, math.sqrt(b - a), epsabs=0.0, epsrel=self.rtol,
                                      limit=400)
        if err > 1e3 * self.rtol * abs(val) + 1e-14:
            raise NumericError(f"Phi quadrature on [{a:g}, {b:g}] did not converge (err {err:.2e})")
        return val

    def __call__(self, theta):
        return eval_phi(self, theta)

    def _scalar(self, th):
        if self._closed is not None:
            return float(self._closed(th))
        k = int(np.searchsorted(self.knots, th, side="right")) - 1
        k = min(k, len(self.knots) - 1)
        return float(self.values[k] + self._segment(self.knots[k], th))


def eval_phi(profile, theta):
    """``Phi(theta)``; scalar in, scalar out."""
    theta_arr = profile.spec._check(theta)
    if theta_arr.ndim == 0:
        return profile._scalar(float(theta_arr))
    return np.array([profile._scalar(float(t)) for t in theta_arr.ravel()]).reshape(theta_arr.shape)


def eta(profile, a, t, tol=1e-9):
    """Trait level ``eta_a(t)`` solving ``Phi(eta) = a t``.

    Bracketed root finding with geometric bracket growth from theta_min.
    """
    if not (a > 0 and t >= 0):
        raise DomainError("eta requires a > 0 and t >= 0")
    spec = profile.spec
    if spec.kind == "zero":
        raise DomainError("eta undefined for the zero trade-off (Phi vanishes identically)")
    tm = spec.theta_min
    target = a * t
    if target == 0:
        return tm
    step = max(tm, 1.0)
    lo, hi = tm, tm + step
    for _ in range(400):
        if profile._scalar(hi) >= target:
            break
        lo, step = hi, step * 2.0
        hi = tm + step
    else:
        raise NumericError("could not bracket eta; Phi appears bounded")
    root = optimize.brentq(lambda th: profile._scalar(th) - target, lo, hi,
                           xtol=1e-15 * hi, rtol=8.9e-16, maxiter=500)
    resid = abs(profile._scalar(root) - target)
    if resid > tol * max(1.0, target):
        raise NumericError(f"eta residual {resid:.3e} above tolerance")
    return root


def classify_regime(spec, gamma_inf):
    if gamma_inf <= 0:
        return Regime.EXTINCTION
    if spec.regime_limit > 0:
        return Regime.LINEAR
    return Regime.ACCELERATING


def phi_sandwich_constant(profile, theta_hi=1e6, n=400):
    """Empirical constant ``D_m`` with ``theta sqrt(m) <= D_m Phi`` past ``2 theta_d``.

    Returns ``(D_m, lower_holds)`` where ``lower_holds`` reports whether
    ``Phi(theta) <= theta sqrt(m(theta))`` held at every sample.
    """
    spec = profile.spec
    if spec.theta_d is None or spec.kind == "zero":
        raise DomainError("sandwich constant is defined for nontrivial sublinear trade-offs")
    grid = np.geomspace(2 * spec.theta_d, theta_hi, n)
    phi = eval_phi(profile, grid)
    upper = grid * np.sqrt(spec.m(grid))
    return float(np.max(upper / phi)), bool(np.all(phi <= upper * (1 + 1e-12)))


def eta_ratio_constant(profile, a, t_lo=10.0, t_hi=1e4, n=40):
    """Smallest ``C_a`` with ``C_a^-1 <= eta_a(t)/eta_1(t) <= C_a`` on sampled t."""
    ts = np.geomspace(t_lo, t_hi, n)
    r = np.array([eta(profile, a, t) / eta(profile, 1.0, t) for t in ts])
    return float(max(r.max(), 1.0 / r.min())), r
