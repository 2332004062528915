"""Lagrangian action of space-trait paths.

The action of a path ``s -> (Z1, Z2)`` on ``[0, t]`` is

    int |Z1'|^2 / (4 Z2) + |Z2'|^2 / 4 + m(Z2) ds.

``Z1`` enters only through the first term, and for a fixed trait path its
optimal increments are proportional to ``Z2``.  Eliminating ``Z1`` leaves a
bound-constrained problem in the trait path alone,

    x^2 / (4 S) + sum (dZ2)^2 / (4 ds) + sum m(Z2_mid) ds,   S = sum Z2_mid ds,

which is solved here by L-BFGS-B followed by a projected Newton polish.
The elimination is exact for the midpoint discretisation, so the returned
paths satisfy the discrete first integral ``dZ1 / (2 Z2_mid ds) = const``
to round-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .errors import DomainError, NumericError
from .model import PhiProfile, eta

DEFAULT_M = 200


@dataclass
class Trajectory:
    """Path on a uniform partition of ``[0, t]`` with its discrete action."""

    times: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    action: float
    alpha: float = 0.0
    converged: bool = True
    grad_norm: float = 0.0
    local_minima: list = field(default_factory=list)

    @property
    def max_trait(self):
        return float(np.max(self.z2))

    def first_integral(self):
        """Segment-wise ``(dZ1/ds) / (2 Z2_mid)``."""
        ds = np.diff(self.times)
        mid = 0.5 * (self.z2[1:] + self.z2[:-1])
        return np.diff(self.z1) / ds / (2.0 * mid)


def action_of_trajectory(traj, spec):
    """Midpoint-rule action of a stored path."""
    z1, z2 = np.asarray(traj.z1, float), np.asarray(traj.z2, float)
    if np.any(z2 < spec.theta_min * (1 - 1e-12)):
        raise DomainError("trajectory leaves the trait domain")
    ds = np.diff(np.asarray(traj.times, float))
    mid = 0.5 * (z2[1:] + z2[:-1])
    d1, d2 = np.diff(z1), np.diff(z2)
    return float(np.sum(d1**2 / (4.0 * mid * ds) + d2**2 / (4.0 * ds) + spec.m(mid) * ds))


class _Reduced:
    """Reduced objective in the interior trait nodes, with gradient and Hessian."""

    def __init__(self, spec, t, x, z_start, z_end, M):
        self.spec, self.x2 = spec, x * x
        self.a, self.b = z_start, z_end
        self.M, self.ds = M, t / M

    def path(self, y):
        return np.concatenate(([self.a], y, [self.b]))

    def parts(self, y):
        z = self.path(np.maximum(y, self.spec.theta_min))
        mid = 0.5 * (z[1:] + z[:-1])
        S = float(np.sum(mid)) * self.ds
        return z, mid, S

    def value(self, y):
        z, mid, S = self.parts(y)
        ds = self.ds
        return (self.x2 / (4.0 * S) + float(np.sum(np.diff(z) ** 2)) / (4.0 * ds)
                + float(np.sum(self.spec.m(mid))) * ds)

    def grad(self, y):
        z, mid, S = self.parts(y)
        ds = self.ds
        dm = self.spec.dm(mid)
        g = (2.0 * z[1:-1] - z[:-2] - z[2:]) / (2.0 * ds)
        g += 0.5 * ds * (dm[:-1] + dm[1:])
        g -= self.x2 * ds / (4.0 * S * S)
        return g

    def fun_grad(self, y):
        return self.value(y), self.grad(y)

    def hess(self, y):
        z, mid, S = self.parts(y)
        ds, n = self.ds, self.M - 1
        d2 = self.spec.d2m(mid)
        H = np.zeros((n, n))
        i = np.arange(n)
        H[i, i] = 1.0 / ds + 0.25 * ds * (d2[:-1] + d2[1:])
        off = -0.5 / ds + 0.25 * ds * d2[1:-1]
        H[i[:-1], i[:-1] + 1] = off
        H[i[:-1] + 1, i[:-1]] = off
        H += self.x2 * ds * ds / (2.0 * S**3)
        return H


def _projected_gradient(g, y, lo):
    pg = g.copy()
    at_bound = (y <= lo * (1 + 1e-14)) & (g > 0)
    pg[at_bound] = 0.0
    return pg


def _polish(obj, y, lo, target_rel=1e-8, max_iter=60):
    """Projected Newton iterations on the free variables."""
    f, g = obj.fun_grad(y)
    for _ in range(max_iter):
        pg = _projected_gradient(g, y, lo)
        if np.max(np.abs(pg)) <= target_rel * (1.0 + abs(f)):
            return y, f, g, True
        free = ~((y <= lo * (1 + 1e-14)) & (g > 0))
        H = obj.hess(y)[np.ix_(free, free)]
        shift = 0.0
        for _k in range(30):
            try:
                cf = cho_factor(H + shift * np.eye(H.shape[0]))
                break
            except np.linalg.LinAlgError:
                shift = max(2.0 * shift, 1e-8 * (1.0 + np.max(np.abs(np.diag(H)))))
        else:
            return y, f, g, False
        d = np.zeros_like(y)
        d[free] = -cho_solve(cf, g[free])
        step = 1.0
        slack = 16 * np.finfo(float).eps * (1.0 + abs(f))
        while step > 1e-12:
            y_new = np.maximum(y + step * d, lo)
            f_new = obj.value(y_new)
            if f_new <= f + 1e-4 * float(g @ (y_new - y)) + slack:
                break
            step *= 0.5
        else:
            return y, f, g, False
        y = y_new
        f, g = obj.fun_grad(y)
    pg = _projected_gradient(g, y, lo)
    return y, f, g, bool(np.max(np.abs(pg)) <= target_rel * (1.0 + abs(f)))


def _starts(obj, spec, t, rng, restarts):
    """Constant, rectangular and parabolic initial trait paths, then perturbations."""
    M, lo = obj.M, spec.theta_min
    s = np.linspace(0.0, 1.0, M + 1)[1:-1]
    base = obj.a + (obj.b - obj.a) * s
    starts = [("constant", np.full(M - 1, lo))]
    heights = lo + np.geomspace(1e-2, 1e3, 41) * max(1.0, lo)

    def best_height(shape):
        vals = [obj.value(np.maximum(base + (h - lo) * shape, lo)) for h in heights]
        return heights[int(np.argmin(vals))]

    rect = np.clip(np.minimum(s, 1.0 - s) * 4.0, 0.0, 1.0)
    starts.append(("rectangular", np.maximum(base + (best_height(rect) - lo) * rect, lo)))
    arc = 4.0 * s * (1.0 - s)
    starts.append(("parabolic", np.maximum(base + (best_height(arc) - lo) * arc, lo)))
    for k in range(restarts):
        seed_path = starts[1 + k % 2][1]
        noise = rng.normal(scale=0.25, size=M - 1) * (seed_path - lo + 1.0)
        starts.append((f"perturbed{k}", np.maximum(seed_path + noise, lo)))
    return starts


def minimize_action(spec, t, x, theta, M=DEFAULT_M, restarts=0, start=None, seed=0,
                    tol=1e-8):
    """Minimal action from ``start = (y, eta)`` (default ``(0, theta_min)``) to ``(x, theta)``.

    Returns the best :class:`Trajectory` over all starts; every converged
    local minimum is listed in ``local_minima`` as ``(start name, value)``.
    """
    lo = spec.theta_min
    y0, z0 = (0.0, lo) if start is None else (float(start[0]), float(start[1]))
    if not t > 0:
        raise DomainError("t must be positive")
    if theta < lo * (1 - 1e-12) or z0 < lo * (1 - 1e-12):
        raise DomainError("endpoints must satisfy theta >= theta_min")
    if M < 2:
        raise DomainError("need at least two segments")
    X = float(x) - y0
    obj = _Reduced(spec, t, X, max(z0, lo), max(float(theta), lo), M)
    rng = np.random.default_rng(seed)
    best, minima, diags = None, [], []
    bounds = [(lo, None)] * (M - 1)
    for name, y_init in _starts(obj, spec, t, rng, restarts):
        res = minimize(obj.fun_grad, y_init, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": 20000, "maxfun": 40000, "ftol": 1e-15,
                                "gtol": 1e-12, "maxcor": 30})
        y, f, g, ok = _polish(obj, np.maximum(res.x, lo), lo, tol)
        gn = float(np.max(np.abs(_projected_gradient(g, y, lo)))) if y.size else 0.0
        diags.append((name, f, gn, ok))
        if ok:
            minima.append((name, f))
        if ok and (best is None or f < best[1] - 1e-12 * (1 + abs(f))):
            best = (y, f, gn)
    if best is None:
        raise NumericError(f"action minimisation failed from every start: {diags}")
    y, f, gn = best
    z2 = obj.path(y)
    mid = 0.5 * (z2[1:] + z2[:-1])
    S = float(np.sum(mid)) * obj.ds
    alpha = X / (2.0 * S)
    z1 = y0 + np.concatenate(([0.0], np.cumsum(2.0 * alpha * mid * obj.ds)))
    z1[-1] = float(x)
    times = np.linspace(0.0, t, M + 1)
    traj = Trajectory(times, z1, z2, 0.0, alpha, True, gn, minima)
    traj.action = action_of_trajectory(traj, spec)
    return traj


def zeta_lower_bound(spec, t, x, theta, a_bar, profile=None):
    """``min(a t sqrt(x / eta_a(t)^{3/2}), x^2 / (8 theta_d t))`` for sublinear trade-offs."""
    if spec.theta_d is None:
        raise DomainError("the lower bound needs a sublinear trade-off")
    profile = profile or PhiProfile(spec)
    e32 = eta(profile, a_bar, t) ** 1.5
    if x < e32 * (1 - 1e-12):
        raise DomainError(f"lower bound needs x >= eta_a(t)^(3/2) = {e32:.6g}")
    return min(a_bar * t * math.sqrt(x / e32), x * x / (8.0 * spec.theta_d * t))


def li_yau_exponent(spec, t, x, theta, C_fit=0.5, gamma_inf=None, M=DEFAULT_M, profile=None):
    """``zeta(t, x, theta) / 2 - C_fit t``; positive where the linearised density is tiny."""
    if gamma_inf is None:
        from .spectral import gamma_infinity

        gamma_inf = gamma_infinity(spec)
    profile = profile or PhiProfile(spec)
    cap = eta(profile, gamma_inf + 1.0, t)
    if theta > cap:
        raise DomainError(f"theta={theta:g} exceeds eta_(gamma_inf+1)(t) = {cap:.6g}")
    return 0.5 * minimize_action(spec, t, x, theta, M=M).action - C_fit * t


@dataclass
class PathBudget:
    """Parameters and exponential losses of the three-step sub-solution path."""

    T: float
    a_underline: float
    A: float
    H: float
    Lambda1: float
    rho_bar: float = 1.0
    gamma_box: float = 0.0
    eta: float = 0.0
    T1: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    step_costs: dict = field(default_factory=dict)
    net_exponent: float = float("nan")

    @property
    def Lambda2(self):
        return 0.5 * self.Lambda1

    def derive(self, profile):
        e = eta(profile, self.a_underline, self.T)
        self.eta = e
        self.T1 = self.A * e * e / self.T
        self.c1 = self.T / (self.A * e**1.5)
        self.c2 = self.T / (self.A * math.sqrt(e))
        return self

    def up_height(self):
        """``Theta_1(T1) = (c1 T1)^2 + H``; equals ``eta + H`` by construction."""
        return (self.c1 * self.T1) ** 2 + self.H


def rectangular_path_cost(spec, budget, profile=None):
    """Fill in the up/right/down losses and the growth credit of ``budget``."""
    profile = profile or PhiProfile(spec)
    b = budget.derive(profile)
    T, A, e, T1, c1 = b.T, b.A, b.eta, b.T1, b.c1
    r = b.rho_bar + float(spec.m(e + b.H + b.Lambda1))
    up = 2.0 * b.Lambda1 * c1 * c1 * T1 + r * T1 + c1**4 * T1**3 / 3.0
    right = 0.75 * b.Lambda2 * T / (A * e) + A * r * e * e / T + T / (4.0 * A)
    credit = b.gamma_box * (T - 3.0 * T1 - 1.0)
    b.step_costs = {"up": up, "right": right, "down": up, "growth_credit": credit, "r": r}
    b.net_exponent = credit - (2.0 * up + right)
    return b


def admissible_budget(spec, T, gamma_inf, gamma_box, rho_bar=1.0, Lambda1=0.1, H=0.5,
                      A_grid=None, a_grid=None, profile=None):
    """Search ``(A, a_underline)`` for a budget whose steps each cost at most ``gamma_inf T / 10``.

    Among admissible budgets the one climbing highest (largest ``a_underline``,
    then largest net exponent) is returned, or ``None`` if there is none.
    """
    profile = profile or PhiProfile(spec)
    A_grid = np.geomspace(1.0, 1e3, 31) if A_grid is None else A_grid
    a_grid = np.geomspace(1e-5, 1.0, 31) if a_grid is None else a_grid
    cap = gamma_inf * T / 10.0
    best = None
    for A in A_grid:
        for a in a_grid:
            b = rectangular_path_cost(spec, PathBudget(T, float(a), float(A), H, Lambda1,
                                                       rho_bar, gamma_box), profile)
            if 3.0 * b.T1 + 1.0 >= T:
                continue
            c = b.step_costs
            if max(c["up"], c["right"], c["down"]) <= cap and b.net_exponent > 0:
                if best is None or (b.a_underline, b.net_exponent) > (best.a_underline,
                                                                      best.net_exponent):
                    best = b
    return best
