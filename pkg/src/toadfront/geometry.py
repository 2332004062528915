"""Riemannian view of the space-trait half plane.

Coordinates are ``(x, theta)`` with metric ``g = diag(1/theta, 1)``, whose
Laplace-Beltrami-type generator is ``theta d_xx + d_thetatheta`` up to a
first-order term.  Index 0 is ``x`` and index 1 is ``theta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson, solve_bvp

from .errors import DomainError, NumericError


@dataclass(frozen=True)
class Metric:
    theta_min: float = 1.0

    def __post_init__(self):
        if not self.theta_min > 0:
            raise DomainError("theta_min must be positive")

    def _check(self, theta):
        if np.any(np.asarray(theta) < self.theta_min * (1 - 1e-12)):
            raise DomainError(f"theta below theta_min={self.theta_min}")

    def g(self, theta):
        self._check(theta)
        return np.diag([1.0 / theta, 1.0])

    def g_inv(self, theta):
        self._check(theta)
        return np.diag([float(theta), 1.0])


def christoffel(theta, metric=None):
    """Symbols ``G[c, a, b]`` (upper index first) at ``theta``.

    Only ``G[0, 0, 1] = G[0, 1, 0] = -1/(2 theta)`` and
    ``G[1, 0, 0] = 1/(2 theta^2)`` are nonzero.  Array input gives
    trailing axes of the same shape.
    """
    th = np.asarray(theta, dtype=float)
    metric = metric or Metric(min(1.0, float(np.min(th))))
    metric._check(th)
    G = np.zeros((2, 2, 2) + th.shape)
    G[0, 0, 1] = G[0, 1, 0] = -0.5 / th
    G[1, 0, 0] = 0.5 / th**2
    return G


def scalar_curvature(theta, metric=None):
    metric = metric or Metric(min(1.0, theta))
    metric._check(theta)
    return -2.0 / theta**2


def geodesic_distance(p, q, metric=None, M=200):
    """Riemannian distance between ``p = (x, theta)`` and ``q`` by energy minimisation.

    With ``m = 0`` and unit horizon, the minimal action is ``d^2 / 4``; the
    minimiser is a constant-speed geodesic.
    """
    from .action import minimize_action
    from .model import TradeoffSpec

    metric = metric or Metric(min(1.0, p[1], q[1]))
    metric._check(p[1])
    metric._check(q[1])
    if p[0] == q[0] and p[1] == q[1]:
        return 0.0
    traj = minimize_action(TradeoffSpec.zero(metric.theta_min), 1.0, q[0], q[1], M=M,
                           start=p)
    return 2.0 * math.sqrt(traj.action)


def geodesic_bvp(p, q, metric=None, n=201, tol=1e-10):
    """Distance from the geodesic equation ``z'' + G(z', z') = 0`` on ``s in [0, 1]``.

    Independent of the energy minimiser: a collocation solve of the
    boundary-value problem, followed by the length integral of the solution.
    Returns ``(distance, s, z)`` with ``z`` of shape ``(2, len(s))``.
    """
    metric = metric or Metric(min(1.0, p[1], q[1]))
    metric._check(p[1])
    metric._check(q[1])
    dx, dth = q[0] - p[0], q[1] - p[1]

    def rhs(s, y):
        z, v = y[:2], y[2:]
        G = christoffel(np.maximum(z[1], metric.theta_min), metric)
        acc = -np.einsum("cab...,a...,b...->c...", G, v, v)
        return np.vstack([v, acc])

    def bc(ya, yb):
        return np.array([ya[0] - p[0], ya[1] - p[1], yb[0] - q[0], yb[1] - q[1]])

    s = np.linspace(0.0, 1.0, n)
    bulge = 0.5 * abs(dx) / math.sqrt(max(p[1], q[1]))
    th0 = p[1] + dth * s + 4.0 * bulge * s * (1 - s)
    y0 = np.vstack([p[0] + dx * s, th0, np.full(n, dx), dth + 4.0 * bulge * (1 - 2 * s)])
    sol = solve_bvp(rhs, bc, s, y0, tol=tol, max_nodes=200000)
    if not sol.success:
        raise NumericError(f"geodesic boundary-value solve failed: {sol.message}")
    ss = np.linspace(0.0, 1.0, 4001)
    y = sol.sol(ss)
    speed = np.sqrt(y[2] ** 2 / y[1] + y[3] ** 2)
    return float(simpson(speed, x=ss)), ss, y[:2]
