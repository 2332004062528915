"""Finite-difference solver for the nonlocal space-trait equation.

    n_t = theta n_xx + n_thetatheta + n (1 - m(theta) - rho),   rho = int n dtheta

on ``[x_min, x_max] x [theta_min, theta_max]``.  Neumann conditions at both
``x`` ends and at ``theta_min``; homogeneous Dirichlet at ``theta_max``.

Time stepping is Strang splitting: an exact exponential half step of the
reaction (``rho`` frozen), a full diffusion step by alternating-direction
sweeps, and a second reaction half step with ``rho`` recomputed.  Each sweep
is a theta-method with weight ``implicit_weight``; the default ``1.0``
(backward Euler) makes every sweep an inverse M-matrix, so the step is
positivity preserving and order preserving for any ``dt``.  ``0.5`` gives
Crank-Nicolson, which loses both properties once ``dt theta / dx**2 > 1``.
"""
from __future__ import annotations

import math
import time as _time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConfigError, DomainError, NumericError
from .fronts import FrontTrace, front_position, trait_front
from .model import PhiProfile, TradeoffSpec, eta


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    theta_min: float
    theta_max: float
    nx: int
    ntheta: int

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.theta_max > self.theta_min > 0):
            raise ConfigError("grid bounds must be increasing with theta_min > 0")
        if self.nx < 3 or self.ntheta < 3:
            raise ConfigError("grid needs at least 3 nodes per direction")

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dtheta(self):
        return (self.theta_max - self.theta_min) / (self.ntheta - 1)

    @property
    def x(self):
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def theta(self):
        return np.linspace(self.theta_min, self.theta_max, self.ntheta)

    def to_dict(self):
        return asdict(self)


@dataclass
class Field2D:
    """Density ``n`` at one time; ``values[i, j]`` sits at ``(x_i, theta_j)``."""

    grid: GridSpec
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nx, self.grid.ntheta):
            raise DomainError(f"field shape {self.values.shape} does not match grid")

    def check(self):
        if not np.all(np.isfinite(self.values)):
            raise NumericError(f"non-finite values at t={self.time}")
        if np.any(self.values < 0):
            raise NumericError(f"negative density at t={self.time}")
        return self

    def mass(self):
        g = self.grid
        return float(np.trapezoid(rho(self).values, dx=g.dx))


@dataclass
class Density1D:
    x: np.ndarray
    values: np.ndarray
    time: float = 0.0


@dataclass
class SimConfig:
    """Everything needed for one run.

    ``snapshot_every`` is the number of steps between recorded front and
    monitor samples.  Full fields are kept only at ``field_times``.
    """

    grid: GridSpec
    tradeoff: TradeoffSpec
    dt: float
    t_final: float
    linearized: bool = False
    reaction: bool = True
    snapshot_every: int = 10
    C0: float = 1.0
    field_times: tuple = ()
    rho_max_estimate: float = 2.0
    implicit_weight: float = 1.0
    front_threshold: float = 1e-2
    extra_thresholds: tuple = (1e-1, 1e-3)
    boundary_level: float = 1e-3
    tail_delta: float = 0.5

    def __post_init__(self):
        if abs(self.grid.theta_min - self.tradeoff.theta_min) > 1e-12 * self.grid.theta_min:
            raise ConfigError("grid.theta_min must equal the trade-off theta_min")
        if not (self.dt > 0 and self.t_final > 0 and self.C0 > 0):
            raise ConfigError("dt, t_final and C0 must be positive")
        if not 0.5 <= self.implicit_weight <= 1.0:
            raise ConfigError("implicit_weight must lie in [0.5, 1]")
        if self.snapshot_every < 1:
            raise ConfigError("snapshot_every must be >= 1")

    @property
    def n_steps(self):
        return max(1, math.ceil(self.t_final / self.dt - 1e-9))

    @property
    def dt_effective(self):
        """Step actually used: ``t_final / n_steps`` (never larger than ``dt``)."""
        return self.t_final / self.n_steps

    def validate(self, warn=True):
        """Check the step-size bounds; warn when the trait truncation looks short."""
        g, spec = self.grid, self.tradeoff
        m = spec.m(g.theta)
        bound = 0.9 * float(np.min(1.0 / (1.0 + np.abs(1.0 - m) + self.rho_max_estimate)))
        if self.dt > bound * (1 + 1e-12):
            raise ConfigError(f"dt={self.dt:g} exceeds the reaction bound {bound:.4g}")
        if self.dt > min(g.dx, g.dtheta) * (1 + 1e-12):
            raise ConfigError(f"dt={self.dt:g} exceeds min(dx, dtheta)={min(g.dx, g.dtheta):.4g}")
        if warn and spec.kind != "zero" and spec.is_sublinear:
            need = spec.theta_min + 4.0 * eta(PhiProfile(spec), 1.0, self.t_final)
            if g.theta_max < need:
                warnings.warn(f"theta_max={g.theta_max:g} is below theta_min + 4 eta_1(T) "
                              f"= {need:.4g}; watch the tail monitor", stacklevel=2)
        return self

    def to_dict(self):
        d = asdict(self)
        d["grid"] = self.grid.to_dict()
        d["tradeoff"] = self.tradeoff.to_dict()
        d["field_times"] = list(self.field_times)
        d["extra_thresholds"] = list(self.extra_thresholds)
        return d


def rho(field2d):
    """Trapezoid rule in theta for each x column."""
    return Density1D(field2d.grid.x, np.trapezoid(field2d.values, dx=field2d.grid.dtheta, axis=1),
                     field2d.time)


def _blocked_laplacian(c, block, right_neumann=True):
    """Sparse ``-c * D2`` made of independent blocks of length ``block``.

    Each block has a ghost-node Neumann row at its start and, when
    ``right_neumann``, also at its end (otherwise the end row sees a zero
    Dirichlet neighbour).  ``c`` holds the coefficient per row.
    """
    k = np.arange(c.size - 1)
    upper = -c[:-1].copy()
    lower = -c[1:].copy()
    upper[k % block == 0] *= 2.0
    upper[k % block == block - 1] = 0.0
    lower[(k + 1) % block == 0] = 0.0
    if right_neumann:
        lower[(k + 1) % block == block - 1] *= 2.0
    return sp.diags([lower, 2.0 * c, upper], [-1, 0, 1], format="csc")


class _Diffusion:
    """Factorised sweeps for one ``(grid, dt, weight)`` triple.

    The x-sweep acts on the transposed interior array (theta rows contiguous
    in x); the theta-sweep acts on the interior array (x rows contiguous in
    theta) with the Dirichlet node at ``theta_max`` eliminated.
    """

    def __init__(self, grid, dt, weight=1.0):
        self.grid, self.dt, self.w = grid, dt, weight
        nx, nt = grid.nx, grid.ntheta - 1
        th = grid.theta[:-1]
        # x: one Neumann block per theta row, coefficient theta_j
        self.Lx = _blocked_laplacian(np.repeat(th / grid.dx**2, nx), nx)
        # theta: one block per x column, Dirichlet neighbour at theta_max
        self.Lt = _blocked_laplacian(np.full(nx * nt, 1.0 / grid.dtheta**2), nt,
                                     right_neumann=False)
        eye_x = sp.identity(nx * nt, format="csc")
        self.solve_x = splu((eye_x + weight * dt * self.Lx).tocsc(), permc_spec="NATURAL").solve
        self.solve_t = splu((eye_x + weight * dt * self.Lt).tocsc(), permc_spec="NATURAL").solve

    def __call__(self, u):
        """Advance interior values ``u`` (shape ``(nx, ntheta - 1)``) by one step."""
        nx, nt = u.shape
        ex = 1.0 - self.w
        v = np.ascontiguousarray(u.T).ravel()
        rhs = v - ex * self.dt * (self.Lx @ v) if ex else v
        v = self.solve_x(rhs).reshape(nt, nx).T
        v = np.ascontiguousarray(v).ravel()
        rhs = v - ex * self.dt * (self.Lt @ v) if ex else v
        return self.solve_t(rhs).reshape(nx, nt)


class Stepper:
    """One Strang step of the splitting for a fixed configuration."""

    def __init__(self, config, dt=None):
        self.config = config
        self.dt = config.dt_effective if dt is None else dt
        g = config.grid
        self.diffuse = _Diffusion(g, self.dt, config.implicit_weight)
        self.rate = 1.0 - config.tradeoff.m(g.theta[:-1])
        self.dtheta = g.dtheta

    def _rho(self, u):
        # trapezoid with the zero Dirichlet node appended
        return self.dtheta * (u.sum(axis=1) - 0.5 * u[:, 0])

    def _react(self, u, h):
        if not self.config.reaction:
            return u
        if self.config.linearized:
            return u * np.exp(self.rate * h)
        return u * np.exp((self.rate[None, :] - self._rho(u)[:, None]) * h)

    def __call__(self, u):
        h = 0.5 * self.dt
        u = self._react(u, h)
        u = self.diffuse(u)
        np.maximum(u, 0.0, out=u)  # clears round-off negatives of order eps
        return self._react(u, h)


def step(state, config, stepper=None):
    """Advance a :class:`Field2D` by one step of size ``config.dt_effective``."""
    stepper = stepper or Stepper(config)
    u = stepper(state.values[:, :-1].copy())
    values = np.zeros_like(state.values)
    values[:, :-1] = u
    out = Field2D(state.grid, values, state.time + stepper.dt)
    if not np.all(np.isfinite(u)):
        raise NumericError(f"non-finite values after step at t={out.time:g}")
    return out


def init_field(config):
    """Indicator of ``{x <= C0} x [theta_min, theta_min + C0]`` times ``C0``.

    The data is smoothed by one diffusion half step and then cut off above
    ``theta_min + C0 + 3 dtheta`` so it keeps compact support in theta.
    """
    g, C0 = config.grid, config.C0
    top = g.theta_min + C0
    if not (g.x_min < C0 <= g.x_max and top <= g.theta_max):
        raise ConfigError("initial box [x_min, C0] x [theta_min, theta_min + C0] "
                          "is not inside the grid")
    X, TH = np.meshgrid(g.x, g.theta, indexing="ij")
    box = (X <= C0 + 1e-12) & (TH <= top + 1e-12)
    values = np.where(box, C0, 0.0)
    values[:, -1] = 0.0
    u = _Diffusion(g, 0.5 * config.dt_effective, 1.0)(values[:, :-1].copy())
    values[:, :-1] = np.maximum(u, 0.0)
    values[:, g.theta > top + 3 * g.dtheta + 1e-12] = 0.0
    return Field2D(g, values, 0.0)


@dataclass
class BoundMonitor:
    times: list = field(default_factory=list)
    sup_n: list = field(default_factory=list)
    sup_rho: list = field(default_factory=list)
    min_n: list = field(default_factory=list)
    tail_ratio: list = field(default_factory=list)

    def as_arrays(self):
        return {k: np.asarray(v, dtype=float) for k, v in asdict(self).items()}


class _TailReference:
    """``Q^delta`` on the simulation trait grid, for the tail monitor."""

    def __init__(self, config):
        from .spectral import tail_eigenfunction

        g = config.grid
        N = g.ntheta - 1
        self.sel = None
        if N < 64:
            return
        pair = tail_eigenfunction(config.tradeoff, g.theta_max - g.theta_min, N,
                                  delta=config.tail_delta)
        th = g.theta
        lo = g.theta_min + 0.5 * (g.theta_max - g.theta_min)
        hi = g.theta_min + 0.75 * (g.theta_max - g.theta_min)
        sel = (th >= lo) & (th <= hi) & (pair.values > 1e-250)
        if sel.any():
            self.sel, self.q = sel, pair.values[sel]

    def ratio(self, values):
        if self.sel is None:
            return np.nan
        return float(np.max(values[:, self.sel].max(axis=0) / self.q))


def monitor_bounds(state, tail=None, monitor=None):
    """Append ``sup n``, ``sup rho``, ``min n`` and the tail ratio for ``state``."""
    monitor = BoundMonitor() if monitor is None else monitor
    monitor.times.append(float(state.time))
    monitor.sup_n.append(float(state.values.max()))
    monitor.sup_rho.append(float(rho(state).values.max()))
    monitor.min_n.append(float(state.values.min()))
    monitor.tail_ratio.append(tail.ratio(state.values) if tail is not None else np.nan)
    return monitor


@dataclass
class RunResult:
    config: SimConfig
    snapshots: list
    rho_profiles: list
    fronts: FrontTrace
    extra_fronts: dict
    monitors: BoundMonitor
    boundary_hit: bool = False
    valid_until: float | None = None
    steps: int = 0
    wall_time: float = 0.0


def run(config, stop_at_boundary=True, callback=None):
    """Integrate to ``t_final`` recording fronts, monitors and selected fields.

    The run stops early (``boundary_hit``) when the ``boundary_level`` set of
    ``rho`` comes within ``10 dx`` of ``x_max``; ``valid_until`` is then the
    last time before that happened.
    """
    config.validate()
    t0 = _time.perf_counter()
    g = config.grid
    stepper = Stepper(config)
    dt, n_steps = stepper.dt, config.n_steps
    keep = {int(round(t / dt)) for t in config.field_times if 0 <= t <= config.t_final + 1e-9}
    tail = _TailReference(config)
    thresholds = (config.front_threshold,) + tuple(config.extra_thresholds)
    rec = {th: ([], []) for th in thresholds}
    times, monitors, snaps, rhos = [], BoundMonitor(), [], []
    boundary_hit, valid_until = False, None
    x_guard = g.x_max - 10.0 * g.dx

    state = init_field(config)
    u = state.values[:, :-1].copy()
    for k in range(n_steps + 1):
        if k > 0:
            u = stepper(u)
            if not np.isfinite(u[0, 0]) or not np.isfinite(u.sum()):
                raise NumericError(f"non-finite values at step {k} (t={k * dt:g})")
        record = k % config.snapshot_every == 0 or k == n_steps
        if not (record or k in keep):
            continue
        values = np.zeros((g.nx, g.ntheta))
        values[:, :-1] = u
        state = Field2D(g, values, k * dt)
        dens = rho(state)
        if k in keep:
            snaps.append(state)
            rhos.append(dens)
        if record:
            times.append(state.time)
            for th in thresholds:
                rec[th][0].append(front_position(dens, th))
                rec[th][1].append(trait_front(state, th))
            monitor_bounds(state, tail, monitors)
            if callback is not None:
                callback(state, dens)
            edge = front_position(dens, config.boundary_level)
            if np.isfinite(edge) and edge >= x_guard:
                boundary_hit = True
                valid_until = times[-2] if len(times) > 1 else 0.0
                if stop_at_boundary:
                    break
    traces = {th: FrontTrace(times, xs, ts, th, valid_until) for th, (xs, ts) in rec.items()}
    main = traces.pop(config.front_threshold)
    return RunResult(config, snaps, rhos, main, traces, monitors, boundary_hit, valid_until,
                     k, _time.perf_counter() - t0)
