"""Orchestration shared by the command-line subcommands and the report."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .action import admissible_budget, minimize_action, zeta_lower_bound
from .errors import InsufficientDataError
from .fronts import fit_exponent, fit_speed
from .model import PhiProfile, Regime, classify_regime, eta
from .pde import run
from .spectral import (default_truncation, gamma_infinity, ground_state_Q, growth_box,
                       minimal_speed, principal_eigenpair)


@dataclass
class SpectrumResult:
    gamma_inf: float
    regime: Regime
    Q: object
    curve: object = None
    b: float = 0.0
    N: int = 0
    notes: list = field(default_factory=list)

    @property
    def c_star(self):
        """Untruncated minimal speed, ``nan`` when it does not exist."""
        if self.curve is None or self.curve.truncation_dependent:
            return float("nan")
        return self.curve.c_star


def spectrum(cfg):
    spec = cfg.tradeoff
    sp = cfg.spectral
    N = int(sp["N"])
    b = float(sp["b"]) if sp.get("b") else default_truncation(spec)
    notes = []
    if spec.kind == "zero":
        # no confinement: report the truncated eigenvalue at the configured b
        gamma = principal_eigenpair(lambda th: np.ones_like(th), spec.theta_min, b, N).eigenvalue
        notes.append(f"zero trade-off: eigenvalue of the truncation b={b:g}")
    else:
        gamma = gamma_infinity(spec, tol=float(sp["tol"]))
    regime = classify_regime(spec, gamma)
    Q = ground_state_Q(spec, b, N)
    curve = None
    if gamma > 0:
        curve = minimal_speed(spec, b, N, n_scan=int(sp["n_scan"]))
        if curve.truncation_dependent:
            notes.append("c* unavailable in the untruncated sense: accelerating regime")
        if curve.boundary_infimum:
            notes.append("c* is an infimum attained at the right end of the lambda bracket")
    else:
        notes.append("gamma_inf <= 0: no propagation speed")
    return SpectrumResult(gamma, regime, Q, curve, b, N, notes)


def simulate(cfg, companion=None):
    """Run the configured simulation and, if requested, its linearised companion."""
    res = run(cfg.sim)
    comp = None
    want = cfg.compare.get("linearized", False) if companion is None else companion
    if want and not cfg.sim.linearized:
        comp = run(cfg.with_sim(linearized=True).sim)
    return res, comp


def domination_excess(res, comp):
    """Per snapshot ``max(n - n_linearised)``."""
    out = []
    for a, b in zip(res.snapshots, comp.snapshots):
        out.append((a.time, float(np.max(a.values - b.values))))
    return out


def fit_window(cfg, trace):
    fr = cfg.fronts
    if fr.get("window"):
        return tuple(float(v) for v in fr["window"])
    lo, hi = fr["window_fractions"]
    return trace.window(lo, hi)


def target_exponents(spec):
    """``(3/(2+p), 2/(2+p))`` for power laws, ``(3/2, 1)`` for the zero trade-off."""
    if spec.kind == "zero":
        return 1.5, 1.0
    if spec.kind == "power" and spec.p < 1:
        return 3.0 / (2.0 + spec.p), 2.0 / (2.0 + spec.p)
    return None, None


@dataclass
class FrontReport:
    kind: str
    value: float
    stderr: float
    target: float
    tolerance: float
    window: tuple
    trait_value: float = float("nan")
    trait_target: float = float("nan")
    trait_source: str = "self"
    trait_tolerance: float = 0.1

    @property
    def passed(self):
        ok = abs(self.value - self.target) <= self.tolerance * (1 if self.kind == "exponent"
                                                                  else self.target)
        if self.kind == "exponent" and math.isfinite(self.trait_target):
            ok = ok and abs(self.trait_value - self.trait_target) <= self.trait_tolerance
        return bool(ok)


def front_report(cfg, res, comp=None, c_star=None):
    """Speed fit in the linear regime, exponent fits otherwise."""
    spec = cfg.tradeoff
    win = fit_window(cfg, res.fronts)
    xe, te = target_exponents(spec)
    if xe is None:
        fit = fit_speed(res.fronts, win)
        return FrontReport("speed", fit.value, fit.stderr, c_star, 0.10, fit.window)
    fit = fit_exponent(res.fronts, win)
    source = cfg.fronts.get("trait_source", "self")
    trace = comp.fronts if (source == "linearized" and comp is not None) else res.fronts
    tfit = fit_exponent(trace, win, which="theta")
    return FrontReport("exponent", fit.value, fit.stderr, xe, 0.15, fit.window, tfit.value, te,
                       "linearized" if trace is not res.fronts else "self")


@dataclass
class ActionChecks:
    a_bar: float
    rows: list
    kappa: float
    vertical_ok: bool
    first_integral_spread: float


def action_sandwich(cfg, t_values=None, factors=(1.0, 1.5, 2.0, 3.0, 5.0)):
    """Lower bound against optimiser on a ``(t, x)`` grid with ``x >= eta_a(t)^{3/2}``."""
    spec = cfg.tradeoff
    ac = cfg.action
    a_bar = float(ac["a_bar"])
    prof = PhiProfile(spec)
    t_values = np.geomspace(10.0, 160.0, 5) if t_values is None else t_values
    rows, vert, spread = [], True, 0.0
    for t in t_values:
        e32 = eta(prof, a_bar, t) ** 1.5
        for f in factors:
            x = f * e32
            tr = minimize_action(spec, t, x, spec.theta_min, M=int(ac["M"]),
                                 restarts=int(ac["restarts"]), seed=int(ac["seed"]))
            lb = zeta_lower_bound(spec, t, x, spec.theta_min, a_bar, prof)
            fi = tr.first_integral()
            spread = max(spread, float((fi.max() - fi.min()) / abs(fi.mean())))
            phi_top = float(prof(tr.max_trait))
            vert = vert and tr.action >= phi_top - 1e-6
            rows.append({"t": float(t), "x": float(x), "zeta": tr.action, "lower_bound": lb,
                         "ratio": lb / tr.action, "phi_max_trait": phi_top})
    kappa = max(1.0, max(r["ratio"] for r in rows))
    return ActionChecks(a_bar, rows, kappa, vert, spread)


def path_budget(cfg, gamma_inf, rho_bar):
    """Admissible three-step budget, with the growth box found by doubling."""
    spec = cfg.tradeoff
    bd = cfg.budget
    r0, g_box = growth_box(spec, gamma_inf)
    b = admissible_budget(spec, float(bd["T"]), gamma_inf, g_box, rho_bar=rho_bar,
                          Lambda1=float(bd["Lambda1"]), H=float(bd["H"]))
    return b, r0, g_box


def sup_rho_ratio(res, t_ref=5.0, t_lo=1.0):
    """``sup_{t >= t_lo} sup rho / sup rho(t_ref)`` from the monitor samples."""
    m = res.monitors.as_arrays()
    t, s = m["times"], m["sup_rho"]
    if t[-1] < t_ref:
        raise InsufficientDataError("run shorter than the reference time")
    ref = s[np.argmin(np.abs(t - t_ref))]
    return float(np.max(s[t >= t_lo]) / ref)


def extinction_checks(res, t_mono=5.0, t_check=80.0, level=1e-3):
    m = res.monitors.as_arrays()
    t, s = m["times"], m["sup_n"]
    after = s[t >= t_mono - 1e-9]
    mono = bool(np.all(np.diff(after) < 0))
    at = s[np.argmin(np.abs(t - t_check))] if t[-1] >= t_check - 1e-9 else float("nan")
    return {"sup_n_at_check": float(at), "monotone": mono, "passed": bool(at < level and mono)}
