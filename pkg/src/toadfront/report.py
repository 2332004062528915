"""Output writers and the pass/fail table shared by ``report`` and ``sweep``."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pipeline
from .errors import DomainError, InsufficientDataError, NumericError
from .io import write_csv, write_snapshot
from .model import Regime, TradeoffSpec


@dataclass
class Row:
    key: str
    name: str
    measured: str
    target: str
    passed: bool


def _meta(cfg, **extra):
    meta = {"config": cfg.name, "config_hash": cfg.hash}
    meta.update(extra)
    return meta


def write_spectrum(cfg, out, plots=False, sr=None):
    sr = sr or pipeline.spectrum(cfg)
    curve = sr.curve
    nan = float("nan")
    meta = _meta(cfg, gamma_inf=sr.gamma_inf, regime=sr.regime.value, c_star=sr.c_star,
                 c_star_truncated=curve.c_star if curve is not None else nan,
                 lambda_star=curve.lambda_star if curve is not None else nan,
                 boundary_infimum=bool(curve is not None and curve.boundary_infimum),
                 truncation_dependent=bool(curve is not None and curve.truncation_dependent),
                 b=sr.b, N=sr.N, notes="; ".join(sr.notes))
    lam = curve.lambdas if curve is not None else np.array([])
    cl = curve.speeds if curve is not None else np.array([])
    write_csv(out / "spectrum.csv", {"lambda": lam, "c_lambda": cl}, meta)
    Q = sr.Q
    write_csv(out / "q_profile.csv",
              {"theta": Q.theta, "Q": Q.values, "psi": np.append(Q.psi, np.inf)},
              _meta(cfg, gamma_inf=sr.gamma_inf, normalization=Q.normalization, b=sr.b, N=sr.N))
    if plots:
        from . import plots as P

        P.profile_plot(Q.theta, Q.values, out / "q_profile.svg")
        if curve is not None:
            P.dispersion_plot(curve, out / "dispersion.svg")
    return sr


def trace_columns(res):
    cols = {"t": res.fronts.times, "x_front": res.fronts.x_front,
            "theta_front": res.fronts.theta_front}
    for th, tr in sorted(res.extra_fronts.items()):
        cols[f"x_front@{th:g}"] = tr.x_front
        cols[f"theta_front@{th:g}"] = tr.theta_front
    return cols


def write_run(cfg, res, out, plots=False):
    out.mkdir(parents=True, exist_ok=True)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    meta = _meta(cfg, linearized=res.config.linearized, threshold=res.fronts.threshold,
                 boundary_hit=res.boundary_hit,
                 valid_until=res.valid_until if res.valid_until is not None else "t_final")
    for f, d in zip(res.snapshots, res.rho_profiles):
        tag = f"{f.time:08.3f}"
        write_snapshot(snap_dir / f"snap_t{tag}.tfs", f, cfg.hash)
        write_csv(out / f"rho_t{tag}.csv", {"x": d.x, "rho": d.values},
                  _meta(cfg, time=f.time, linearized=res.config.linearized))
    write_csv(out / "fronts.csv", trace_columns(res), meta)
    write_csv(out / "monitor.csv", res.monitors.as_arrays(), meta)
    if plots and res.snapshots:
        from . import plots as P

        for f in res.snapshots:
            P.heatmap(f, out / f"n_t{f.time:08.3f}.svg")
        P.rho_overlay(res.rho_profiles, out / "rho_overlay.svg")
        P.front_plot(res.fronts, out / "fronts.svg")


def write_domination(cfg, dom, out):
    write_csv(out / "domination.csv",
              {"t": [d[0] for d in dom], "max_excess": [d[1] for d in dom]}, _meta(cfg))


# -- the individual checks --------------------------------------------------
def check_cosine_mode(b=10.0, N=4096):
    from .spectral import principal_eigenpair

    t0 = time.perf_counter()
    g = principal_eigenpair(lambda th: np.ones_like(th), 1.0, b, N).eigenvalue
    dt = time.perf_counter() - t0
    exact = 1.0 - math.pi**2 / (4 * b * b)
    return Row("1", "spectral closed form (zero trade-off)", f"gamma={g:.10f}",
               f"{exact:.10f} +- 1e-6, < 1 s", abs(g - exact) <= 1e-6 and dt < 1.0)


def check_shift_identity(spec, b, N=1024):
    from .spectral import dispersion_c_lambda

    err = 0.0
    for lam in (0.2, 1.0, 5.0):
        c0 = dispersion_c_lambda(spec, lam, b, N)
        for eps in (0.01, 0.1):
            c = dispersion_c_lambda(spec, lam, b, N, eps=eps)
            err = max(err, abs(c - (c0 - 2 * eps / lam)))
    return Row("2", "dispersion shift identity", f"max err={err:.2e}", "<= 1e-10",
               err <= 1e-10)


def christoffel_fd(theta, h=1e-4):
    """Symbols from central differences of the metric (independent of the closed form)."""
    def g(th):
        return np.diag([1.0 / th, 1.0])

    dg = np.zeros((2, 2, 2))  # dg[k] = d g / d z^k
    dg[1] = (g(theta + h) - g(theta - h)) / (2 * h)
    gi = np.linalg.inv(g(theta))
    G = np.zeros((2, 2, 2))
    for c in range(2):
        for a in range(2):
            for b in range(2):
                G[c, a, b] = 0.5 * sum(gi[c, d] * (dg[a][d, b] + dg[b][d, a] - dg[d][a, b])
                                       for d in range(2))
    return G


def check_geometry(seed=0, n_pairs=10, M=200):
    from .action import minimize_action
    from .geometry import christoffel, geodesic_bvp, scalar_curvature

    rng = np.random.default_rng(seed)
    th = rng.uniform(1.0, 20.0, 25)
    curv_ok = all(scalar_curvature(float(t)) == -2.0 / float(t) ** 2 for t in th)
    cerr = max(float(np.max(np.abs(christoffel(float(t)) - christoffel_fd(float(t)))))
               for t in th)
    worst = 0.0
    spec = TradeoffSpec.zero(1.0)
    for _ in range(n_pairs):
        p = (0.0, float(rng.uniform(1.0, 6.0)))
        q = (float(rng.uniform(0.5, 15.0)), float(rng.uniform(1.0, 6.0)))
        t = float(rng.uniform(0.5, 4.0))
        zeta = minimize_action(spec, t, q[0], q[1], M=M, start=p).action
        d = geodesic_bvp(p, q)[0]
        worst = max(worst, abs(zeta / (d * d / (4 * t)) - 1.0))
    ok = curv_ok and cerr <= 1e-8 and worst <= 0.01
    return Row("9", "geometry (curvature, Christoffel, action = d^2/4t)",
               f"curvature exact={curv_ok}, Christoffel err={cerr:.1e}, action rel err={worst:.1e}",
               "exact, <= 1e-8, <= 1%", ok)


def check_speed(cfg, res, c_star):
    rep = pipeline.front_report(cfg, res, c_star=c_star)
    ratio = rep.value / c_star if c_star and math.isfinite(c_star) else float("nan")
    return Row("3", "linear-regime front speed",
               f"speed={rep.value:.4f}, c*={c_star:.4f}, ratio={ratio:.4f}",
               "|ratio - 1| <= 0.1", bool(math.isfinite(ratio) and abs(ratio - 1) <= 0.1))


def check_exponents(cfg, res, comp):
    rep = pipeline.front_report(cfg, res, comp)
    return Row("4", "acceleration exponents",
               f"space={rep.value:.4f} (stderr {rep.stderr:.1e}), "
               f"trait[{rep.trait_source}]={rep.trait_value:.4f}",
               f"space {rep.target:.4f} +- 0.15, trait {rep.trait_target:.4f} +- 0.1",
               rep.passed)


def check_extinction(res):
    ex = pipeline.extinction_checks(res)
    return Row("5", "extinction", f"sup n(80)={ex['sup_n_at_check']:.2e}, "
               f"monotone after t=5: {ex['monotone']}", "< 1e-3 and monotone", ex["passed"])


def check_uniform_bound(res):
    r = pipeline.sup_rho_ratio(res)
    return Row("6", "uniform bound on rho", f"sup rho / sup rho(5) = {r:.3f}", "<= 3", r <= 3.0)


def check_action(cfg):
    ac = pipeline.action_sandwich(cfg)
    r7 = Row("7", "action sandwich", f"kappa={ac.kappa:.3f}, vertical bound held: {ac.vertical_ok}",
             "kappa <= 10 and zeta >= Phi(max trait) - 1e-6", ac.kappa <= 10 and ac.vertical_ok)
    r8 = Row("8", "Euler-Lagrange first integral", f"spread={ac.first_integral_spread:.1e}",
             "<= 1e-5", ac.first_integral_spread <= 1e-5)
    return r7, r8, ac


def check_budget(cfg, gamma_inf, rho_bar):
    b, r0, g_box = pipeline.path_budget(cfg, gamma_inf, rho_bar)
    if b is None:
        return Row("10", "rectangular-path budget", f"none admissible (box gamma={g_box:.4f})",
                   "each step <= gamma_inf T / 10, net > 0", False)
    c = b.step_costs
    return Row("10", "rectangular-path budget",
               f"A={b.A:.3g}, a={b.a_underline:.3g}, up={c['up']:.2f}, right={c['right']:.2f}, "
               f"net={b.net_exponent:.2f}",
               f"steps <= {gamma_inf * b.T / 10:.2f}, net > 0", True)


def check_domination(dom):
    worst = max(d[1] for d in dom)
    return Row("11", "linearized domination", f"max(n - n_lin)={worst:.2e}", "<= 1e-8",
               worst <= 1e-8)


def _guard(key, name, fn, *args):
    try:
        return fn(*args)
    except (NumericError, DomainError, InsufficientDataError) as exc:
        return Row(key, name, f"error: {exc}", "-", False)


def build_report(cfg, out, plots=False):
    """Run every applicable check; returns ``(rows, exit_code)``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    spec = cfg.tradeoff
    sr = write_spectrum(cfg, out, plots)
    rows = [check_cosine_mode(), _guard("2", "dispersion shift identity", check_shift_identity,
                                        spec, sr.b), _guard("9", "geometry", check_geometry)]
    res, comp = pipeline.simulate(cfg)
    write_run(cfg, res, out / "simulation", plots)
    if comp is not None:
        write_run(cfg, comp, out / "linearized", plots)
    if sr.regime is Regime.EXTINCTION:
        rows.append(_guard("5", "extinction", check_extinction, res))
    elif sr.regime is Regime.LINEAR:
        rows.append(_guard("3", "linear-regime front speed", check_speed, cfg, res, sr.c_star))
    else:
        rows.append(_guard("4", "acceleration exponents", check_exponents, cfg, res, comp))
    rows.append(_guard("6", "uniform bound on rho", check_uniform_bound, res))
    if spec.theta_d is not None and spec.kind != "zero":
        try:
            r7, r8, ac = check_action(cfg)
            rows += [r7, r8]
            write_csv(out / "action_sandwich.csv",
                      {k: [r[k] for r in ac.rows] for k in ac.rows[0]}, _meta(cfg, a_bar=ac.a_bar))
        except (NumericError, DomainError) as exc:
            rows.append(Row("7", "action sandwich", f"error: {exc}", "-", False))
        rho_bar = float(np.max(res.monitors.as_arrays()["sup_rho"]))
        rows.append(_guard("10", "rectangular-path budget", check_budget, cfg, sr.gamma_inf,
                           rho_bar))
    if comp is not None:
        dom = pipeline.domination_excess(res, comp)
        write_domination(cfg, dom, out)
        rows.append(check_domination(dom))
    rows.sort(key=lambda r: int(r.key))
    if res.boundary_hit:
        code = 3
    else:
        code = 0 if all(r.passed for r in rows) else 1
    return rows, code
