"""Command-line entry point: ``toadfront <subcommand> --config FILE --out DIR``.

Exit codes: 0 success, 1 acceptance failure, 2 numeric or configuration
failure, 3 run invalidated by the front reaching the domain boundary.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import config as config_mod
from . import pipeline
from .errors import ConfigError, DomainError, InsufficientDataError, NumericError
from .fronts import FrontTrace, fit_exponent, fit_speed, front_position, trait_front
from .io import read_csv, read_snapshot, write_csv
from .report import build_report, write_domination, write_run, write_spectrum

EXIT_OK, EXIT_FAIL, EXIT_NUMERIC, EXIT_BOUNDARY = 0, 1, 2, 3


def _out(args, cfg):
    d = Path(args.out or cfg.output.get("directory", "out"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _plots(args, cfg):
    return bool(args.plots or cfg.output.get("plots", False))


def _meta(cfg, **extra):
    meta = {"config": cfg.name, "config_hash": cfg.hash}
    meta.update(extra)
    return meta


# -- spectrum ---------------------------------------------------------------
def cmd_spectrum(args, cfg):
    sr = write_spectrum(cfg, _out(args, cfg), _plots(args, cfg))
    print(f"gamma_inf = {sr.gamma_inf:.10g}  regime = {sr.regime.value}  c* = {sr.c_star:.6g}")
    for n in sr.notes:
        print("note:", n)
    return EXIT_OK


# -- simulate ---------------------------------------------------------------
def cmd_simulate(args, cfg):
    out = _out(args, cfg)
    plots = _plots(args, cfg)
    res, comp = pipeline.simulate(cfg)
    write_run(cfg, res, out, plots)
    if comp is not None:
        write_run(cfg, comp, out / "linearized", plots)
        dom = pipeline.domination_excess(res, comp)
        write_domination(cfg, dom, out)
        print(f"max(n - n_linearized) over snapshots = {max(d[1] for d in dom):.3e}")
    print(f"{res.steps} steps, front at t={res.fronts.times[-1]:g}: "
          f"x={res.fronts.x_front[-1]:.4g}, theta={res.fronts.theta_front[-1]:.4g}")
    if res.boundary_hit:
        print(f"front reached the x boundary; results valid until t={res.valid_until:g}",
              file=sys.stderr)
        return EXIT_BOUNDARY
    return EXIT_OK


# -- fronts -----------------------------------------------------------------
def load_trace(directory, threshold=1e-2):
    """Front trace from ``fronts.csv``, or rebuilt from snapshot files."""
    directory = Path(directory)
    f = directory / "fronts.csv"
    if f.exists():
        meta, cols = read_csv(f)
        vu = meta.get("valid_until", "t_final")
        vu = None if vu == "t_final" else float(vu)
        return FrontTrace(cols["t"], cols["x_front"], cols["theta_front"],
                          float(meta.get("threshold", threshold)), vu)
    snaps = sorted((directory / "snapshots").glob("*.tfs"))
    if not snaps:
        raise InsufficientDataError(f"no fronts.csv or snapshots in {directory}")
    t, xf, tf = [], [], []
    from .pde import rho

    for p in snaps:
        field, _ = read_snapshot(p)
        t.append(field.time)
        xf.append(front_position(rho(field), threshold))
        tf.append(trait_front(field, threshold))
    return FrontTrace(t, xf, tf, threshold)


def cmd_fronts(args, cfg):
    out = _out(args, cfg)
    src = Path(args.input) if args.input else out
    trace = load_trace(src, cfg.fronts["threshold"])
    write_csv(out / "fronts_trace.csv", {"t": trace.times, "x_front": trace.x_front,
                                         "theta_front": trace.theta_front},
              _meta(cfg, threshold=trace.threshold))
    win = pipeline.fit_window(cfg, trace)
    xe, te = pipeline.target_exponents(cfg.tradeoff)
    rows = []
    if xe is not None:
        fx = fit_exponent(trace, win)
        rows.append(("space_exponent", fx.value, fx.stderr, xe, abs(fx.value - xe) <= 0.15))
        tsrc, ttrace = "self", trace
        if cfg.fronts.get("trait_source") == "linearized":
            for comp_dir in (src / "linearized", src.parent / "linearized"):
                if (comp_dir / "fronts.csv").exists():
                    ttrace, tsrc = load_trace(comp_dir), "linearized"
                    break
        ft = fit_exponent(ttrace, win, which="theta")
        rows.append((f"trait_exponent[{tsrc}]", ft.value, ft.stderr, te,
                     abs(ft.value - te) <= 0.10))
    else:
        fs = fit_speed(trace, win)
        c_star = float("nan")
        spec_csv = out / "spectrum.csv"
        if spec_csv.exists():
            c_star = float(read_csv(spec_csv)[0].get("c_star", "nan"))
        else:
            c_star = pipeline.spectrum(cfg).c_star
        rows.append(("speed", fs.value, fs.stderr, c_star,
                     math.isfinite(c_star) and abs(fs.value / c_star - 1) <= 0.10))
    write_csv(out / "fronts_fit.csv",
              {"quantity": [r[0] for r in rows], "value": [r[1] for r in rows],
               "stderr": [r[2] for r in rows], "target": [r[3] for r in rows],
               "pass": [str(bool(r[4])).lower() for r in rows]},
              _meta(cfg, window=f"{win[0]:g}..{win[1]:g}"))
    for r in rows:
        print(f"{r[0]:>26s} = {r[1]:.4f} +- {r[2]:.1e}  target {r[3]:.4f}  "
              f"{'PASS' if r[4] else 'FAIL'}")
    return EXIT_OK if all(r[4] for r in rows) else EXIT_FAIL


# -- action -----------------------------------------------------------------
def cmd_action(args, cfg):
    from .action import minimize_action, zeta_lower_bound
    from .geometry import geodesic_bvp
    from .model import PhiProfile, eta

    out = _out(args, cfg)
    spec = cfg.tradeoff
    ac = dict(cfg.action)
    for k in ("t", "x", "theta", "M", "restarts"):
        v = getattr(args, k, None)
        if v is not None:
            ac[k] = v
    t = float(ac["t"])
    theta = float(ac["theta"]) if ac.get("theta") is not None else spec.theta_min
    summary = {"t": t, "theta": theta, "config_hash": cfg.hash}
    prof = None if spec.kind == "zero" else PhiProfile(spec)
    if ac.get("x") is not None:
        x = float(ac["x"])
    elif prof is not None:
        x = 2.0 * eta(prof, float(ac["a_bar"]), t) ** 1.5
    else:
        x = 2.0 * t
    traj = minimize_action(spec, t, x, theta, M=int(ac["M"]), restarts=int(ac["restarts"]),
                           seed=int(ac["seed"]))
    fi = traj.first_integral()
    summary.update(x=x, zeta=traj.action, converged=traj.converged, max_trait=traj.max_trait,
                   first_integral_spread=float(np.ptp(fi) / abs(fi.mean())) if x else 0.0,
                   local_minima=[v for _, v in traj.local_minima])
    if spec.kind == "zero":
        d = geodesic_bvp((0.0, spec.theta_min), (x, theta))[0]
        summary.update(lower_bound=None, kappa=None, geodesic_distance=d,
                       identity_ratio=traj.action / (d * d / (4 * t)))
    else:
        try:
            lb = zeta_lower_bound(spec, t, x, theta, float(ac["a_bar"]), prof)
            summary.update(lower_bound=lb, kappa=max(1.0, lb / traj.action))
        except Exception as exc:  # precondition or regime not covered
            summary.update(lower_bound=None, kappa=None, note=str(exc))
    write_csv(out / "action_path.csv", {"s": traj.times, "z1": traj.z1, "z2": traj.z2},
              _meta(cfg, zeta=traj.action, x=x, t=t, theta=theta))
    (out / "action_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if _plots(args, cfg):
        from . import plots as P

        P.path_plot(traj, out / "action_path.svg")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


# -- report -----------------------------------------------------------------
def cmd_report(args, cfg):
    out = _out(args, cfg)
    rows, code = build_report(cfg, out, plots=_plots(args, cfg))
    text = format_rows(cfg, rows)
    (out / "report.txt").write_text(text)
    write_csv(out / "report.csv",
              {"criterion": [r.key for r in rows], "name": [r.name for r in rows],
               "measured": [r.measured for r in rows], "target": [r.target for r in rows],
               "pass": [str(r.passed).lower() for r in rows]}, _meta(cfg))
    print(text, end="")
    return code


def format_rows(cfg, rows):
    lines = [f"report for {cfg.name} (config {cfg.hash})"]
    for r in rows:
        lines.append(f"[{'PASS' if r.passed else 'FAIL'}] {r.key:>3} {r.name}: "
                     f"measured {r.measured}  target {r.target}")
    return "\n".join(lines) + "\n"


# -- sweep ------------------------------------------------------------------
def _sweep_job(path, out, plots):
    args = argparse.Namespace(out=str(out), plots=plots)
    try:
        cfg = config_mod.load(path)
        code = cmd_report(args, cfg)
        return cfg.name, cfg.hash, code
    except (NumericError, ConfigError, DomainError, InsufficientDataError) as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return Path(path).stem, "", EXIT_NUMERIC


def _config_paths(items):
    paths = []
    for it in items:
        p = Path(it)
        paths.extend(sorted(p.glob("*.toml")) if p.is_dir() else [p])
    return paths


def cmd_sweep(args):
    paths = _config_paths(args.config)
    out = Path(args.out or "out/sweep")
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(str(p), out / p.stem, args.plots) for p in paths]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_sweep_job, *zip(*jobs)))
    else:
        results = [_sweep_job(*j) for j in jobs]
    write_csv(out / "sweep.csv", {"name": [r[0] for r in results],
                                  "config_hash": [r[1] for r in results],
                                  "exit_code": [r[2] for r in results]})
    for name, _, code in results:
        print(f"{name:>20s}: exit {code}")
    return max((r[2] for r in results), default=EXIT_OK)


# -- entry ------------------------------------------------------------------
def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--plots", action="store_true", help="write SVG figures")
    common.add_argument("--jobs", type=int, default=1, help="parallel jobs (sweep)")
    p = argparse.ArgumentParser(prog="toadfront", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("spectrum", "principal eigenvalue, dispersion curve and c*"),
                        ("simulate", "integrate the space-trait equation"),
                        ("fronts", "fit front exponents or speed from a run directory"),
                        ("action", "minimal action path and bounds"),
                        ("report", "pass/fail table of the acceptance checks")]:
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("--config", required=True, help="TOML run configuration")
        if name == "fronts":
            sp.add_argument("--input", help="simulation directory (default: --out)")
        if name == "action":
            sp.add_argument("--t", type=float)
            sp.add_argument("--x", type=float)
            sp.add_argument("--theta", type=float)
            sp.add_argument("--M", type=int)
            sp.add_argument("--restarts", type=int)
    sw = sub.add_parser("sweep", parents=[common], help="report on many configs in parallel")
    sw.add_argument("--config", required=True, nargs="+",
                    help="config files or directories of *.toml")
    return p


COMMANDS = {"spectrum": cmd_spectrum, "simulate": cmd_simulate, "fronts": cmd_fronts,
            "action": cmd_action, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            return cmd_sweep(args)
        cfg = config_mod.load(args.config)
        return COMMANDS[args.command](args, cfg)
    except (NumericError, ConfigError, DomainError, InsufficientDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
