"""SVG figures written with the non-interactive Agg backend."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import LogNorm  # noqa: E402

plt.rcParams["svg.hashsalt"] = "toadfront"  # reproducible element ids


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def heatmap(field, path, floor=1e-6):
    """Phase-space density ``n(t, x, theta)`` on a log colour scale."""
    g = field.grid
    fig, ax = plt.subplots(figsize=(7, 3.2))
    vals = np.maximum(field.values.T, floor)
    im = ax.pcolormesh(g.x, g.theta, vals, shading="auto",
                       norm=LogNorm(vmin=floor, vmax=max(vals.max(), 10 * floor)),
                       rasterized=True)
    fig.colorbar(im, ax=ax, label="n")
    ax.set_xlabel("x")
    ax.set_ylabel(r"$\theta$")
    ax.set_title(f"t = {field.time:g}")
    fig.tight_layout()
    return _save(fig, path)


def rho_overlay(profiles, path):
    fig, ax = plt.subplots(figsize=(6, 3.2))
    for d in profiles:
        ax.plot(d.x, d.values, lw=1, label=f"t={d.time:g}")
    ax.set_xlabel("x")
    ax.set_ylabel(r"$\rho$")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def front_plot(trace, path, fit=None):
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3.2))
    ok = np.isfinite(trace.x_front) & (trace.times > 0)
    a1.loglog(trace.times[ok], trace.x_front[ok], ".", ms=2)
    a1.set_xlabel("t")
    a1.set_ylabel("x front")
    if fit is not None:
        t = np.linspace(*fit.window, 50)
        if fit.kind == "exponent":
            a1.loglog(t, fit.extras["prefactor"] * t**fit.value, "k--", lw=1,
                      label=f"slope {fit.value:.3f}")
        else:
            a1.loglog(t, fit.extras["intercept"] + fit.value * t, "k--", lw=1,
                      label=f"speed {fit.value:.3f}")
        a1.legend(fontsize=7)
    ok = np.isfinite(trace.theta_front) & (trace.times > 0)
    a2.loglog(trace.times[ok], trace.theta_front[ok], ".", ms=2)
    a2.set_xlabel("t")
    a2.set_ylabel(r"$\theta$ front")
    fig.tight_layout()
    return _save(fig, path)


def dispersion_plot(curve, path):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.semilogx(curve.lambdas, curve.speeds, lw=1)
    ax.axhline(curve.c_star, color="k", ls=":", lw=1)
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel(r"$c_\lambda$")
    finite = curve.speeds[np.isfinite(curve.speeds)]
    ax.set_ylim(min(finite.min(), curve.c_star) * 0.9, min(finite.max(), 5 * abs(curve.c_star) + 1))
    fig.tight_layout()
    return _save(fig, path)


def profile_plot(theta, values, path, ylabel="Q"):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(theta, values, lw=1)
    ax.set_xlabel(r"$\theta$")
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    return _save(fig, path)


def path_plot(traj, path):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(traj.z1, traj.z2, lw=1)
    ax.set_xlabel(r"$Z_1$")
    ax.set_ylabel(r"$Z_2$")
    fig.tight_layout()
    return _save(fig, path)
