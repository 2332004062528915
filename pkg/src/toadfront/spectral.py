"""Principal eigenvalue problems in the trait variable.

All problems share one kernel, :func:`principal_eigenpair`, which discretises
``Q'' + V(theta) Q`` on ``[theta_min, theta_min + b]`` with a Neumann
condition at ``theta_min`` and a Dirichlet condition at ``theta_min + b``.
The ghost-node Neumann row is symmetrised by a diagonal similarity, so the
discrete operator is a symmetric tridiagonal matrix and its largest
eigenvalue is found by shifted inverse iteration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal, solveh_banded
from scipy.optimize import minimize_scalar

from .errors import DomainError, NumericError
from .model import PhiProfile, eta

SUP_ONE = "sup_one"
INTEGRAL_EQUALS_EIGENVALUE = "integral_equals_eigenvalue"

DEFAULT_N = 2048


@dataclass
class EigenPair:
    """Principal eigenvalue with its eigenfunction on the closed truncation grid.

    ``theta`` holds ``N + 1`` nodes; the last one is the Dirichlet node where
    the eigenfunction vanishes.
    """

    eigenvalue: float
    theta: np.ndarray
    values: np.ndarray
    normalization: str
    truncation_b: float
    residual: float = 0.0
    iterations: int = 0

    @property
    def psi(self):
        """``-log Q`` on the open grid (Dirichlet node excluded)."""
        with np.errstate(divide="ignore"):
            return -np.log(self.values[:-1])

    def integral(self):
        return float(np.trapezoid(self.values, self.theta))


def _grid(theta_min, b, N):
    h = b / N
    return theta_min + h * np.arange(N + 1), h


def principal_eigenpair(potential, theta_min, b, N=DEFAULT_N, tol=1e-10, max_iter=500,
                        tail_sweeps=32):
    """Largest eigenvalue of ``d^2/dtheta^2 + potential`` with Neumann/Dirichlet ends.

    Parameters
    ----------
    potential : callable
        Vectorised ``theta -> V(theta)``.
    theta_min, b : float
        Left end and length of the truncation interval.
    N : int
        Number of unknown nodes (``h = b / N``).
    tol : float
        Residual target ``||(A - gamma) Q||_inf <= max(tol, 64 eps ||A||_inf) ||Q||_inf``.
        The second term is the round-off floor of the stiff matrix on fine grids.
    tail_sweeps : int
        Extra inverse-iteration sweeps after convergence, for ``-log Q`` far
        in the tail.

    Returns
    -------
    EigenPair
        Eigenfunction normalised to sup one.
    """
    if N < 64:
        raise DomainError("principal_eigenpair needs N >= 64")
    if not b > 0:
        raise DomainError("truncation length b must be positive")
    theta, h = _grid(theta_min, b, N)
    V = np.asarray(potential(theta[:-1]), dtype=float)
    if V.shape != (N,) or not np.all(np.isfinite(V)):
        raise NumericError("potential must be finite on the truncation grid")
    inv_h2 = 1.0 / (h * h)
    diag = V - 2.0 * inv_h2
    off = np.full(N - 1, inv_h2)
    off[0] = math.sqrt(2.0) * inv_h2  # symmetrised ghost-node Neumann row

    est = float(eigvalsh_tridiagonal(diag, off, select="i", select_range=(N - 1, N - 1))[0])
    norm_A = float(np.max(np.abs(diag) + np.r_[off, 0] + np.r_[0, off]))
    target = max(tol, 64 * np.finfo(float).eps * norm_A)
    shift = est + 1e-9 * max(1.0, abs(est)) + 1e-12 * norm_A

    # (shift - T) is a symmetric M-matrix: its inverse is entrywise positive,
    # so iterates started from a positive vector stay positive.
    ab = np.zeros((2, N))
    ab[0, 1:] = -off
    ab[1, :] = shift - diag
    u = np.ones(N)
    gamma = est
    for it in range(1, max_iter + 1):
        u = solveh_banded(ab, u, lower=False, check_finite=False)
        u /= np.max(np.abs(u))
        Tu = diag * u
        Tu[:-1] += off * u[1:]
        Tu[1:] += off * u[:-1]
        gamma = float(u @ Tu / (u @ u))
        resid = float(np.max(np.abs(Tu - gamma * u)))
        if resid <= target:
            break
    else:
        raise NumericError(f"inverse iteration did not converge in {max_iter} steps "
                           f"(residual {resid:.3e})")
    # The residual test is absolute, so other modes can survive far below the
    # sup-norm scale in the tail.  Each extra sweep damps them by about the
    # relative shift offset; the positive M-matrix solves keep the tail
    # componentwise accurate.
    for _ in range(tail_sweeps):
        u = solveh_banded(ab, u, lower=False, check_finite=False)
        u /= np.max(np.abs(u))

    q = u.copy()
    q[0] *= math.sqrt(2.0)  # undo the similarity on the Neumann node
    q = np.maximum(q, 0.0)
    q /= q.max()
    values = np.append(q, 0.0)
    return EigenPair(gamma, theta, values, SUP_ONE, b, residual=resid, iterations=it)


def _trait_potential(spec, shift=0.0):
    return lambda th: 1.0 - spec.m(th) + shift


def default_truncation(spec):
    """``max(10, 2 eta_1(10))`` for specs where eta is defined, else 10."""
    if spec.kind == "zero":
        return 10.0
    return max(10.0, 2.0 * (eta(PhiProfile(spec), 1.0, 10.0) - spec.theta_min))


def gamma_infinity(spec, tol=1e-9, b0=None, h=0.01, b_max=1e4, return_history=False):
    """Half-line principal eigenvalue of ``Q'' + (1 - m) Q`` by truncation doubling.

    The grid spacing ``h`` is held fixed while ``b`` doubles, so successive
    values differ only by truncation error.  Dirichlet truncation makes the
    sequence nondecreasing in ``b``; a decrease beyond round-off signals a
    grid that is too coarse.
    """
    if spec.kind == "zero":
        raise DomainError("gamma_infinity needs an unbounded trade-off (m -> infinity)")
    b = float(b0) if b0 is not None else default_truncation(spec)
    N = max(64, int(math.ceil(b / h)))
    history = []
    prev = None
    while True:
        b = N * h
        g = principal_eigenpair(_trait_potential(spec), spec.theta_min, b, N).eigenvalue
        history.append((b, g))
        if prev is not None:
            if g < prev - max(1e-10, 1e-3 * tol):
                raise NumericError(f"truncation sequence not monotone: {history}")
            if abs(g - prev) < tol:
                break
        if b > b_max:
            raise NumericError(f"gamma_infinity did not settle before b={b_max}: {history}")
        prev = g
        N *= 2
    return (g, history) if return_history else g


def ground_state_Q(spec, b, N=DEFAULT_N, normalization=SUP_ONE):
    """Principal pair of ``Q'' + (1 - m) Q = gamma Q`` on the truncation ``b``."""
    pair = principal_eigenpair(_trait_potential(spec), spec.theta_min, b, N)
    if normalization == INTEGRAL_EQUALS_EIGENVALUE:
        if pair.eigenvalue <= 0:
            raise DomainError("integral normalisation needs a positive eigenvalue")
        pair.values = pair.values * (pair.eigenvalue / pair.integral())
    elif normalization != SUP_ONE:
        raise DomainError(f"unknown normalization {normalization!r}")
    pair.normalization = normalization
    return pair


def tail_eigenfunction(spec, b, N=DEFAULT_N, delta=0.5):
    """``Q^delta_b``: principal pair for the potential ``1 - (1 - delta) m``."""
    return principal_eigenpair(lambda th: 1.0 - (1.0 - delta) * spec.m(th),
                               spec.theta_min, b, N)


def dispersion_c_lambda(spec, lam, b, N=DEFAULT_N, eps=0.0):
    """Speed ``c_lambda`` of the ansatz ``exp(-lambda (x - c t)) Q_lambda(theta)``.

    ``eps`` lowers the growth rate by ``2 eps`` (perturbed problem); the
    resulting speed is ``c_lambda - 2 eps / lambda``.
    """
    if not lam > 0:
        raise DomainError("lambda must be positive")
    pot = lambda th: lam * lam * th + 1.0 - 2.0 * eps - spec.m(th)  # noqa: E731
    return principal_eigenpair(pot, spec.theta_min, b, N).eigenvalue / lam


def truncation_dependent(spec, lam):
    """True when the half-line problem has no solution for this ``lambda``."""
    mu = spec.critical_mu
    if spec.is_sublinear:
        return True
    return mu is not None and lam >= mu


@dataclass
class DispersionCurve:
    lambdas: np.ndarray
    speeds: np.ndarray
    c_star: float
    lambda_star: float
    critical_mu: float | None = None
    boundary_infimum: bool = False
    truncation_dependent: bool = False
    b: float = 0.0
    N: int = 0
    extras: dict = field(default_factory=dict)


def minimal_speed(spec, b, N=DEFAULT_N, n_scan=64, lam_lo=1e-3, lam_hi=None):
    """Minimise ``lambda -> c_lambda`` on a log bracket.

    A coarse log-spaced scan locates the smallest sampled minimiser, then
    golden-section search in ``log lambda`` refines it.  In the critical case
    the scan stops just below ``mu``; if the minimum sits on that end the
    infimum is reported with ``boundary_infimum=True``.
    """
    mu = spec.critical_mu
    if lam_hi is None:
        lam_hi = mu * (1 - 1e-6) if mu is not None else 1e3
    lams = np.geomspace(lam_lo, lam_hi, n_scan)
    speeds = np.array([dispersion_c_lambda(spec, lam, b, N) for lam in lams])
    k = int(np.argmin(speeds))  # first occurrence: smallest minimiser
    curve = DispersionCurve(lams, speeds, float(speeds[k]), float(lams[k]), critical_mu=mu,
                            truncation_dependent=spec.is_sublinear, b=b, N=N)
    if k == n_scan - 1:
        curve.boundary_infimum = True
        return curve
    if k == 0:
        raise NumericError("minimum of c_lambda at the lower end of the scan; lower lam_lo")
    f = lambda s: dispersion_c_lambda(spec, math.exp(s), b, N)  # noqa: E731
    bracket = (math.log(lams[k - 1]), math.log(lams[k]), math.log(lams[k + 1]))
    res = minimize_scalar(f, bracket=bracket, method="golden", tol=1e-8)
    if res.fun < curve.c_star:
        curve.c_star = float(res.fun)
        curve.lambda_star = float(math.exp(res.x))
    return curve


def box_eigen(spec, r, s, N=DEFAULT_N, frozen_diffusivity=False):
    """Separable Dirichlet box problem on ``(-r, r) x (theta_min, theta_min + s)``.

    The x-mode ``cos(pi xi / (2 r))`` contributes ``-pi^2 d / (4 r^2)`` with
    ``d = theta`` (or ``d = theta_min`` when ``frozen_diffusivity``).
    Returns ``(gamma_rs, V)`` with ``||V||_inf = 1``.
    """
    if not (r > 0 and s > 0):
        raise DomainError("box half-width and height must be positive")
    k2 = math.pi**2 / (4.0 * r * r)
    tm = spec.theta_min
    if frozen_diffusivity:
        pot = lambda th: 1.0 - spec.m(th) - k2 * tm  # noqa: E731
    else:
        pot = lambda th: 1.0 - spec.m(th) - k2 * th  # noqa: E731
    V = principal_eigenpair(pot, tm, s, N)
    return V.eigenvalue, V


def growth_box(spec, gamma_inf, fraction=0.8, r0=5.0, h=0.02, r_max=1e4):
    """Smallest doubling ``r = s`` with ``gamma_{r,s} > fraction * gamma_inf``."""
    r = r0
    while r <= r_max:
        g, _ = box_eigen(spec, r, r, N=max(64, int(r / h)))
        if g > fraction * gamma_inf:
            return r, g
        r *= 2.0
    raise NumericError("no box reached the requested fraction of gamma_inf")
