"""Vanilla adversarial training on the labelled sample.

Minimises the empirical l2-ball adversarial loss with ridge penalty::

    F(theta) = mean_i (|y_i - x_i'theta| + eps |theta|)^2 + lam |theta|^2

which is convex in ``theta``. Two solvers are provided:

``"mm"`` (default)
    Majorise-minimise. The cross term ``|theta| |r_i|`` is bounded by
    ``(a_i |theta|^2 + r_i^2 / a_i) / 2`` with equality at
    ``a_i = |r_i| / |theta|``, so every step is a weighted ridge solve and
    the objective never increases.
``"subgradient"``
    Full-batch subgradient descent with a halving line search. Simple but
    stalls at residual kinks; kept as a reference method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ArgumentError, NumericError
from .linmodel import Dataset, ridge_fit

_RESIDUAL_FLOOR = 1e-12
_KINK_TOL = 1e-8


@dataclass(frozen=True)
class AdvFitOptions:
    max_iters: int = 20_000
    step0: float = 1.0
    tol: float = 1e-12
    init: str = "ridge"
    method: str = "mm"

    def __post_init__(self):
        if self.max_iters < 1:
            raise ArgumentError("max_iters must be >= 1")
        if not self.step0 > 0:
            raise ArgumentError("step0 must be > 0")
        if not self.tol > 0:
            raise ArgumentError("tol must be > 0")
        if self.init not in ("ridge", "zeros"):
            raise ArgumentError(f"unknown init {self.init!r}")
        if self.method not in ("mm", "subgradient"):
            raise ArgumentError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class AdvFitResult:
    theta: np.ndarray
    objective: float
    init_objective: float
    iterations: int
    converged: bool
    history: np.ndarray


def adv_objective(data: Dataset, theta, eps, lam) -> float:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (data.d,):
        raise ArgumentError(f"theta has shape {theta.shape}, expected ({data.d},)")
    r = np.abs(data.y - data.X @ theta)
    nt = float(np.linalg.norm(theta))
    return float(np.mean((r + eps * nt) ** 2) + lam * nt * nt)


def adv_subgradient(data: Dataset, theta, eps, lam) -> np.ndarray:
    """A subgradient of :func:`adv_objective`, choosing 0 at ``r_i = 0`` and
    at ``theta = 0``."""
    theta = np.asarray(theta, dtype=float)
    r = data.y - data.X @ theta
    nt = float(np.linalg.norm(theta))
    u = np.abs(r) + eps * nt
    g = -2.0 * (data.X.T @ (u * np.sign(r))) / data.n
    if nt > 0:
        g += 2.0 * eps * float(np.mean(u)) * theta / nt
    return g + 2.0 * lam * theta


def _initial_theta(data, lam, opts):
    if opts.init == "zeros":
        return np.zeros(data.d)
    # the ridgeless warm start is the minimum-norm interpolator when d > n
    try:
        return ridge_fit(data, lam).theta_hat
    except np.linalg.LinAlgError:
        return ridge_fit(data, 1e-6).theta_hat


def _check_finite(f, k):
    if not np.isfinite(f):
        raise NumericError(f"non-finite objective at iteration {k}")


def _solve_mm(data, eps, lam, theta, opts):
    X, y = data.X, data.y
    n, d = X.shape
    f = adv_objective(data, theta, eps, lam)
    hist = [f]
    K = X @ X.T if d > n else None
    floor = _RESIDUAL_FLOOR * max(1.0, float(np.max(np.abs(y))))
    converged = False
    k = 0
    for k in range(1, opts.max_iters + 1):
        s = float(np.linalg.norm(theta))
        r = y - X @ theta
        if s == 0.0:
            # majoriser undefined at the origin; a ridge step with the
            # attack folded into the penalty is a descent candidate
            w = np.ones(n)
            mu = eps * eps + lam + eps * float(np.mean(np.abs(y)))
        else:
            w = 1.0 + eps * s / np.maximum(np.abs(r), floor)
            mu = eps * float(np.mean(np.abs(r))) / s + eps * eps + lam
        if K is not None:
            sw = np.sqrt(w)
            A = sw[:, None] * K * sw[None, :]
            A[np.diag_indices(n)] += n * mu
            cand = X.T @ (sw * linalg.solve(A, sw * y, assume_a="pos", check_finite=False))
        else:
            A = X.T @ (w[:, None] * X)
            A[np.diag_indices(d)] += n * mu
            cand = linalg.solve(A, X.T @ (w * y), assume_a="pos", check_finite=False)
        fc = adv_objective(data, cand, eps, lam)
        _check_finite(fc, k)
        if fc > f:
            converged = True
            break
        done = f - fc <= opts.tol * max(abs(f), 1e-300)
        theta, f = cand, fc
        hist.append(f)
        if done:
            converged = True
            break
    return theta, f, k, converged, hist


def _solve_subgradient(data, eps, lam, theta, opts):
    f = adv_objective(data, theta, eps, lam)
    hist = [f]
    best_theta, best_f = theta, f
    step = opts.step0
    converged = False
    k = 0
    for k in range(1, opts.max_iters + 1):
        g = adv_subgradient(data, theta, eps, lam)
        if not np.any(g):
            converged = True
            break
        while True:
            cand = theta - step * g
            fc = adv_objective(data, cand, eps, lam)
            _check_finite(fc, k)
            if fc <= f:
                break
            step *= 0.5
            if step < 1e-30:
                return best_theta, best_f, k, True, hist
        theta, f = cand, fc
        hist.append(f)
        if f < best_f:
            best_theta, best_f = theta, f
        step *= 2.0
        if len(hist) > 50 and hist[-51] - f <= opts.tol * max(abs(f), 1e-300):
            converged = True
            break
    return best_theta, best_f, k, converged, hist


def vanilla_adv_solve(data: Dataset, eps, lam, opts: AdvFitOptions = AdvFitOptions()) -> AdvFitResult:
    """Minimise the empirical adversarial objective and report diagnostics."""
    if eps < 0 or lam < 0:
        raise ArgumentError("eps and lambda must be >= 0")
    theta = _initial_theta(data, lam, opts)
    f0 = adv_objective(data, theta, eps, lam)
    _check_finite(f0, 0)
    solver = _solve_mm if opts.method == "mm" else _solve_subgradient
    theta, f, k, converged, hist = solver(data, eps, lam, theta, opts)
    return AdvFitResult(
        theta=theta,
        objective=f,
        init_objective=f0,
        iterations=k,
        converged=converged,
        history=np.asarray(hist),
    )


def vanilla_adv_fit(data: Dataset, eps, lam, opts: AdvFitOptions = AdvFitOptions()) -> np.ndarray:
    """Vanilla adversarially trained estimate."""
    return vanilla_adv_solve(data, eps, lam, opts).theta


def stationarity(data: Dataset, theta, eps, lam):
    """Norm of the sign-based subgradient at ``theta`` and whether the point
    sits on a kink (a zero residual or ``theta = 0``), where that norm does
    not certify anything."""
    theta = np.asarray(theta, dtype=float)
    r = data.y - data.X @ theta
    scale = max(1.0, float(np.max(np.abs(data.y))))
    on_kink = bool(np.any(np.abs(r) < _KINK_TOL * scale) or not np.any(theta))
    return float(np.linalg.norm(adv_subgradient(data, theta, eps, lam))), on_kink
