"""Population adversarial risk under the isotropic Gaussian model and the
analytic (infinite pseudo-labelled sample) second stage.

For ``x ~ N(0, I)`` and ``y = x'theta_ref + N(0, sigma2)`` the expected
l2-ball adversarial squared loss of ``theta`` is::

    R = D + sigma2 + 2 c0 eps |theta| sqrt(D + sigma2) + eps^2 |theta|^2

with ``D = |theta - theta_ref|^2`` and ``c0 = sqrt(2/pi)``. Its minimiser is
``theta_ref / (1 + alpha)`` where ``alpha`` solves a scalar fixed-point
equation (:func:`solve_alpha`).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .linmodel import GroundTruth, SeedLike, make_rng

C0 = math.sqrt(2.0 / math.pi)

ALPHA_BRACKET_MAX = 1e8


@dataclass(frozen=True)
class RiskBreakdown:
    dist2: float
    norm2: float
    risk: float
    eps: float
    sigma2: float


@dataclass(frozen=True)
class FixedPointResult:
    """Outcome of :func:`solve_alpha`.

    ``diverged`` means the risk along the ray is minimised at the origin;
    ``alpha`` is then ``inf`` and :func:`two_stage_map` returns zero.
    """

    alpha: float
    residual: float
    iterations: int
    diverged: bool

    @property
    def shrinkage(self) -> float:
        """Multiplier ``1/(1+alpha)`` applied to the reference estimate."""
        return 0.0 if self.diverged else 1.0 / (1.0 + self.alpha)


def population_adv_risk(dist2, norm2, sigma2, eps) -> RiskBreakdown:
    for name, v in (("dist2", dist2), ("norm2", norm2), ("sigma2", sigma2), ("eps", eps)):
        if v < 0 or not math.isfinite(v):
            raise ArgumentError(f"{name} must be finite and >= 0, got {v}")
    risk = (
        dist2
        + sigma2
        + 2.0 * C0 * eps * math.sqrt(norm2) * math.sqrt(dist2 + sigma2)
        + eps * eps * norm2
    )
    return RiskBreakdown(float(dist2), float(norm2), float(risk), float(eps), float(sigma2))


def adv_risk(theta, theta_ref, sigma2, eps) -> float:
    """``R_eps(theta, theta_ref)`` for explicit vectors."""
    theta = np.asarray(theta, dtype=float)
    diff = theta - np.asarray(theta_ref, dtype=float)
    return population_adv_risk(float(diff @ diff), float(theta @ theta), sigma2, eps).risk


def adv_loss_pointwise(x, y, theta, eps) -> float:
    """Worst-case squared loss over ``|delta| <= eps``: ``(|x'theta - y| + eps|theta|)^2``."""
    theta = np.asarray(theta, dtype=float)
    r = abs(float(np.dot(x, theta)) - y)
    return (r + eps * float(np.linalg.norm(theta))) ** 2


def alpha_equation(alpha, norm_theta, sigma2, eps):
    """Left minus right side of the stationarity equation for ``alpha``."""
    t = norm_theta
    s = np.sqrt(t * t * alpha * alpha + sigma2 * (1.0 + alpha) ** 2)
    return alpha + eps * C0 * alpha * t / s - eps * C0 * s / t - eps * eps


def solve_alpha(norm_theta, sigma2, eps, tol=1e-10) -> FixedPointResult:
    """Bracketed bisection for the shrinkage parameter ``alpha``.

    The bracket starts at ``[0, 1]`` and its upper end doubles until the
    equation changes sign; if no sign change occurs below
    :data:`ALPHA_BRACKET_MAX` the minimiser is the zero vector and a diverged
    result is returned.
    """
    if norm_theta < 0 or sigma2 < 0 or eps < 0:
        raise ArgumentError("norm_theta, sigma2 and eps must be >= 0")
    if eps == 0:
        return FixedPointResult(alpha=0.0, residual=0.0, iterations=0, diverged=False)
    if norm_theta == 0:
        return FixedPointResult(alpha=math.inf, residual=0.0, iterations=0, diverged=True)
    if sigma2 == 0:
        # noiseless: the risk along the ray is piecewise quadratic in the
        # shrinkage c with a kink at c = 1, so minimise it directly
        c = (1.0 - eps * C0) / (1.0 - 2.0 * eps * C0 + eps * eps)
        if c <= 0.0:
            return FixedPointResult(alpha=math.inf, residual=0.0, iterations=0, diverged=True)
        alpha = max(0.0, 1.0 / c - 1.0)
        res = abs(alpha_equation(alpha, norm_theta, 0.0, eps)) if alpha > 0 else 0.0
        return FixedPointResult(alpha=alpha, residual=res, iterations=0, diverged=False)

    def f(a):
        return alpha_equation(a, norm_theta, sigma2, eps)

    lo, hi = 0.0, 1.0
    it = 0
    while f(hi) <= 0.0:
        lo, hi = hi, 2.0 * hi
        it += 1
        if hi > ALPHA_BRACKET_MAX:
            return FixedPointResult(alpha=math.inf, residual=0.0, iterations=it, diverged=True)
    mid = 0.5 * (lo + hi)
    f_mid = f(mid)
    while abs(f_mid) >= tol:
        it += 1
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
        new = 0.5 * (lo + hi)
        if new == lo or new == hi:
            break
        mid = new
        f_mid = f(mid)
    return FixedPointResult(alpha=float(mid), residual=float(abs(f_mid)), iterations=it, diverged=False)


def two_stage_map(theta_hat, alpha) -> np.ndarray:
    """``(I + alpha I)^{-1} theta_hat``; a :class:`FixedPointResult` or an
    infinite ``alpha`` maps to the zero vector."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    if isinstance(alpha, FixedPointResult):
        return theta_hat * alpha.shrinkage
    if alpha < 0:
        raise ArgumentError(f"alpha must be >= 0, got {alpha}")
    if math.isinf(alpha):
        return np.zeros_like(theta_hat)
    return theta_hat / (1.0 + alpha)


def best_robust_model(truth: GroundTruth, eps, tol=1e-10):
    """Minimiser of ``R_eps(., theta0)`` and its risk."""
    fp = solve_alpha(math.sqrt(truth.r2), truth.sigma2, eps, tol)
    theta_eps = two_stage_map(truth.theta0, fp)
    return theta_eps, adv_risk(theta_eps, truth.theta0, truth.sigma2, eps)


def best_robust_risk(r2, sigma2, eps, tol=1e-10) -> float:
    """Risk of the best robust model using only ``|theta0|^2``."""
    fp = solve_alpha(math.sqrt(r2), sigma2, eps, tol)
    c = fp.shrinkage
    return population_adv_risk((1.0 - c) ** 2 * r2, c * c * r2, sigma2, eps).risk


def excess_adv_risk(theta, truth: GroundTruth, eps) -> float:
    """``R_eps(theta, theta0) - R_eps(theta_eps, theta0)``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != truth.theta0.shape:
        raise ArgumentError(f"theta has shape {theta.shape}, expected {truth.theta0.shape}")
    return adv_risk(theta, truth.theta0, truth.sigma2, eps) - best_robust_risk(
        truth.r2, truth.sigma2, eps
    )


def mc_adv_risk(theta, truth: GroundTruth, eps, m: int, seed: SeedLike, chunk: int = 200_000):
    """Monte Carlo estimate of ``R_eps(theta, theta0)`` with its standard error.

    Draws ``m`` fresh pairs from the data model and averages the closed-form
    pointwise adversarial loss. With ``m == 1`` the standard error is
    undefined and returned as ``nan``.
    """
    if m < 1:
        raise ArgumentError(f"m must be >= 1, got {m}")
    theta = np.asarray(theta, dtype=float)
    rng = make_rng(seed)
    d = truth.d
    pen = eps * float(np.linalg.norm(theta))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < m:
        k = min(chunk, m - done)
        X = rng.standard_normal((k, d))
        y = X @ truth.theta0 + rng.standard_normal(k) * math.sqrt(truth.sigma2)
        loss = (np.abs(X @ theta - y) + pen) ** 2
        total += float(loss.sum())
        total_sq += float((loss * loss).sum())
        done += k
    mean = total / m
    if m == 1:
        warnings.warn("standard error undefined for m == 1", RuntimeWarning, stacklevel=2)
        return mean, math.nan
    var = max(total_sq - m * mean * mean, 0.0) / (m - 1)
    return mean, math.sqrt(var / m)
