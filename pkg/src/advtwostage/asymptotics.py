"""Proportional-asymptotics limits for the clean ridge estimate and the
two-stage adversarial estimate.

Everything is expressed through the companion Stieltjes transform
``m(-lam)`` of the Marchenko-Pastur law with aspect ratio ``gamma = d/n``,
the positive root of ``gamma lam m^2 + (1 - gamma + lam) m - 1 = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .advrisk import best_robust_risk, population_adv_risk, solve_alpha
from .errors import ArgumentError, PoleError
from .linmodel import RIDGELESS_THRESHOLD


@dataclass(frozen=True)
class AspectRatio:
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ArgumentError(f"gamma must be > 0, got {self.gamma}")


@dataclass(frozen=True)
class CleanLimits:
    dist2: float
    norm2: float
    inner: float


@dataclass(frozen=True)
class TwoStageLimits:
    alpha: float
    dist2: float
    norm2: float
    excess_risk: float


def _check(gamma, lam):
    if not gamma > 0:
        raise ArgumentError(f"gamma must be > 0, got {gamma}")
    if not lam > 0:
        raise ArgumentError(f"lambda must be > 0, got {lam}")


def stieltjes_m(gamma: float, lam: float) -> float:
    """``m_gamma(-lam)`` for ``gamma, lam > 0``."""
    _check(gamma, lam)
    b = 1.0 - gamma + lam
    disc = math.sqrt(b * b + 4.0 * lam * gamma)
    # pick the cancellation-free form of the positive root
    if b >= 0:
        m = 2.0 / (b + disc)
    else:
        m = (disc - b) / (2.0 * gamma * lam)
    # one Newton step on the quadratic tidies the last ulp or two
    q = gamma * lam * m * m + b * m - 1.0
    m -= q / (2.0 * gamma * lam * m + b)
    return m


def stieltjes_m_prime(gamma: float, lam: float) -> float:
    """Derivative ``dm/dz`` at ``z = -lam`` by implicit differentiation."""
    m = stieltjes_m(gamma, lam)
    return (gamma * m * m + m) / (2.0 * gamma * lam * m + 1.0 - gamma + lam)


def _ridgeless_limits(gamma, r2, sigma2) -> CleanLimits:
    if gamma == 1.0:
        raise PoleError("ridgeless risk diverges at gamma = 1")
    if gamma < 1.0:
        var = sigma2 * gamma / (1.0 - gamma)
        return CleanLimits(dist2=var, norm2=r2 + var, inner=r2)
    var = sigma2 / (gamma - 1.0)
    return CleanLimits(dist2=r2 * (1.0 - 1.0 / gamma) + var, norm2=r2 / gamma + var, inner=r2 / gamma)


def theory_clean_limits(gamma, lam, r2, sigma2) -> CleanLimits:
    """Limits of ``|theta_hat - theta0|^2``, ``|theta_hat|^2`` and
    ``theta_hat' theta0`` for the ridge estimate.

    ``lam`` below the ridgeless threshold uses the closed-form ``lam -> 0``
    limits; ``gamma == 1`` is then a pole.
    """
    if not gamma > 0:
        raise ArgumentError(f"gamma must be > 0, got {gamma}")
    if lam < 0 or r2 < 0 or sigma2 < 0:
        raise ArgumentError("lambda, r2 and sigma2 must be >= 0")
    if lam < RIDGELESS_THRESHOLD:
        return _ridgeless_limits(gamma, r2, sigma2)
    m = stieltjes_m(gamma, lam)
    mp = stieltjes_m_prime(gamma, lam)
    var = sigma2 * gamma * (m - lam * mp)
    dist2 = lam * lam * r2 * mp + var
    norm2 = r2 * (1.0 - 2.0 * lam * m + lam * lam * mp) + var
    inner = 0.5 * (r2 + norm2 - dist2)
    return CleanLimits(dist2=dist2, norm2=norm2, inner=inner)


def theory_two_stage_limits(gamma, lam, r2, sigma2, eps) -> TwoStageLimits:
    """Limits for the two-stage estimate ``theta_hat / (1 + alpha)``.

    ``excess_risk`` is measured against the best robust model for a truth of
    squared norm ``r2``. A diverged fixed point yields the zero estimate.
    """
    clean = theory_clean_limits(gamma, lam, r2, sigma2)
    fp = solve_alpha(math.sqrt(clean.norm2), sigma2, eps)
    c = fp.shrinkage
    norm2 = c * c * clean.norm2
    dist2 = max(norm2 + r2 - 2.0 * c * clean.inner, 0.0)
    risk = population_adv_risk(dist2, norm2, sigma2, eps).risk
    return TwoStageLimits(
        alpha=fp.alpha, dist2=dist2, norm2=norm2, excess_risk=risk - best_robust_risk(r2, sigma2, eps)
    )


def theory_clean_excess_risk(gamma, lam, r2, sigma2, eps) -> float:
    """Limiting excess adversarial risk of the clean estimate itself."""
    clean = theory_clean_limits(gamma, lam, r2, sigma2)
    risk = population_adv_risk(clean.dist2, clean.norm2, sigma2, eps).risk
    return risk - best_robust_risk(r2, sigma2, eps)
