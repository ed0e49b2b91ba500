"""Leave-one-out cross-validation for the two-stage estimator.

The shortcut avoids ``n`` refits. The clean deleted estimate comes from the
exact rank-one downdate (:func:`~advtwostage.linmodel.loo_delta`), and the
deleted shrinkage parameter from a first-order expansion of the second-stage
stationarity condition around the full-sample solution:

    alpha^{-j} - alpha ~= v'w_j / |v|^2
    v   = eps c0 A1 (th~ - th^) + eps c0 A2 th~ + A3
    w_j = eps c0 (A4'D_j) (th~ - th^) + eps c0 (A5'D_j) th~

with ``D_j = th^{-j} - th^``. Two coefficient sets are available:

``"corrected"`` (default)
    Derivatives of the two ratios appearing in the stationarity condition,
    ``|th~| / sqrt(|th~ - th^|^2 + sigma2)`` and its reciprocal. This is the
    exact linearisation; its error is quadratic in ``|D_j|``.
``"uncorrected"``
    The same layout with ``sigma2`` dropped from the norms and ``+`` in the
    first term of ``A5``. Its error is only first order; kept for comparison.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .advrisk import C0, FixedPointResult, solve_alpha, two_stage_map
from .errors import ArgumentError, DegenerateContextError, DegenerateLeverageError, SelectionError
from .linmodel import Dataset, RidgeFit, loo_delta, loo_deltas, ridge_fit

#: below this attack radius the shortcut coefficients are singular
EPS_MIN = 1e-6

DEFAULT_GRID = tuple(float(v) for v in np.logspace(-3, np.log10(30.0), 25))

COEFF_FORMS = ("corrected", "uncorrected")


@dataclass(frozen=True)
class ShortcutContext:
    """Full-sample quantities feeding the deleted-``alpha`` expansion.

    ``A3``, ``A4`` and ``A5`` are stored as vectors (``A4``, ``A5`` act on
    ``D_j`` by inner product). ``slope`` is the scalar ``k`` such that
    ``alpha^{-j} - alpha = k * (theta_hat' D_j)``, which holds because every
    vector above is parallel to ``theta_hat`` when the covariance is identity.
    """

    theta_tilde: np.ndarray
    theta_hat: np.ndarray
    alpha: float
    eps: float
    sigma2: float
    A1: float
    A2: float
    A3: np.ndarray
    A4: np.ndarray
    A5: np.ndarray
    v: np.ndarray
    slope: float
    form: str


@dataclass
class CvReport:
    lambda_grid: list
    cv_shortcut: list
    eps: float
    sigma2: float
    lambda_star: float
    cv_exact: Optional[list] = None
    coeff_form: str = "corrected"
    skipped: list = field(default_factory=list)


def _literal_coeffs(theta_hat, alpha, eps, sigma2, form):
    """Evaluate the coefficients with explicit matrices, Sigma = I."""
    d = theta_hat.shape[0]
    Sigma = np.eye(d)
    M1 = np.linalg.inv(Sigma + alpha * np.eye(d))
    M2 = M1 @ M1
    tt = M1 @ Sigma @ theta_hat
    diff = tt - theta_hat
    D = math.sqrt(float(diff @ Sigma @ diff) + (sigma2 if form == "corrected" else 0.0))
    N = float(np.linalg.norm(tt))
    sgn = -1.0 if form == "corrected" else 1.0
    A1 = tt @ M2 @ Sigma @ theta_hat / (D * N) - N / D**3 * (diff @ Sigma @ M2 @ Sigma @ theta_hat)
    A2 = diff @ Sigma @ M2 @ Sigma @ theta_hat / (D * N) - D / N**3 * (tt @ Sigma @ M2 @ theta_hat)
    A3 = (1.0 + eps * C0 * N / D) * (Sigma @ M1 @ tt) + (eps * C0 * D / N + eps**2) * (M1 @ tt)
    A4 = tt @ M1 @ Sigma / (D * N) + N / D**3 * alpha * (diff @ Sigma @ M1)
    A5 = sgn * alpha * (diff @ Sigma @ M1) / (D * N) - D / N**3 * (tt @ M1 @ Sigma)
    v = eps * C0 * A1 * (Sigma @ diff) + eps * C0 * A2 * tt + A3
    return float(A1), float(A2), A3, A4, A5, v


def shortcut_coeffs(
    theta_hat, alpha, eps, sigma2: Optional[float] = None, form: str = "corrected", check: bool = True
) -> ShortcutContext:
    """Coefficients of the deleted-``alpha`` expansion at ``(theta_hat, alpha)``.

    The scalar specialisation for identity covariance is used for the
    returned values; with ``check`` the explicit-matrix evaluation is also run
    and the two are required to agree to 1e-12. ``sigma2`` is required by the
    ``"corrected"`` form only.
    """
    if form not in COEFF_FORMS:
        raise ArgumentError(f"unknown coefficient form {form!r}")
    if sigma2 is None:
        if form == "corrected":
            raise ArgumentError("the corrected form needs sigma2")
        sigma2 = 0.0
    theta_hat = np.asarray(theta_hat, dtype=float)
    if isinstance(alpha, FixedPointResult):
        if alpha.diverged:
            raise DegenerateContextError("fixed point diverged; the two-stage estimate is zero")
        alpha = alpha.alpha
    if eps < EPS_MIN:
        raise DegenerateContextError(f"eps={eps} below {EPS_MIN}: coefficients are singular")
    if not math.isfinite(alpha) or alpha < 0:
        raise DegenerateContextError(f"alpha must be finite and >= 0, got {alpha}")
    t = float(np.linalg.norm(theta_hat))
    if t == 0.0:
        raise DegenerateContextError("clean estimate is zero")

    c = 1.0 / (1.0 + alpha)
    tt = c * theta_hat
    diff = tt - theta_hat
    resid = -alpha * c * theta_hat
    if not np.allclose(diff, resid, rtol=0, atol=1e-12 * max(1.0, t)):
        raise AssertionError("identity-covariance residual mismatch")
    t2 = t * t
    D = math.sqrt(alpha * alpha * c * c * t2 + (sigma2 if form == "corrected" else 0.0))
    N = c * t
    if D == 0.0:
        raise DegenerateContextError("|theta_tilde - theta_hat| is zero; expansion undefined")
    sgn = -1.0 if form == "corrected" else 1.0
    # inner products with theta_hat of M^-2 theta_hat etc.
    tt_M2_th = c**3 * t2
    diff_M2_th = -alpha * c**3 * t2
    A1 = tt_M2_th / (D * N) - N / D**3 * diff_M2_th
    A2 = diff_M2_th / (D * N) - D / N**3 * tt_M2_th
    a3 = ((1.0 + eps * C0 * N / D) + (eps * C0 * D / N + eps**2)) * c * c
    a4 = c * c / (D * N) + N / D**3 * alpha * (-alpha * c * c)
    a5 = sgn * alpha * (-alpha * c * c) / (D * N) - D / N**3 * c * c
    A3, A4, A5 = a3 * theta_hat, a4 * theta_hat, a5 * theta_hat
    kv = eps * C0 * A1 * (-alpha * c) + eps * C0 * A2 * c + a3
    v = kv * theta_hat
    if kv == 0.0:
        raise DegenerateContextError("expansion direction v vanishes")
    kw = eps * C0 * a4 * (-alpha * c) + eps * C0 * a5 * c
    slope = kw / kv

    if check:
        L = _literal_coeffs(theta_hat, alpha, eps, sigma2, form)
        for name, lit, spec in zip(("A1", "A2", "A3", "A4", "A5", "v"), L, (A1, A2, A3, A4, A5, v)):
            scale = max(1.0, float(np.max(np.abs(spec))))
            if float(np.max(np.abs(np.asarray(lit) - spec))) > 1e-12 * scale:
                raise AssertionError(f"{name}: matrix and scalar evaluations disagree")

    return ShortcutContext(
        theta_tilde=tt,
        theta_hat=theta_hat,
        alpha=float(alpha),
        eps=float(eps),
        sigma2=float(sigma2),
        A1=float(A1),
        A2=float(A2),
        A3=A3,
        A4=A4,
        A5=A5,
        v=v,
        slope=float(slope),
        form=form,
    )


def alpha_loo(ctx: ShortcutContext, delta_j) -> float:
    """First-order estimate of the deleted ``alpha``; ``delta_j`` is
    ``theta_hat^{-j} - theta_hat``."""
    delta_j = np.asarray(delta_j, dtype=float)
    k = ctx.eps * C0
    w = k * float(ctx.A4 @ delta_j) * (ctx.theta_tilde - ctx.theta_hat) + k * float(
        ctx.A5 @ delta_j
    ) * ctx.theta_tilde
    return ctx.alpha + float(ctx.v @ w) / float(ctx.v @ ctx.v)


def _clamp_alpha(a):
    # the deleted problem has alpha >= 0; a linearisation can overshoot
    return max(a, 0.0)


def shortcut_loo_estimate(ctx: ShortcutContext, fit: RidgeFit, data: Dataset, j: int) -> np.ndarray:
    """Approximate two-stage estimate with sample ``j`` removed."""
    delta = -loo_delta(fit, data, j)
    a = _clamp_alpha(alpha_loo(ctx, delta))
    return (ctx.theta_hat + delta) * (1.0 / (1.0 + a))


def _adv_losses(X, y, thetas, eps):
    """Row-wise ``(|x_j'theta_j - y_j| + eps |theta_j|)^2``."""
    r = np.abs(np.einsum("ij,ij->i", X, thetas) - y)
    return (r + eps * np.linalg.norm(thetas, axis=1)) ** 2


def classical_ridge_loo(data: Dataset, lam, fit: Optional[RidgeFit] = None) -> float:
    """``mean(((y_j - yhat_j) / (1 - S_j))^2)``."""
    fit = fit if fit is not None else ridge_fit(data, lam)
    _require_leverage(fit)
    return float(np.mean(((data.y - fit.fitted) / (1.0 - fit.leverage)) ** 2))


def _require_leverage(fit):
    bad = np.flatnonzero(fit.leverage >= 1.0 - 1e-12)
    if bad.size:
        j = int(bad[0])
        raise DegenerateLeverageError(f"sample {j} has leverage {fit.leverage[j]:.6g} >= 1", index=j)


def shortcut_loo_estimates(data: Dataset, lam, eps, sigma2, form="corrected", fit=None):
    """All approximate deleted two-stage estimates, one row per sample."""
    if not lam > 0:
        raise ArgumentError("shortcut CV needs lambda > 0")
    fit = fit if fit is not None else ridge_fit(data, lam)
    _require_leverage(fit)
    deltas = -loo_deltas(fit, data)
    th_del = fit.theta_hat[None, :] + deltas
    if eps < EPS_MIN:
        # attack too small for the expansion: classical deleted ridge
        return th_del if eps == 0 else th_del / (1.0 + solve_alpha_vec(th_del, sigma2, eps))[:, None]
    fp = solve_alpha(float(np.linalg.norm(fit.theta_hat)), sigma2, eps)
    if fp.diverged:
        return np.zeros_like(th_del)
    ctx = shortcut_coeffs(fit.theta_hat, fp.alpha, eps, sigma2, form=form, check=False)
    alphas = np.maximum(ctx.alpha + ctx.slope * (deltas @ fit.theta_hat), 0.0)
    return th_del * (1.0 / (1.0 + alphas))[:, None]


def solve_alpha_vec(thetas, sigma2, eps):
    out = np.empty(thetas.shape[0])
    for j, th in enumerate(thetas):
        fp = solve_alpha(float(np.linalg.norm(th)), sigma2, eps)
        out[j] = np.inf if fp.diverged else fp.alpha
    return out


def shortcut_cv(data: Dataset, lam, eps, sigma2, form="corrected", fit: Optional[RidgeFit] = None) -> float:
    """Shortcut leave-one-out adversarial CV loss; ``fit`` reuses a ridge fit
    at the same ``lam``."""
    thetas = shortcut_loo_estimates(data, lam, eps, sigma2, form=form, fit=fit)
    return float(np.mean(_adv_losses(data.X, data.y, thetas, eps)))


def exact_deleted_ridge(data: Dataset, lam) -> np.ndarray:
    """Clean estimates refit without each sample, one row per sample.

    Each refit keeps the full-sample penalty ``n lam`` on the Gram matrix so
    that the deleted estimate is the one the rank-one downdate describes.
    """
    if not lam > 0:
        raise ArgumentError("exact CV needs lambda > 0")
    n = data.n
    if n < 2:
        raise ArgumentError("leave-one-out needs at least two samples")
    lam_del = lam * n / (n - 1)
    return np.array([ridge_fit(data.drop(j), lam_del).theta_hat for j in range(n)])


def _stage_two_rows(thetas, sigma2, eps):
    return np.array([two_stage_map(th, solve_alpha(float(np.linalg.norm(th)), sigma2, eps)) for th in thetas])


def exact_loo_estimates(data: Dataset, lam, eps, sigma2) -> np.ndarray:
    """Deleted two-stage estimates by brute-force refits."""
    return _stage_two_rows(exact_deleted_ridge(data, lam), sigma2, eps)


def exact_cv(data: Dataset, lam, eps, sigma2) -> float:
    """Brute-force leave-one-out adversarial CV loss."""
    thetas = exact_loo_estimates(data, lam, eps, sigma2)
    return float(np.mean(_adv_losses(data.X, data.y, thetas, eps)))


def exact_cv_many(data: Dataset, lam, eps_list, sigma2) -> dict:
    """:func:`exact_cv` for several ``eps`` sharing one set of refits."""
    base = exact_deleted_ridge(data, lam)
    return {
        e: float(np.mean(_adv_losses(data.X, data.y, _stage_two_rows(base, sigma2, e), e)))
        for e in eps_list
    }


def select_lambda(
    data: Dataset,
    grid: Sequence[float] = DEFAULT_GRID,
    eps: float = 0.0,
    sigma2: float = 1.0,
    use_exact: bool = False,
    form: str = "corrected",
) -> CvReport:
    """Shortcut CV over ``grid``; ties go to the smallest penalty."""
    grid = [float(g) for g in grid]
    if not grid or any(not g > 0 for g in grid):
        raise ArgumentError("grid must be nonempty and strictly positive")
    order = sorted(range(len(grid)), key=lambda i: grid[i])
    grid = [grid[i] for i in order]
    cv, ex, skipped = [], [] if use_exact else None, []
    for lam in grid:
        try:
            cv.append(shortcut_cv(data, lam, eps, sigma2, form=form))
        except (DegenerateLeverageError, DegenerateContextError) as exc:
            warnings.warn(f"lambda={lam}: {exc}", RuntimeWarning, stacklevel=2)
            cv.append(math.nan)
            skipped.append(lam)
        if use_exact:
            ex.append(exact_cv(data, lam, eps, sigma2))
    vals = np.asarray(cv)
    if np.all(np.isnan(vals)):
        raise SelectionError("every grid point was degenerate")
    best = int(np.nanargmin(vals))
    return CvReport(
        lambda_grid=grid,
        cv_shortcut=cv,
        cv_exact=ex,
        lambda_star=grid[best],
        eps=float(eps),
        sigma2=float(sigma2),
        coeff_form=form,
        skipped=skipped,
    )
