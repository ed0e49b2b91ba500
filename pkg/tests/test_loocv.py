import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from advtwostage import loocv
from advtwostage.advrisk import C0, FixedPointResult, solve_alpha, two_stage_map
from advtwostage.errors import ArgumentError, DegenerateContextError, DegenerateLeverageError, SelectionError
from advtwostage.linmodel import Dataset, RidgeFit, gen_gaussian_dataset, loo_delta, ridge_fit, sample_theta0
from advtwostage.loocv import (
    alpha_loo,
    classical_ridge_loo,
    exact_cv,
    exact_cv_many,
    exact_deleted_ridge,
    exact_loo_estimates,
    select_lambda,
    shortcut_coeffs,
    shortcut_cv,
    shortcut_loo_estimate,
    shortcut_loo_estimates,
)

SIGMA2 = 0.01


@pytest.fixture(scope="module")
def ref_data():
    truth = sample_theta0("ones_over_sqrt_d", 200, sigma2=SIGMA2)
    return gen_gaussian_dataset(50, 200, truth, (31, 0))


def ctx_for(theta_hat, eps=0.3, s2=SIGMA2, form="corrected"):
    fp = solve_alpha(float(np.linalg.norm(theta_hat)), s2, eps)
    return shortcut_coeffs(theta_hat, fp, eps, s2, form=form)


# -- coefficients ---------------------------------------------------------------------


@pytest.mark.parametrize("form", ["corrected", "uncorrected"])
def test_literal_and_scalar_forms_agree(form):
    # check=True runs the explicit-matrix path and compares
    th = np.random.default_rng(0).standard_normal(5)
    ctx = shortcut_coeffs(th, 0.4, 0.3, 0.5, form=form, check=True)
    lit = loocv._literal_coeffs(th, 0.4, 0.3, 0.5, form)
    assert ctx.A1 == pytest.approx(lit[0], rel=1e-12)
    assert np.allclose(ctx.v, lit[5], rtol=1e-12)


def test_axis_aligned_orthogonal_delta():
    e1, e2 = np.eye(3)[0], np.eye(3)[1]
    ctx = shortcut_coeffs(e1, 0.4, 0.3, 0.5)
    assert ctx.A4 @ e2 == 0.0 and ctx.A5 @ e2 == 0.0
    assert alpha_loo(ctx, e2) == ctx.alpha


def test_residual_invariant_and_v_nonzero():
    th = np.random.default_rng(1).standard_normal(6)
    ctx = shortcut_coeffs(th, 0.7, 0.2, 0.3)
    assert np.allclose(ctx.theta_tilde - ctx.theta_hat, -0.7 / 1.7 * th, atol=1e-12)
    assert np.linalg.norm(ctx.v) > 0


def test_zero_delta_returns_alpha():
    ctx = ctx_for(np.random.default_rng(2).standard_normal(4) * 0.3)
    assert alpha_loo(ctx, np.zeros(4)) == ctx.alpha


@pytest.mark.parametrize("eps", [0.0, 1e-7])
def test_rejects_small_eps(eps):
    with pytest.raises(DegenerateContextError):
        shortcut_coeffs(np.ones(3), 0.1, eps, 1.0)


def test_rejects_zero_estimate_and_diverged_alpha():
    with pytest.raises(DegenerateContextError):
        shortcut_coeffs(np.zeros(3), 0.1, 0.3, 1.0)
    with pytest.raises(DegenerateContextError):
        shortcut_coeffs(np.ones(3), FixedPointResult(math.inf, 0.0, 0, True), 0.3, 1.0)
    with pytest.raises(DegenerateContextError):
        shortcut_coeffs(np.ones(3), math.inf, 0.3, 1.0)


def test_corrected_form_needs_sigma2():
    with pytest.raises(ArgumentError):
        shortcut_coeffs(np.ones(3), 0.1, 0.3)
    assert shortcut_coeffs(np.ones(3), 0.1, 0.3, form="uncorrected").sigma2 == 0.0
    with pytest.raises(ArgumentError):
        shortcut_coeffs(np.ones(3), 0.1, 0.3, 1.0, form="proof")


def test_slope_matches_vector_formula():
    th = np.random.default_rng(3).standard_normal(5) * 0.2
    ctx = ctx_for(th)
    delta = np.random.default_rng(4).standard_normal(5) * 1e-3
    assert alpha_loo(ctx, delta) == pytest.approx(ctx.alpha + ctx.slope * (th @ delta), rel=1e-12)


def ladder_slope(form, seed):
    rng = np.random.default_rng(seed)
    th = rng.standard_normal(50) * 0.15
    ctx = ctx_for(th, form=form)
    u = rng.standard_normal(50)
    u /= np.linalg.norm(u)
    hs = np.array([1e-2, 1e-3, 1e-4])
    errs = [
        abs(alpha_loo(ctx, h * u) - solve_alpha(float(np.linalg.norm(th + h * u)), SIGMA2, 0.3, tol=1e-15).alpha)
        for h in hs
    ]
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


@pytest.mark.parametrize("seed", range(3))
def test_quadratic_remainder(seed):
    assert ladder_slope("corrected", seed) >= 1.8


def test_uncorrected_form_is_only_first_order():
    assert ladder_slope("uncorrected", 0) < 1.8


# -- deleted estimates ------------------------------------------------------------------


def test_zero_row_leaves_estimate_unchanged():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((20, 4))
    X[3] = 0.0
    data = Dataset(X, rng.standard_normal(20))
    fit = ridge_fit(data, 0.5)
    ctx = ctx_for(fit.theta_hat, s2=1.0)
    assert np.array_equal(shortcut_loo_estimate(ctx, fit, data, 3), ctx.theta_tilde)


def test_per_sample_accuracy(ref_data):
    fit = ridge_fit(ref_data, 1.0)
    short = shortcut_loo_estimates(ref_data, 1.0, 0.3, SIGMA2, fit=fit)
    exact = exact_loo_estimates(ref_data, 1.0, 0.3, SIGMA2)
    rel = np.linalg.norm(short - exact, axis=1) / np.linalg.norm(exact, axis=1)
    assert np.mean(rel < 0.01) >= 0.95
    ctx = ctx_for(fit.theta_hat)
    for j in (0, 17, 49):
        assert np.allclose(shortcut_loo_estimate(ctx, fit, ref_data, j), short[j], rtol=1e-12)


def test_exact_deleted_ridge_matches_downdate(ref_data):
    fit = ridge_fit(ref_data, 1.0)
    ref = exact_deleted_ridge(ref_data, 1.0)
    for j in (0, 25):
        assert np.allclose(ref[j], fit.theta_hat - loo_delta(fit, ref_data, j), rtol=1e-9, atol=1e-12)


# -- CV values ----------------------------------------------------------------------------


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.floats(0.01, 10))
def test_no_attack_is_classical_loo(seed, lam):
    rng = np.random.default_rng(seed)
    data = Dataset(rng.standard_normal((15, 6)), rng.standard_normal(15))
    assert shortcut_cv(data, lam, 0.0, 1.0) == pytest.approx(classical_ridge_loo(data, lam), rel=1e-9)


def test_classical_loo_matches_refits():
    rng = np.random.default_rng(6)
    data = Dataset(rng.standard_normal((12, 4)), rng.standard_normal(12))
    refits = exact_deleted_ridge(data, 0.3)
    direct = np.mean((data.y - np.einsum("ij,ij->i", data.X, refits)) ** 2)
    assert classical_ridge_loo(data, 0.3) == pytest.approx(direct, rel=1e-10)
    assert exact_cv(data, 0.3, 0.0, 1.0) == pytest.approx(direct, rel=1e-10)


def test_total_shrinkage_limit():
    rng = np.random.default_rng(7)
    data = Dataset(rng.standard_normal((40, 5)), rng.standard_normal(40))
    assert shortcut_cv(data, 1e6, 0.3, 1.0) == pytest.approx(np.mean(data.y**2), rel=0.01)


def test_two_sample_hand_enumeration():
    x, y = np.array([1.0, 2.0]), np.array([0.5, 1.5])
    data = Dataset(x[:, None], y)
    lam, eps, s2 = 0.25, 0.3, 0.2
    losses = []
    for j in (0, 1):
        k = 1 - j
        # one remaining row, total penalty 2 * lam
        th = x[k] * y[k] / (x[k] ** 2 + 2 * lam)
        t = abs(th)

        def eq(a):
            D = math.sqrt(a * a * t * t / (1 + a) ** 2 + s2)
            N = t / (1 + a)
            return (a / (1 + a)) * (1 + eps * C0 * N / D) - (eps * C0 * D / N + eps**2) / (1 + a)

        a = optimize.brentq(eq, 0.0, 50.0, xtol=1e-15)
        tt = th / (1 + a)
        losses.append((abs(y[j] - x[j] * tt) + eps * abs(tt)) ** 2)
    assert exact_cv(data, lam, eps, s2) == pytest.approx(np.mean(losses), rel=1e-8)


def test_exact_many_matches_single(ref_data):
    many = exact_cv_many(ref_data, 1.0, (0.0, 0.3), SIGMA2)
    assert many[0.3] == exact_cv(ref_data, 1.0, 0.3, SIGMA2)
    assert many[0.0] == pytest.approx(classical_ridge_loo(ref_data, 1.0), rel=1e-9)


def test_shortcut_close_to_exact(ref_data):
    for lam in (0.5, 1.0, 2.0):
        a, b = shortcut_cv(ref_data, lam, 0.3, SIGMA2), exact_cv(ref_data, lam, 0.3, SIGMA2)
        assert abs(a - b) / b < 0.02


def test_shortcut_needs_positive_penalty():
    data = Dataset(np.eye(3), np.ones(3))
    with pytest.raises(ArgumentError):
        shortcut_cv(data, 0.0, 0.3, 1.0)
    with pytest.raises(ArgumentError):
        exact_cv(data, 0.0, 0.3, 1.0)


def test_tiny_eps_uses_exact_alpha():
    rng = np.random.default_rng(8)
    data = Dataset(rng.standard_normal((20, 3)), rng.standard_normal(20))
    th = shortcut_loo_estimates(data, 0.5, 5e-7, 1.0)
    fit = ridge_fit(data, 0.5)
    j = 4
    th_del = fit.theta_hat - loo_delta(fit, data, j)
    expected = two_stage_map(th_del, solve_alpha(float(np.linalg.norm(th_del)), 1.0, 5e-7))
    assert np.allclose(th[j], expected, rtol=1e-12)


# -- selection -----------------------------------------------------------------------------


def test_single_point_grid():
    rng = np.random.default_rng(9)
    data = Dataset(rng.standard_normal((20, 3)), rng.standard_normal(20))
    assert select_lambda(data, [0.7], eps=0.3).lambda_star == 0.7


def test_ridge_helps_with_heavy_noise():
    truth = sample_theta0("ones_over_sqrt_d", 20, sigma2=9.0)
    data = gen_gaussian_dataset(40, 20, truth, seed=10)
    rep = select_lambda(data, eps=0.0, sigma2=9.0)
    assert rep.lambda_star > min(rep.lambda_grid)
    assert rep.cv_shortcut[rep.lambda_grid.index(rep.lambda_star)] == min(rep.cv_shortcut)


def test_grid_sorted_and_ties_go_low(monkeypatch):
    rng = np.random.default_rng(11)
    data = Dataset(rng.standard_normal((10, 2)), rng.standard_normal(10))
    monkeypatch.setattr(loocv, "shortcut_cv", lambda *a, **k: 1.0)
    rep = select_lambda(data, [3.0, 0.5, 1.0])
    assert rep.lambda_grid == [0.5, 1.0, 3.0] and rep.lambda_star == 0.5


def test_all_degenerate_raises(monkeypatch):
    def boom(data, lam, *a, **k):
        raise DegenerateLeverageError("sample 0 has leverage 1", index=0)

    rng = np.random.default_rng(12)
    data = Dataset(rng.standard_normal((10, 2)), rng.standard_normal(10))
    monkeypatch.setattr(loocv, "shortcut_cv", boom)
    with pytest.warns(RuntimeWarning), pytest.raises(SelectionError):
        select_lambda(data, [0.1, 1.0])


def test_partial_degeneracy_is_skipped(monkeypatch):
    real = loocv.shortcut_cv

    def flaky(data, lam, *a, **k):
        if lam < 0.5:
            raise DegenerateLeverageError("sample 2 has leverage 1", index=2)
        return real(data, lam, *a, **k)

    rng = np.random.default_rng(13)
    data = Dataset(rng.standard_normal((10, 2)), rng.standard_normal(10))
    monkeypatch.setattr(loocv, "shortcut_cv", flaky)
    with pytest.warns(RuntimeWarning, match="leverage"):
        rep = select_lambda(data, [0.1, 1.0, 2.0], eps=0.3)
    assert rep.skipped == [0.1] and math.isnan(rep.cv_shortcut[0]) and rep.lambda_star >= 1.0


def test_degenerate_leverage_names_sample():
    rng = np.random.default_rng(14)
    data = Dataset(rng.standard_normal((5, 2)), rng.standard_normal(5))
    fit = ridge_fit(data, 0.1)
    lev = fit.leverage.copy()
    lev[3] = 1.0
    crafted = RidgeFit(**{**fit.__dict__, "leverage": lev})
    with pytest.raises(DegenerateLeverageError) as info:
        shortcut_cv(data, 0.1, 0.3, 1.0, fit=crafted)
    assert info.value.index == 3 and "sample 3" in str(info.value)


def test_invalid_grid():
    data = Dataset(np.eye(3), np.ones(3))
    with pytest.raises(ArgumentError):
        select_lambda(data, [])
    with pytest.raises(ArgumentError):
        select_lambda(data, [0.0, 1.0])


def test_exact_column(ref_data):
    rep = select_lambda(ref_data, [0.5, 1.0], eps=0.3, sigma2=SIGMA2, use_exact=True)
    assert rep.cv_exact == [exact_cv(ref_data, l, 0.3, SIGMA2) for l in (0.5, 1.0)]
    assert rep.coeff_form == "corrected"
