"""Cross-module invariant suite behind ``advtwostage check``.

Each check is small enough that the whole suite runs in well under two
minutes on one core.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, List

import numpy as np

from .advrisk import (
    adv_risk,
    alpha_equation,
    mc_adv_risk,
    population_adv_risk,
    solve_alpha,
    two_stage_map,
)
from .asymptotics import stieltjes_m, stieltjes_m_prime, theory_clean_limits
from .linmodel import Dataset, GroundTruth, gen_gaussian_dataset, loo_deltas, ridge_fit, sample_theta0
from .loocv import alpha_loo, exact_cv, shortcut_coeffs, shortcut_cv
from .simlab import default_config, run_lambda_sweep
from .vanilla import adv_objective, vanilla_adv_solve


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _stieltjes():
    # the absolute residual is reported; the pass test is the backward error,
    # since near m ~ 1e4 even the correctly rounded root leaves ~1e-11
    worst_q = worst_b = worst_d = 0.0
    for g in np.geomspace(0.1, 10, 50):
        for lam in np.geomspace(1e-4, 10, 50):
            m = stieltjes_m(g, lam)
            q = abs(g * lam * m * m + (1 - g + lam) * m - 1)
            worst_q = max(worst_q, q)
            worst_b = max(worst_b, q / (g * lam * m * m + abs(1 - g + lam) * m + 1))
            h = 1e-6 * lam
            fd = (stieltjes_m(g, lam - h) - stieltjes_m(g, lam + h)) / (2 * h)
            worst_d = max(worst_d, abs(fd / stieltjes_m_prime(g, lam) - 1))
    ok = worst_b < 8 * np.finfo(float).eps and worst_d < 1e-6
    return ok, f"residual {worst_q:.1e} (backward {worst_b:.1e}), m' rel err {worst_d:.1e}"


def _rank_one():
    worst = 0.0
    rng = np.random.default_rng(4)
    for _ in range(10):
        n, d = rng.integers(3, 30), rng.integers(1, 10)
        lam = float(rng.uniform(0.05, 5))
        data = Dataset(rng.standard_normal((n, d)), rng.standard_normal(n))
        fit = ridge_fit(data, lam)
        deltas = loo_deltas(fit, data)
        for j in range(n):
            ref = ridge_fit(data.drop(j), lam * n / (n - 1)).theta_hat
            got = fit.theta_hat - deltas[j]
            worst = max(worst, np.linalg.norm(got - ref) / max(np.linalg.norm(ref), 1e-300))
    return worst < 1e-9, f"max rel err {worst:.1e}"


def _fixed_point():
    worst = 0.0
    for t in (0.05, 0.5, 1.0, 3.0):
        for s2 in (0.01, 1.0):
            for eps in (0.1, 0.3, 0.7):
                fp = solve_alpha(t, s2, eps)
                if not fp.diverged:
                    worst = max(worst, abs(alpha_equation(fp.alpha, t, s2, eps)))
    zero = solve_alpha(1.0, 1.0, 0.0).alpha == 0.0
    return worst < 1e-10 and zero, f"max residual {worst:.1e}, eps=0 -> alpha=0: {zero}"


def _ray_optimality():
    rng = np.random.default_rng(5)
    ok = True
    for _ in range(5):
        th = rng.standard_normal(8) * rng.uniform(0.2, 2)
        s2, eps = float(rng.uniform(0.05, 2)), float(rng.uniform(0.05, 0.8))
        best = adv_risk(two_stage_map(th, solve_alpha(np.linalg.norm(th), s2, eps)), th, s2, eps)
        grid = min(adv_risk(c * th, th, s2, eps) for c in np.linspace(0, 1.5, 100))
        ok &= best <= grid + 1e-12
    return ok, "risk on the ray is minimised by the fixed point"


def _monte_carlo():
    rng = np.random.default_rng(6)
    worst = 0.0
    for k in range(4):
        d = 5
        theta0 = rng.standard_normal(d) / math.sqrt(d)
        truth = GroundTruth.from_theta(theta0, float(rng.uniform(0.2, 2)))
        th = theta0 + 0.5 * rng.standard_normal(d) / math.sqrt(d)
        eps = float(rng.uniform(0, 0.6))
        est, se = mc_adv_risk(th, truth, eps, 200_000, seed=(6, k))
        exact = adv_risk(th, theta0, truth.sigma2, eps)
        worst = max(worst, abs(est - exact) / se)
    return worst < 4.0, f"max |MC - closed form| = {worst:.2f} s.e."


def _shortcut_cv():
    truth = sample_theta0("ones_over_sqrt_d", 200, sigma2=0.01)
    rel = []
    for s in range(2):
        data = gen_gaussian_dataset(50, 200, truth, (11, s))
        a, b = shortcut_cv(data, 1.0, 0.3, 0.01), exact_cv(data, 1.0, 0.3, 0.01)
        rel.append(abs(a - b) / b)
    r = float(np.mean(rel))
    return r < 0.02, f"mean |shortcut - exact| / exact = {r:.1e}"


def _alpha_ladder():
    rng = np.random.default_rng(7)
    th = rng.standard_normal(50) * 0.15
    s2, eps = 0.01, 0.3
    a = solve_alpha(np.linalg.norm(th), s2, eps).alpha
    ctx = shortcut_coeffs(th, a, eps, s2)
    u = rng.standard_normal(50)
    u /= np.linalg.norm(u)
    hs = np.array([1e-2, 1e-3, 1e-4])
    errs = [
        abs(alpha_loo(ctx, h * u) - solve_alpha(np.linalg.norm(th + h * u), s2, eps, tol=1e-15).alpha)
        for h in hs
    ]
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    return slope >= 1.8, f"log-log slope {slope:.2f}"


def _vanilla():
    rng = np.random.default_rng(8)
    data = Dataset(rng.standard_normal((30, 5)), rng.standard_normal(30))
    res = vanilla_adv_solve(data, 0.0, 0.1)
    ridge = adv_objective(data, ridge_fit(data, 0.1).theta_hat, 0.0, 0.1)
    mono = bool(np.all(np.diff(vanilla_adv_solve(data, 0.3, 0.05).history) <= 0))
    ok = abs(res.objective - ridge) < 1e-6 and mono
    return ok, f"eps=0 gap {abs(res.objective - ridge):.1e}, monotone history: {mono}"


def _theory_vs_sample():
    truth = sample_theta0("ones_over_sqrt_d", 200, sigma2=1.0)
    vals = []
    for r in range(10):
        th = ridge_fit(gen_gaussian_dataset(100, 200, truth, (12, r)), 0.5).theta_hat
        vals.append(float(np.sum((th - truth.theta0) ** 2)))
    lim = theory_clean_limits(2.0, 0.5, 1.0, 1.0).dist2
    rel = abs(np.mean(vals) / lim - 1)
    return rel < 0.1, f"sample / limit - 1 = {rel:.3f}"


def _determinism():
    cfg = replace(default_config("fig-lambda"), repeats=6)
    a = run_lambda_sweep(cfg, threads=1).csv_text()
    b = run_lambda_sweep(cfg, threads=3).csv_text()
    return a == b, "1 vs 3 threads byte-identical" if a == b else "CSV differs across thread counts"


def _risk_formula():
    r = population_adv_risk(1.0, 1.0, 1.0, 0.3).risk
    direct = 2.0 + 2 * math.sqrt(2 / math.pi) * 0.3 * math.sqrt(2) + 0.09
    return abs(r - direct) < 1e-12, f"R = {r:.7f}"


CHECKS: List[tuple] = [
    ("stieltjes quadratic and derivative", _stieltjes),
    ("rank-one leave-one-out exactness", _rank_one),
    ("fixed-point residual", _fixed_point),
    ("two-stage ray optimality", _ray_optimality),
    ("adversarial risk closed form", _risk_formula),
    ("closed form vs Monte Carlo risk", _monte_carlo),
    ("deleted-alpha quadratic remainder", _alpha_ladder),
    ("shortcut vs exact CV", _shortcut_cv),
    ("vanilla solver reduces to ridge", _vanilla),
    ("finite-n clean limit", _theory_vs_sample),
    ("thread-count determinism", _determinism),
]


def run_checks(report: Callable[[CheckResult], None] = lambda r: None) -> List[CheckResult]:
    out = []
    for name, fn in CHECKS:
        t = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        res = CheckResult(name, bool(ok), detail, time.perf_counter() - t)
        report(res)
        out.append(res)
    return out
