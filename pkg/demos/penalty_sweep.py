"""
Choosing the ridge penalty for a robust model
=============================================

With ``d = 4 n1`` and little noise, the ridge penalty that minimises clean
error is almost zero. Once the clean fit feeds an adversarial second
stage the best penalty moves up, and it keeps moving as the attack grows.
"""

from dataclasses import replace

import numpy as np

from advtwostage import default_config, run_lambda_sweep, theory_two_stage_limits
from advtwostage.simlab import argmin_lambda

cfg = replace(default_config("fig-lambda"), repeats=10)
gamma, sigma2 = cfg.gamma_grid[0], cfg.sigma2

# %%
# Limiting excess risk on a fine grid, one row per attack radius.
fine = np.logspace(-3, np.log10(30), 200)
for eps in cfg.eps_list:
    risk = [theory_two_stage_limits(gamma, lam, 1.0, sigma2, eps).excess_risk for lam in fine]
    print(f"eps={eps}: limiting optimum lambda ~ {fine[int(np.argmin(risk))]:.3g}")

# %%
# Simulation on the 25-point grid used by the experiments.
curve = run_lambda_sweep(cfg)
for eps in cfg.eps_list:
    x, mean, se, _ = curve.series("two_stage", eps)
    k = int(np.argmin(mean))
    print(f"eps={eps}: grid optimum lambda = {argmin_lambda(curve, eps):.3g}, excess risk {mean[k]:.4f} +- {se[k]:.4f}")
