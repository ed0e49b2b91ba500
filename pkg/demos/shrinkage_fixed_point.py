"""
Shrinkage from the population adversarial risk
==============================================

Against an l2 attack of radius ``eps`` the best linear predictor given a
clean estimate ``theta_hat`` lies on the ray through it, at
``theta_hat / (1 + alpha)``. This script solves for ``alpha`` and checks
the answer against a brute-force scan along the ray.
"""

import numpy as np

from advtwostage import adv_risk, solve_alpha, two_stage_map

sigma2 = 1.0
theta_hat = np.array([0.6, -0.8])  # unit norm

# %%
# ``alpha`` grows with the attack radius. Large radii make the zero
# predictor optimal, reported as a diverged fixed point.
for eps in (0.0, 0.1, 0.3, 0.6, 1.0, 2.0):
    fp = solve_alpha(1.0, sigma2, eps)
    print(f"eps={eps:4.1f}  alpha={fp.alpha:8.4f}  shrinkage={fp.shrinkage:6.4f}  diverged={fp.diverged}")

# %%
# Scan the ray. Treating ``theta_hat`` as the truth, the risk of
# ``c * theta_hat`` is minimised at ``c = 1 / (1 + alpha)``.
eps = 0.3
cs = np.linspace(0, 1.2, 1201)
risks = np.array([adv_risk(c * theta_hat, theta_hat, sigma2, eps) for c in cs])
fp = solve_alpha(1.0, sigma2, eps)
best = two_stage_map(theta_hat, fp)
print(f"\nscan minimum at c = {cs[risks.argmin()]:.3f}, fixed point gives {fp.shrinkage:.4f}")
print(f"risk at the fixed point {adv_risk(best, theta_hat, sigma2, eps):.6f} vs scan {risks.min():.6f}")
