"""
Stepdown vs stepup step values at J = 500
=========================================

Tabulates both ladders for gamma-FDP (gamma1 = .1) and k-FWER (k1 = 25) at
alpha = .05 and shows how much larger the stepdown values are.
"""

import numpy as np

from seqmt import stepdown_fdp_values, stepdown_kfwe_values, stepup_fdp_values, stepup_kfwe_values

J, alpha = 500, 0.05

fdp_down = stepdown_fdp_values(alpha, None, 0.1, None, J=J).alphas
fdp_up = stepup_fdp_values(alpha, None, 0.1, None, J=J).alphas
kf_down = stepdown_kfwe_values(alpha, None, 25, None, J).alphas
kf_up = stepup_kfwe_values(alpha, None, 25, None, J=J).alphas

# %%
print(f"{'j':>4} {'FDP down':>10} {'FDP up':>10} {'kFWE down':>10} {'kFWE up':>10}")
for j in (1, 2, 5, 10, 25, 50, 100, 200, 300, 400, 450, 500):
    i = j - 1
    print(f"{j:>4} {fdp_down[i]:10.5f} {fdp_up[i]:10.5f} {kf_down[i]:10.5f} {kf_up[i]:10.5f}")

# %%
# The ratio stepdown/stepup never drops below one.
for name, d, u in (("FDP", fdp_down, fdp_up), ("k-FWER", kf_down, kf_up)):
    r = d / u
    print(f"{name}: ratio min {r.min():.3f}, median {np.median(r):.3f}, max {r.max():.3f}")

# For the full tables: seqmt step-values --J 500 --alpha 0.05 --gamma1 0.1
