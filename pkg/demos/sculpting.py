# %% [markdown]
# # Sculpting a prior for worst-case power
#
# A sculpted detector mixes the LMP statistic with clairvoyant ratios at a few
# candidate abundances.  The weights are chosen to maximize the smallest power
# over an abundance grid.

# %%
import numpy as np

from weakdetect import (
    DetectionProblem, DetectorSpec, GaussianBackground, TargetInteractionModel,
    alpha_from_beta, power_curve, sculpt_optimize,
)

problem = DetectionProblem(GaussianBackground([0.0], [[1.0]]),
                           TargetInteractionModel("replacement", [1.0]))
grid = [0.2, 0.5, 0.8]
result = sculpt_optimize(problem, [0.2, 0.8], True, grid, far=0.05,
                         n_bkg=4000, n_tgt_per_a=4000, seed=11, budget=60)
print(result.to_dict())

# %% [markdown]
# The same weights as a prior: point masses at the candidates plus a vanishing
# exponential lump at zero, here shown at eps = 0.01.

# %%
alpha0, alphas = alpha_from_beta(result.beta0, result.betas, 0.01)
print(f"alpha0 = {alpha0:.5f}, point masses = {np.round(alphas, 5)}")

# %%
spec = DetectorSpec(problem, "sculpted",
                    {"beta0": result.beta0, "components": list(zip(result.abundances, result.betas))})
for label, s in (("sculpted", spec), ("lmp", DetectorSpec(problem, "lmp"))):
    c = power_curve(s, grid, 0.05, 4000, 4000, seed=12)
    print(f"{label:9s} powers = {np.round(c.powers, 3)} worst = {c.powers.min():.3f}")
