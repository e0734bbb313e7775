# %% [markdown]
# # Power curves and empirical dominance
#
# Power is measured at a fixed false-alarm rate across abundances, with all
# detectors seeing the same pixels.  Low- and high-abundance clairvoyants each
# win near their own design point, so neither dominates.

# %%
import numpy as np

from weakdetect import (
    DetectionProblem, DetectorSpec, GaussianBackground, Prior, TargetInteractionModel,
    dominance_check, empirical_roc, power_curve,
)

problem = DetectionProblem(GaussianBackground([0.0, 0.0], np.eye(2)),
                           TargetInteractionModel("replacement", [3.0, 3.0]))
grid = np.linspace(0.02, 0.98, 9)
specs = {
    "low": DetectorSpec(problem, "clairvoyant", {"a0": 0.1}),
    "high": DetectorSpec(problem, "clairvoyant", {"a0": 0.97}),
    "bayes": DetectorSpec(problem, "bayes", {"prior": Prior.uniform()}),
}
curves = {k: power_curve(s, grid, far=0.05, n_bkg=5000, n_tgt_per_a=5000, seed=3) for k, s in specs.items()}
print("a     " + "  ".join(f"{k:>6s}" for k in curves))
for i, a in enumerate(grid):
    print(f"{a:.2f}  " + "  ".join(f"{c.powers[i]:6.3f}" for c in curves.values()))

# %%
for a, b in (("low", "high"), ("bayes", "low"), ("bayes", "high")):
    print(a, "vs", b, "->", dominance_check(curves[a], curves[b]).verdict)

# %% [markdown]
# A single ROC for reference, at a = 0.3.

# %%
rng = np.random.default_rng(0)
bkg = rng.normal(size=(2000, 2))
tgt = (1 - 0.3) * rng.normal(size=(2000, 2)) + 0.3 * np.array([3.0, 3.0])
roc = empirical_roc(specs["bayes"].score(bkg), specs["bayes"].score(tgt))
print(f"AUC = {roc.auc:.4f} over {roc.far.size} operating points")
