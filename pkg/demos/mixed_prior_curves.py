# %% [markdown]
# # The mixed prior as epsilon shrinks
#
# The mixed prior puts weight alpha on an exponential lump of width epsilon at
# zero and the rest on a base prior.  As epsilon falls the lump sharpens
# toward a point mass and the density at any fixed a > 0 goes to zero.

# %%
import numpy as np

from weakdetect.harness import emit_prior_curves
from weakdetect.priors import MixedPriorSchedule, Prior

eps = [0.1, 0.05, 0.025, 0.0125]
a_grid = [0.001, 0.01, 0.1, 0.25, 0.5, 1.0]
rows = emit_prior_curves(0.5, eps, Prior.uniform(), a_grid)

print("eps      alpha    " + "  ".join(f"a={a:<7g}" for a in a_grid))
for e in eps:
    q = [r["q"] for r in rows if r["epsilon"] == e]
    alpha = MixedPriorSchedule(0.5, e).alpha
    print(f"{e:<8g} {alpha:.4f}   " + "  ".join(f"{v:9.3e}" for v in q))

# %% [markdown]
# On log-log axes the curves are flat near zero at height alpha/eps, fall off
# past a ~ eps, and settle on the uniform floor (1 - alpha).

# %%
for e in eps:
    q = np.array([r["q"] for r in rows if r["epsilon"] == e])
    print(f"eps = {e:<7g} log10 q: {np.round(np.log10(q), 2)}")
