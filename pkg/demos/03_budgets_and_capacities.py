# %% [markdown]
# Capacities and budgets: integral b-matching and AdWords
#
# With capacity B_j per offline vertex the fractional stage solution is
# rounded group by group through a small totally unimodular LP, so each
# vertex receives floor or ceil of its fractional load.

# %%
import numpy as np

from batchalloc import baselines, certify as C, instances, matching_algs as M
from batchalloc.frankwolfe import CERTIFY

inst = instances.gen_random("bmatching", K=3, n_online=(10, 20), n_offline=3, B=(5, 7), density=0.7, seed=1)
tr = M.pr_mwbm(inst, fw_cfg=CERTIFY, integral=True)
for k in range(inst.K):
    _, js, _ = inst.stage_edges(k + 1)
    frac = np.bincount(js, weights=tr.stages[k].x, minlength=inst.n_offline)
    got = np.bincount(js, weights=tr.integral[k], minlength=inst.n_offline)
    print(f"stage {k + 1}: fractional {frac.round(3)} -> integral {got}")
rep = C.certify_bmatching_integral(tr)
print("integral certificate:", rep.passed, " objective", tr.objective, " OPT", round(baselines.offline_opt(inst).value, 3))

# %% [markdown]
# AdWords: advertisers have budgets and online queries bid different
# amounts.  The fractional algorithm is certified directly.  The integral
# version trims budgets by a factor (1 - rho), runs the fractional algorithm,
# then lets every query draw one advertiser at random; draws that do not fit
# the real budget are dropped, so budgets are never exceeded.

# %%
ad = instances.gen_random("adwords", K=2, n_online=150, n_offline=4, budget=(50.0, 60.0), seed=3)
opt = baselines.offline_opt(ad).value
frac = M.pr_f_adwords(ad)
integ = M.pr_i_adwords(ad, rounding=M.AdwordsRoundingConfig(seed=0))
vals = [M.sample_adwords(ad, integ, s)[0] for s in range(200)]
print(f"OPT {opt:.2f}  fractional {frac.objective:.2f}  rho {integ.rho:.3f}")
print(f"integral mean over 200 draws {np.mean(vals):.2f}  spent <= budget: {np.all(integ.integral_states[-1] <= ad.B)}")
