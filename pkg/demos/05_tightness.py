# %% [markdown]
# The hard instance
#
# Nested neighbourhoods under a random relabelling of offline vertices: each
# batch sees a shrinking set of offline vertices.  No algorithm beats gamma(K)
# on average, and the regularized algorithm sits exactly on it.

# %%
import numpy as np

from batchalloc import baselines, certify as C, gamma, instances, matching_algs

for K, N in ((2, 4), (3, 27)):
    sizes = instances.tightness_sizes(K, N)
    bound = C.tightness_dual_value(K, N, sizes)
    ratios = [matching_algs.pr_mwm(instances.gen_tightness(K, N, seed=s)[0]).objective / (K * N)
              for s in range(20)]
    greedy = [baselines.online_greedy(instances.gen_tightness(K, N, seed=s)[0]).objective / (K * N)
              for s in range(20)]
    print(f"K={K} batches {sizes}: dual bound {bound} = gamma * |V| = {gamma(K) * K * N:.1f}")
    print(f"   PR-MWM mean ratio {np.mean(ratios):.4f}, online greedy {np.mean(greedy):.4f}")
