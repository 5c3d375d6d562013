# %% [markdown]
# Display-ad allocation with free disposal
#
# Advertisers want n_j impressions and pay only for their best n_j.  Users
# arrive in K batches; each user picks one configuration of ads, and all
# advertisers in it see the second price.  We compare the regularized
# algorithm against two greedy baselines on the benchmark generator.

# %%
from batchalloc import baselines, instances, mca_alg

for symmetric in (True, False):
    base = instances.gen_auction(instances.AuctionSpec(symmetric=symmetric, K=1, seed=0))
    opt = baselines.offline_opt(base).value
    online = baselines.online_greedy(base).objective / opt
    for K in (2, 5):
        inst = instances.rebatch(base, K)
        pr = mca_alg.pr_mca(inst).objective / opt
        bg = baselines.batched_greedy(inst).objective / opt
        name = "symmetric" if symmetric else "asymmetric"
        print(f"{name:<10} K={K}: PR-MCA {pr:.3f}  Batched-GR {bg:.3f}  Online-GR {online:.3f}")

# %% [markdown]
# The regularized algorithm keeps a per-advertiser distribution of committed
# impressions by price level.  Impressions beyond n_j are disposed from the
# cheapest level first.

# %%
from batchalloc.model import Alloc, McaInstance, User

tiny = McaInstance(2, (1.0,), (1.0, 3.0), (
    (User(((Alloc(0, 1.0, 1),),)),),   # stage 1: one impression at price 1
    (User(((Alloc(0, 1.0, 2),),)),),   # stage 2: one impression at price 3
))
tr = mca_alg.pr_mca(tiny)
print("revenue", round(tr.objective, 6), "(the price-1 impression is disposed in favour of price 3)")
