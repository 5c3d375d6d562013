# %% [markdown]
# Stage regularizers and the competitive ratio
#
# Each algorithm in the package subtracts a stage-dependent polynomial
# penalty from a linear objective.  The penalties of a K-stage schedule
# chain together through a one-step recursion, and that chain fixes the
# guarantee gamma(K) = 1 - (1 - 1/K)^K.

# %%
import numpy as np

from batchalloc import RegularizerSchedule, gamma

for K in (1, 2, 3, 5, 10, 100):
    print(f"K={K:>3}  gamma={gamma(K):.6f}")
print("limit 1 - 1/e =", 1 - np.exp(-1))

# %% [markdown]
# For K = 3 the first-stage penalty is quadratic, the second linear and the
# last stage is an indicator (no penalty, plain LP).

# %%
s = RegularizerSchedule(3)
x = np.linspace(0, 1, 5)
for k in (1, 2, 3):
    print(f"f_{k}:", np.round(s.f(k, x), 4))

# %% [markdown]
# The recursion: f_k(x) is the best value of (1 - y) f_{k+1}(x + y), reached
# at y = (1 - x) / (K - k).  A grid search finds the same point.

# %%
k, x0 = 1, 0.2
y_star, val = s.recursion_maximizer(k, x0)
ys = np.linspace(0, 1 - x0, 2001)
grid = (1 - ys) * s.f(k + 1, x0 + ys)
print(f"closed form y*={y_star:.4f} value={val:.6f}")
print(f"grid        y*={ys[grid.argmax()]:.4f} value={grid.max():.6f}")
