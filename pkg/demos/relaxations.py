"""Convex relaxations of the matching problem on a small instance.

DS-cons keeps at least n - k rows on the diagonal of a doubly sub-stochastic
matrix; DS-reg penalizes the rows that move. Both are solved by Frank-Wolfe
and need dense n x n iterates, so they suit small n only.
"""

import numpy as np

import mismatchreg as mr
from mismatchreg.metrics import standardized_error
from mismatchreg.relaxations import diagonal_mismatch_set

cfg = mr.SynthConfig(n=100, d=3, k_frac=0.1, sigma=0.05, seed=2)
data, truth = mr.generate(cfg)


def err(B):
    return round(standardized_error(B, truth.B_star, cfg.sigma, cfg.m, cfg.d, cfg.n), 3)


print("naive   ", err(mr.fit_naive(data)))

# %% constrained relaxation
Theta, B, info = mr.fit_ds_cons(data, mr.FwOptions(k=cfg.k, max_iters=500))
print("DS-cons ", err(B), f"(gap {info['gap']:.1e} after {info['iterations']} iterations)")
moved = diagonal_mismatch_set(Theta, cfg.k)
print("  rows with the least diagonal mass that are truly shuffled:", np.isin(moved, truth.S_star).mean())

# %% penalized relaxation over a few penalty levels
for scale in (0.5, 1, 2, 4):
    lam = scale * mr.lambda_star(cfg.n, cfg.m, cfg.sigma)
    _, B, _ = mr.fit_ds_reg(data, mr.FwOptions(lam=lam, max_iters=500))
    print(f"DS-reg  {err(B)}  (lambda = {scale} x lambda_star)")

# %% the group lasso for comparison
fit = mr.fit_group_lasso(data, mr.GroupLassoOptions(mr.lambda_star(cfg.n, cfg.m, cfg.sigma)))
print("proposed", err(fit.B_hat))
