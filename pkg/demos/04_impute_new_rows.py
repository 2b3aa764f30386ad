"""
Imputing a new row from a fitted prior
======================================

Fit the prior once, then score new rows without refitting. A new row that is
entirely censored gets the prior mean; a partly observed row is pulled
toward the training rows that resemble it.
"""

# %%
import numpy as np

from ebmtobit import EbmTobitConfig, ebm_tobit, impute_new, validate

rng = np.random.default_rng(5)
theta = rng.standard_normal((200, 1)) @ np.ones((1, 3)) + 0.3 * rng.standard_normal((200, 3))
y = theta + rng.standard_normal((200, 3))
prior = ebm_tobit(validate(y, y), EbmTobitConfig(B=10, seed=2, kkt=False)).final_prior

# %%
inf = np.inf
unknown = (np.array([-inf, -inf, -inf]), np.array([inf, inf, inf]))
mean, var, _ = impute_new(unknown, prior)
print("fully censored row   ->", np.round(mean, 3), " prior mean", np.round(prior.mean(), 3))

# first two coordinates observed high, third below a detection limit of 0
partial = (np.array([2.0, 1.8, -inf]), np.array([2.0, 1.8, 0.0]))
mean, var, _ = impute_new(partial, prior)
print("partly observed row  ->", np.round(mean, 3), " sd", np.round(np.sqrt(var), 3))
