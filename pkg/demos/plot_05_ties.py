"""
Tournaments with ties
=====================

With ties allowed each match has three outcomes.  A threshold delta1
widens the band of linear predictors that end in a tie.  This script
simulates a small league, fits the model and runs the ranking lasso.
"""

import numpy as np

from rankinglasso.inference import simulate_tournament
from rankinglasso.lasso import compute_path, select
from rankinglasso.mle import adaptive_weights, fit_mle
from rankinglasso.model import ModelParams, Tournament

rng = np.random.default_rng(0)
k, n = 10, 400
i = rng.integers(0, k, n)
j = (i + rng.integers(1, k, n)) % k
schedule = Tournament(tuple(f"club{a}" for a in range(k)), i, j,
                      np.ones(n, dtype=int), np.full(n, 2), ties_allowed=True)

# three tiers of clubs
truth = ModelParams(np.repeat([0.8, 0.0, -0.8], [3, 4, 3]), tau=0.4, delta1=0.3)
t = simulate_tournament(truth, schedule, 1)
print(f"{np.sum(t.outcome == 1)} ties in {t.n} matches")

fit = fit_mle(t)
print(f"tau = {fit.params.tau:.3f}, delta1 = {fit.params.delta1:.3f}")

path = compute_path(t, adaptive_weights(t))
sel, refit = select(path, "bic", hybrid=True, t=t)
print(f"BIC picks {sel.df} groups")
for g in range(sel.grouping.n_groups):
    members = sel.grouping.members(g)
    print(f"  {refit.mu[members[0]]:6.2f}  " + " ".join(t.teams[a] for a in members))
