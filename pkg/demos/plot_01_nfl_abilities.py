"""
Team abilities for the 2010 NFL season
======================================

Fit the paired comparison model by maximum likelihood, then run the
adaptive ranking lasso along a penalty path and pick a grouping of the
32 teams by AIC and BIC.
"""

import numpy as np

from rankinglasso import io
from rankinglasso.lasso import compute_path, select
from rankinglasso.mle import adaptive_weights, fit_mle

t = io.load_nfl_2010()
print(f"{t.k} teams, {t.n} matches")

# maximum likelihood: every team gets its own ability, plus a home advantage
mle = fit_mle(t)
print(f"home advantage tau = {mle.params.tau:.3f} (se {mle.se[t.k]:.3f})")

order = np.argsort(-mle.mu)
for a in order[:5]:
    print(f"  {t.teams[a]:<24s} {mle.mu[a]:6.2f}")

# the adaptive weights come from a lightly ridged fit, so they exist even
# when some team wins or loses everything
w = adaptive_weights(t)
path = compute_path(t, w)
print(f"path of {len(path.points)} penalties, groups from {path.df.max()} down to {path.df.min()}")

# choose the penalty by AIC and BIC, scoring each grouping at its refit
for crit in ("aic", "bic"):
    fit, refit = select(path, crit, hybrid=True, t=t)
    print(f"\n{crit.upper()}: lambda = {fit.lam:.4f}, {fit.df} groups")
    for g in range(fit.grouping.n_groups):
        members = fit.grouping.members(g)
        names = ", ".join(t.teams[a] for a in members[:3]) + (" ..." if len(members) > 3 else "")
        print(f"  lasso {fit.mu[members[0]]:6.2f}  refit {refit.mu[members[0]]:6.2f}  {names}")
