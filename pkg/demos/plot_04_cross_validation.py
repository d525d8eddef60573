"""
Predicting held-out matches
===========================

Split the season in half at random, fit each estimator on one half and
score the other half by the negative log-likelihood of what happened.
"""

import numpy as np

from rankinglasso import io
from rankinglasso.evaluation import cross_validate

t = io.load_nfl_2010()
res = cross_validate(t, reps=10, seed=1)

print(f"{'estimator':<12s} {'mean':>7s} {'median':>7s} {'coin':>6s}")
for name, m, md, c in zip(res.estimators, res.mean, res.median, res.coin_fraction):
    print(f"{name:<12s} {m:7.1f} {md:7.1f} {c:6.2f}")

# guessing 50% on every validation match scores n_val log 2
n_val = t.n - t.n // 2
print(f"coin-flip baseline: {n_val * np.log(2):.1f}")
