"""
Parametric bootstrap intervals for match probabilities
======================================================

Simulate seasons from a fitted model, refit each one and read off
bias-corrected intervals for the chance that the home team wins.
The replicate count is kept small so the script runs in about a minute;
use 1000 for reported numbers.
"""

from rankinglasso import io
from rankinglasso.inference import bootstrap

t = io.load_nfl_2010()
bal, atl = t.index("Baltimore Ravens"), t.index("Atlanta Falcons")
ne, kc = t.index("New England Patriots"), t.index("Kansas City Chiefs")

# (home team, visitor, venue) with venue +1 meaning the first team is at home
matches = [(bal, atl, 1), (ne, kc, 1)]

for est in ("MLE", "HYBRID_BIC"):
    s = bootstrap(est, t, reps=100, seed=2010, level=0.90, matches=matches)
    print(f"{est}: {s.fallbacks} replicates needed the ridge fallback")
    for q in range(len(matches)):
        lo, hi = s.interval(q)
        print(f"  {s.labels[q]:<55s} {s.point[q]:.2f} ({lo:.2f}, {hi:.2f})")

# ability differences come from the same replicates
pt, lo, hi = s.difference_interval(ne, kc)
print(f"mu(NE) - mu(KC) under HYBRID_BIC: {pt:.2f} ({lo:.2f}, {hi:.2f})")
