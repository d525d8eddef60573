"""
How the estimators behave across simulated seasons
==================================================

Treat the NFL maximum likelihood fit as the truth, simulate many seasons
with the same schedule and look at the spread of the estimated ability
difference for a close pair and a far-apart pair of teams.
"""

from rankinglasso import io
from rankinglasso.inference import sampling_study
from rankinglasso.mle import fit_mle

t = io.load_nfl_2010()
truth = fit_mle(t).params

pairs = {"Atlanta - Baltimore": (t.index("Atlanta Falcons"), t.index("Baltimore Ravens")),
         "Kansas City - New England": (t.index("Kansas City Chiefs"), t.index("New England Patriots"))}

for title, pair in pairs.items():
    st = sampling_study(truth, t, reps=50, seed=4, pair=pair)
    print(f"\n{title} (true difference {st.truth:.2f})")
    print(f"  {'estimator':<12s} {'q1':>6s} {'median':>7s} {'q3':>6s}")
    for name in st.estimators:
        b = st.boxes[name]
        print(f"  {name:<12s} {b.q1:6.2f} {b.median:7.2f} {b.q3:6.2f}")

# the lasso boxes are narrower for the close pair and pulled toward zero
# for the far-apart pair
