import sys

import numpy as np
import pytest

from rankinglasso.io import load_nfl_2010
from rankinglasso.mle import separated
from rankinglasso.model import ModelParams, Tournament, category_probabilities


def random_schedule(rng, k, n, neutral=0.2, ties=False):
    """Random pairings, every team playing at least once."""
    i = rng.integers(0, k, n)
    j = (i + rng.integers(1, k, n)) % k
    # make sure every team appears
    first = np.arange(min(k, n))
    i[: len(first)] = first
    j[: len(first)] = (first + 1) % k
    venue = rng.choice([1, -1, 0], size=n, p=[(1 - neutral) / 2, (1 - neutral) / 2, neutral])
    teams = tuple(f"T{a}" for a in range(k))
    return Tournament(teams, i, j, venue, np.full(n, 2), ties)


def draw(params, schedule, rng):
    probs = category_probabilities(params, schedule)
    u = rng.random(schedule.n)
    y = (u[:, None] >= np.cumsum(probs, axis=1)[:, :-1]).sum(axis=1)
    return schedule.with_outcomes(y)


def random_tournament(seed, k=5, n=None, ties=False, spread=1.0, neutral=0.2,
                      require_mle=True):
    """A simulated tournament; by default redrawn until the MLE exists."""
    rng = np.random.default_rng(seed)
    n = n or 8 * k
    for _ in range(100):
        sched = random_schedule(rng, k, n, neutral, ties)
        params = ModelParams(rng.normal(0, spread, k), rng.normal(0.3, 0.2),
                             abs(rng.normal(0.4, 0.1)) if ties else None)
        t = draw(params, sched, rng)
        if not require_mle or not separated(t):
            return t, params
    raise RuntimeError("could not draw a tournament with a finite MLE")


@pytest.fixture(scope="session")
def nfl():
    return load_nfl_2010()


@pytest.fixture(scope="session")
def ties_tournament():
    t, _ = random_tournament(11, k=8, n=200, ties=True)
    return t


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
