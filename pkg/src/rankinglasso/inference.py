"""Parametric bootstrap and Monte Carlo sampling studies.

Every replicate draws a new season over the original schedule from a
fitted (or true) model and re-runs the whole estimation pipeline,
adaptive weights and penalty selection included.  Replicate ``r`` uses a
random stream spawned from the master seed, so results do not depend on
execution order or on the number of worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .estimators import ALL_ESTIMATORS, Estimator, fit_estimators
from .lasso import LassoConfig
from .mle import ConvergenceError
from .model import ModelParams, Tournament, category_probabilities, outcome_probabilities

MAX_FAILURE_RATE = 0.05


class BootstrapError(RuntimeError):
    """Too many replicates failed to produce an estimate."""


def simulate_tournament(params: ModelParams, schedule: Tournament, rng_seed=None) -> Tournament:
    """Draw new outcomes for every match of ``schedule`` from the model.

    ``rng_seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    if params.k != schedule.k:
        raise ValueError("parameters and schedule disagree on the number of teams")
    rng = np.random.default_rng(rng_seed)
    probs = category_probabilities(params, schedule)
    cum = np.cumsum(probs, axis=1)
    u = rng.random(schedule.n) * cum[:, -1]
    y = (u[:, None] >= cum[:, :-1]).sum(axis=1)
    t = schedule
    if params.ties and not t.ties_allowed:
        t = Tournament(t.teams, t.i, t.j, t.venue, t.outcome, ties_allowed=True)
    return t.with_outcomes(y)


def bc_interval(replicates, point: float, level: float = 0.90) -> tuple[float, float]:
    """Bias-corrected percentile interval.

    The percentile levels ``(1 -+ level)/2`` are moved to
    ``Phi(2 z0 -+ z)`` with ``z0 = Phi^-1(share of replicates below point)``.
    """
    r = np.asarray(replicates, dtype=float).ravel()
    r = r[np.isfinite(r)]
    if len(r) == 0:
        raise ValueError("no finite replicates")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if np.all(r == r[0]):
        return float(point), float(point)
    z0 = norm.ppf(np.mean(r < point))
    z = norm.ppf(0.5 + level / 2)
    lo, hi = norm.cdf(2 * z0 - z), norm.cdf(2 * z0 + z)
    return float(np.quantile(r, lo)), float(np.quantile(r, hi))


@dataclass(frozen=True)
class MatchSpec:
    """A match whose probability that team ``i`` wins is tracked."""

    i: int
    j: int
    h: int = 0

    def probability(self, params: ModelParams) -> float:
        return outcome_probabilities(params, self.i, self.j, self.h)[0]

    def label(self, teams) -> str:
        venue = {1: "home", 0: "neutral", -1: "away"}[self.h]
        return f"P({teams[self.i]} beats {teams[self.j]}, {venue})"


@dataclass
class BootstrapSummary:
    """Replicates of the requested quantities with BC intervals.

    Columns of ``replicates`` are the tracked win probabilities followed
    by the abilities of every team; ``labels`` names them.
    """

    replicates: np.ndarray
    point: np.ndarray
    intervals: np.ndarray
    level: float
    method_tag: str
    seed: int
    labels: list[str]
    n_probabilities: int
    failures: int = 0
    fallbacks: int = 0
    failure_messages: list[str] = field(default_factory=list)

    def interval(self, q: int) -> tuple[float, float]:
        return tuple(self.intervals[q])

    def difference_interval(self, a: int, b: int) -> tuple[float, float, float]:
        """(point, lower, upper) for the ability difference ``mu_a - mu_b``."""
        off = self.n_probabilities
        rep = self.replicates[:, off + a] - self.replicates[:, off + b]
        pt = self.point[off + a] - self.point[off + b]
        return (float(pt), *bc_interval(rep, pt, self.level))


def _quantities(params: ModelParams, matches: Sequence[MatchSpec]) -> np.ndarray:
    return np.concatenate([[m.probability(params) for m in matches], params.mu])


def _replicate_seeds(seed: int, reps: int):
    return np.random.SeedSequence(seed).spawn(reps)


def _run_replicates(schedule: Tournament, truth: ModelParams, estimators, reps: int,
                    seed: int, cfg, n_jobs: int, extract):
    """Simulate ``reps`` seasons from ``truth``, fit, and apply ``extract``.

    Returns per-replicate results (None for failures), fallback count and
    failure messages, all in replicate order.
    """
    seeds = _replicate_seeds(seed, reps)

    def one(ss):
        sim = simulate_tournament(truth, schedule, ss)
        try:
            fits = fit_estimators(sim, estimators, cfg)
        except (ConvergenceError, np.linalg.LinAlgError, FloatingPointError) as exc:
            return None, 0, str(exc)
        return extract(fits), fits.fallbacks, None

    if n_jobs == 1:
        results = [one(ss) for ss in seeds]
    else:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=n_jobs)(delayed(one)(ss) for ss in seeds)
    values = [r[0] for r in results]
    fallbacks = sum(r[1] for r in results)
    messages = [r[2] for r in results if r[2] is not None]
    if len(messages) > MAX_FAILURE_RATE * reps:
        raise BootstrapError(
            f"{len(messages)} of {reps} replicates failed; first error: {messages[0]}")
    return values, fallbacks, messages


def bootstrap(estimator, t: Tournament, reps: int = 1000, seed: int = 0,
              level: float = 0.90, matches: Sequence = (), cfg: LassoConfig | None = None,
              n_jobs: int = 1) -> BootstrapSummary:
    """Parametric bootstrap of one estimator.

    ``matches`` lists ``(i, j, h)`` triples (team indices) whose
    probability of a win by ``i`` is tracked.  Team abilities are always
    tracked.  Failed replicates are dropped and counted; more than 5%
    failures raise :class:`BootstrapError`.
    """
    if reps < 2:
        raise ValueError("reps must be at least 2")
    est = Estimator.parse(estimator)
    specs = [m if isinstance(m, MatchSpec) else MatchSpec(*m) for m in matches]
    for m in specs:
        if not (0 <= m.i < t.k and 0 <= m.j < t.k) or m.i == m.j:
            raise ValueError(f"invalid match {m}")
    fitted = fit_estimators(t, [est], cfg).params[est]
    point = _quantities(fitted, specs)

    values, fallbacks, messages = _run_replicates(
        t, fitted, [est], reps, seed, cfg, n_jobs,
        lambda fits: _quantities(fits.params[est], specs))
    rep = np.array([v for v in values if v is not None])
    intervals = np.array([bc_interval(rep[:, q], point[q], level) for q in range(len(point))])
    labels = [m.label(t.teams) for m in specs] + [f"mu[{name}]" for name in t.teams]
    return BootstrapSummary(rep, point, intervals, level, est.value, seed, labels,
                            len(specs), len(messages), fallbacks, messages)


@dataclass
class BoxSummary:
    """Five-number summary with Tukey whiskers (1.5 IQR)."""

    q1: float
    median: float
    q3: float
    lower_whisker: float
    upper_whisker: float
    mean: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1

    @classmethod
    def of(cls, x) -> "BoxSummary":
        x = np.asarray(x, dtype=float)
        q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])
        span = 1.5 * (q3 - q1)
        lo = x[x >= q1 - span].min()
        hi = x[x <= q3 + span].max()
        return cls(float(q1), float(med), float(q3), float(lo), float(hi), float(x.mean()))


@dataclass
class SamplingStudy:
    estimators: list[str]
    differences: dict[str, np.ndarray]  # estimator -> replicate values of mu_a - mu_b
    boxes: dict[str, BoxSummary]
    truth: float
    seed: int
    failures: int = 0
    fallbacks: int = 0


def sampling_study(true_params: ModelParams, schedule: Tournament, estimators=ALL_ESTIMATORS,
                   reps: int = 1000, seed: int = 0, pair: tuple[int, int] = (0, 1),
                   cfg: LassoConfig | None = None, n_jobs: int = 1) -> SamplingStudy:
    """Monte Carlo distribution of ``mu_a - mu_b`` for each estimator.

    All estimators are fitted to the same simulated seasons.
    """
    if reps < 2:
        raise ValueError("reps must be at least 2")
    ests = [Estimator.parse(e) for e in estimators]
    a, b = pair

    def extract(fits):
        return [fits.params[e].mu[a] - fits.params[e].mu[b] for e in ests]

    values, fallbacks, messages = _run_replicates(
        schedule, true_params, ests, reps, seed, cfg, n_jobs, extract)
    arr = np.array([v for v in values if v is not None])
    names = [e.value for e in ests]
    diffs = {name: arr[:, c] for c, name in enumerate(names)}
    boxes = {name: BoxSummary.of(d) for name, d in diffs.items()}
    return SamplingStudy(names, diffs, boxes, float(true_params.mu[a] - true_params.mu[b]),
                         seed, len(messages), fallbacks)
