"""Split-half cross-validation of predictive log-loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimators import ALL_ESTIMATORS, Estimator, fit_estimators
from .lasso import LassoConfig
from .model import ModelParams, Tournament, category_probabilities


@dataclass
class CvResult:
    """Per-repetition validation scores, one column per estimator.

    ``coin`` holds, per repetition, the share of validation matches whose
    realized outcome got predicted probability above 0.5.
    """

    estimators: list[str]
    per_rep_negloglik: np.ndarray
    coin: np.ndarray
    seed: int
    fallbacks: int = 0

    @property
    def coin_fraction(self) -> np.ndarray:
        return self.coin.mean(axis=0)

    @property
    def mean(self) -> np.ndarray:
        return self.per_rep_negloglik.mean(axis=0)

    @property
    def median(self) -> np.ndarray:
        return np.median(self.per_rep_negloglik, axis=0)


def split_halves(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Random training (floor n/2) and validation (ceil n/2) row indices."""
    perm = rng.permutation(n)
    return np.sort(perm[: n // 2]), np.sort(perm[n // 2:])


def _expand(params: ModelParams, keep: np.ndarray, k: int) -> ModelParams:
    # teams unseen in training sit at the sum-zero grand mean
    mu = np.zeros(k)
    mu[keep] = params.mu
    return ModelParams(mu, params.tau, params.delta1)


def realized_probabilities(params: ModelParams, t: Tournament) -> np.ndarray:
    probs = category_probabilities(params, t)
    return probs[np.arange(t.n), t.outcome]


def cross_validate(t: Tournament, reps: int = 100, seed: int = 0, estimators=ALL_ESTIMATORS,
                   cfg: LassoConfig | None = None, n_jobs: int = 1) -> CvResult:
    """Repeated split-half validation.

    Each repetition fits every estimator, penalty selection included, on
    a random half of the matches and scores the other half by the
    negative log-probability of the realized outcomes.
    """
    if t.n < 2:
        raise ValueError("need at least two matches")
    if reps < 1:
        raise ValueError("reps must be positive")
    ests = [Estimator.parse(e) for e in estimators]
    seeds = np.random.SeedSequence(seed).spawn(reps)

    def one(ss):
        train_rows, val_rows = split_halves(t.n, np.random.default_rng(ss))
        train, keep = t.subset(train_rows).compact()
        val = t.subset(val_rows)
        fits = fit_estimators(train, ests, cfg)
        nll, coin = [], []
        for e in ests:
            p = realized_probabilities(_expand(fits.params[e], keep, t.k), val)
            nll.append(-np.log(p).sum())
            coin.append(np.mean(p > 0.5))
        return nll, coin, fits.fallbacks

    if n_jobs == 1:
        results = [one(ss) for ss in seeds]
    else:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=n_jobs)(delayed(one)(ss) for ss in seeds)
    return CvResult(
        estimators=[e.value for e in ests],
        per_rep_negloglik=np.array([r[0] for r in results]),
        coin=np.array([r[1] for r in results]),
        seed=seed,
        fallbacks=sum(r[2] for r in results),
    )
