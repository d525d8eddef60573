"""Paired-comparison data and the Bradley-Terry likelihood.

Two variants share one code path. The binary model has

    P(i beats j) = logistic(tau * h + mu_i - mu_j)

and the ties model is a cumulative-link extension with cutpoints
``delta0 = -delta1`` and ``delta1 >= 0``::

    P(j wins)    = logistic(-delta1 - eta)
    P(i wins)    = logistic(eta - delta1)
    P(tie)       = 1 - P(i wins) - P(j wins)

where ``eta = tau * h + mu_i - mu_j``.  With ``delta1 = 0`` the tie
probability vanishes and the binary model is recovered exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np
from scipy.special import expit, log_expit


class Outcome(enum.IntEnum):
    """Match result coded from the point of view of the first-listed team."""

    WIN_J = 0
    TIE = 1
    WIN_I = 2


class TeamId(NamedTuple):
    index: int
    name: str


class MatchRecord(NamedTuple):
    i: int
    j: int
    venue: int
    outcome: Outcome


@dataclass(frozen=True, eq=False)
class Tournament:
    """Teams plus the full list of matches, stored column-wise.

    ``venue`` is +1 when the match is played at the home of team ``i``,
    0 on neutral ground and -1 at the home of team ``j``.
    """

    teams: tuple[str, ...]
    i: np.ndarray
    j: np.ndarray
    venue: np.ndarray
    outcome: np.ndarray
    ties_allowed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "teams", tuple(self.teams))
        for name in ("i", "j", "venue", "outcome"):
            arr = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        k, n = len(self.teams), len(self.i)
        if n == 0:
            raise ValueError("a tournament needs at least one match")
        if not (len(self.j) == len(self.venue) == len(self.outcome) == n):
            raise ValueError("match columns have different lengths")
        if len(set(self.teams)) != k:
            raise ValueError("team names must be unique")
        if np.any(self.i < 0) or np.any(self.i >= k) or np.any(self.j < 0) or np.any(self.j >= k):
            raise ValueError("match references an unknown team index")
        if np.any(self.i == self.j):
            raise ValueError("a team cannot play itself")
        if not np.all(np.isin(self.venue, (-1, 0, 1))):
            raise ValueError("venue must be -1, 0 or +1")
        if not np.all(np.isin(self.outcome, (0, 1, 2))):
            raise ValueError("outcome must be WIN_J, TIE or WIN_I")
        if not self.ties_allowed and np.any(self.outcome == Outcome.TIE):
            raise ValueError("TIE outcome in a tournament without ties")

    @classmethod
    def from_records(
        cls,
        teams: Sequence[str],
        records: Iterable[MatchRecord | tuple],
        ties_allowed: bool = False,
    ) -> "Tournament":
        rows = [tuple(r) for r in records]
        if not rows:
            raise ValueError("a tournament needs at least one match")
        i, j, h, y = (np.array(col) for col in zip(*rows))
        return cls(tuple(teams), i, j, h, y, ties_allowed)

    @property
    def k(self) -> int:
        return len(self.teams)

    @property
    def n(self) -> int:
        return len(self.i)

    @property
    def team_ids(self) -> list[TeamId]:
        return [TeamId(a, name) for a, name in enumerate(self.teams)]

    @property
    def matches(self) -> list[MatchRecord]:
        return list(self.records())

    def records(self) -> Iterator[MatchRecord]:
        for a, b, h, y in zip(self.i, self.j, self.venue, self.outcome):
            yield MatchRecord(int(a), int(b), int(h), Outcome(int(y)))

    def index(self, name: str) -> int:
        return self.teams.index(name)

    def subset(self, rows) -> "Tournament":
        """Tournament restricted to the given match rows (same team list)."""
        rows = np.asarray(rows)
        return Tournament(self.teams, self.i[rows], self.j[rows],
                          self.venue[rows], self.outcome[rows], self.ties_allowed)

    def compact(self) -> tuple["Tournament", np.ndarray]:
        """Drop teams without matches.

        Returns the reduced tournament and the original index of each of
        its teams.
        """
        keep = np.unique(np.concatenate([self.i, self.j]))
        new = np.full(self.k, -1)
        new[keep] = np.arange(len(keep))
        t = Tournament(tuple(self.teams[a] for a in keep), new[self.i], new[self.j],
                       self.venue, self.outcome, self.ties_allowed)
        return t, keep

    def with_outcomes(self, outcome) -> "Tournament":
        return Tournament(self.teams, self.i, self.j, self.venue, outcome, self.ties_allowed)

    def relabel(self, perm) -> "Tournament":
        """Rename team ``a`` to ``perm[a]``."""
        perm = np.asarray(perm)
        teams = [None] * self.k
        for a, name in enumerate(self.teams):
            teams[perm[a]] = name
        return Tournament(tuple(teams), perm[self.i], perm[self.j],
                          self.venue, self.outcome, self.ties_allowed)

    def record(self) -> np.ndarray:
        """Per-team (wins, ties, losses) counts, shape (k, 3)."""
        out = np.zeros((self.k, 3), dtype=np.int64)
        np.add.at(out, (self.i, 2 - self.outcome), 1)
        np.add.at(out, (self.j, self.outcome), 1)
        return out

    @property
    def has_home_matches(self) -> bool:
        return bool(np.any(self.venue != 0))

    @cached_property
    def design(self) -> np.ndarray:
        """Design matrix for (mu, tau): +1 for team i, -1 for team j, h for tau."""
        X = np.zeros((self.n, self.k + 1))
        rows = np.arange(self.n)
        X[rows, self.i] = 1.0
        X[rows, self.j] = -1.0
        X[:, self.k] = self.venue
        return X


@dataclass
class ModelParams:
    """Abilities ``mu`` (re-centred to sum zero), home advantage ``tau`` and,
    for the ties model only, the cutpoint ``delta1``."""

    mu: np.ndarray
    tau: float = 0.0
    delta1: float | None = None

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        self.mu = mu - mu.mean()
        self.tau = float(self.tau)
        if self.delta1 is not None:
            self.delta1 = float(self.delta1)
            if self.delta1 < 0:
                raise ValueError("delta1 must be nonnegative")

    @property
    def k(self) -> int:
        return len(self.mu)

    @property
    def ties(self) -> bool:
        return self.delta1 is not None

    def vector(self) -> np.ndarray:
        """Flat (mu, tau[, delta1]) vector, the layout used by :func:`gradient`."""
        tail = [self.tau] if self.delta1 is None else [self.tau, self.delta1]
        return np.concatenate([self.mu, tail])

    @classmethod
    def from_vector(cls, x, ties: bool) -> "ModelParams":
        x = np.asarray(x, dtype=float)
        if ties:
            return cls(x[:-2], x[-2], x[-1])
        return cls(x[:-1], x[-1])

    def copy(self) -> "ModelParams":
        return ModelParams(self.mu.copy(), self.tau, self.delta1)


def _check(params: ModelParams, t: Tournament) -> None:
    if params.k != t.k:
        raise ValueError(f"params have {params.k} abilities, tournament has {t.k} teams")
    if params.ties != t.ties_allowed:
        raise ValueError("delta1 must be given exactly when the tournament allows ties")


def linear_predictor(params: ModelParams, t: Tournament) -> np.ndarray:
    return params.tau * t.venue + params.mu[t.i] - params.mu[t.j]


def _log1mexp(x):
    # log(1 - exp(x)) for x < 0
    x = np.asarray(x, dtype=float)
    return np.where(x > -0.693, np.log(-np.expm1(x)), np.log1p(-np.exp(x)))


def match_terms(eta, delta, y, order: int = 0):
    """Per-match negative log-probability and its derivatives.

    Returns ``f`` and, for ``order >= 1``, ``(f_eta, f_delta)`` and, for
    ``order >= 2``, ``(f_eta_eta, f_eta_delta, f_delta_delta)``.

    Each category probability is ``F(U) - F(L)`` with ``F`` logistic,
    ``U = +-delta - eta`` and ``L = -+delta - eta`` (infinite for the
    extreme categories).
    """
    eta = np.asarray(eta, dtype=float)
    y = np.asarray(y)
    delta = float(delta)
    if delta == 0.0 and not np.any(y == 1):
        return _binary_terms(eta, y, order)
    win, tie, loss = y == 2, y == 1, y == 0
    U = np.where(tie, delta - eta, -delta - eta)
    L = np.where(tie, -delta - eta, delta - eta)

    f = np.empty_like(eta)
    f[loss] = -log_expit(U[loss])
    f[win] = -log_expit(-L[win])
    if tie.any():
        Ut, Lt = U[tie], L[tie]
        with np.errstate(divide="ignore"):
            f[tie] = -(log_expit(Ut) + log_expit(-Lt) + _log1mexp(Lt - Ut))
    if order == 0:
        return f

    # r_U = F'(U)/P and r_L = F'(L)/P, zero when the bound is infinite
    rU = np.zeros_like(eta)
    rL = np.zeros_like(eta)
    rU[loss] = expit(-U[loss])
    rL[win] = expit(L[win])
    if tie.any():
        Ut, Lt = U[tie], L[tie]
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = -np.expm1(Lt - Ut)
            rU[tie] = expit(-Ut) / (expit(-Lt) * denom)
            rL[tie] = expit(Lt) / (expit(Ut) * denom)
    fU, fL = -rU, rL
    # dU/d delta and dL/d delta; both bounds move with -eta
    bU = np.where(tie, 1.0, -1.0)
    bL = np.where(tie, -1.0, 1.0)
    f_eta = -(fU + fL)
    f_delta = bU * fU + bL * fL
    if order == 1:
        return f, (f_eta, f_delta)

    fUU = -rU * (1.0 - 2.0 * expit(U)) + rU**2
    fLL = rL * (1.0 - 2.0 * expit(L)) + rL**2
    fUL = -rU * rL
    f_ee = fUU + 2.0 * fUL + fLL
    f_ed = -(bU * fUU + (bU + bL) * fUL + bL * fLL)
    f_dd = bU**2 * fUU + 2.0 * bU * bL * fUL + bL**2 * fLL
    return f, (f_eta, f_delta), (f_ee, f_ed, f_dd)


def _binary_terms(eta, y, order):
    # logistic special case: P(i wins) = logistic(eta)
    s = np.where(y == 2, 1.0, -1.0)
    f = -log_expit(s * eta)
    if order == 0:
        return f
    p = expit(eta)
    f_eta = p - (y == 2)
    # derivatives in delta1 taken at delta1 = 0
    f_delta = np.where(y == 2, 1.0 - p, p)
    if order == 1:
        return f, (f_eta, f_delta)
    w = p * (1.0 - p)
    return f, (f_eta, f_delta), (w, -s * w, w)


def neg_log_likelihood(params: ModelParams, t: Tournament) -> float:
    """Negative log-likelihood of the observed outcomes."""
    _check(params, t)
    delta = params.delta1 or 0.0
    return float(np.sum(match_terms(linear_predictor(params, t), delta, t.outcome)))


def gradient(params: ModelParams, t: Tournament) -> np.ndarray:
    """Analytic gradient of :func:`neg_log_likelihood` in the layout of
    :meth:`ModelParams.vector`; no contrast projection is applied."""
    _check(params, t)
    delta = params.delta1 or 0.0
    _, (f_eta, f_delta) = match_terms(linear_predictor(params, t), delta, t.outcome, order=1)
    g = t.design.T @ f_eta
    if params.ties:
        g = np.append(g, f_delta.sum())
    return g


def hessian(params: ModelParams, t: Tournament) -> np.ndarray:
    """Observed information (Hessian of the negative log-likelihood)."""
    _check(params, t)
    delta = params.delta1 or 0.0
    _, _, (f_ee, f_ed, f_dd) = match_terms(
        linear_predictor(params, t), delta, t.outcome, order=2)
    X = t.design
    H = X.T @ (f_ee[:, None] * X)
    if params.ties:
        c = X.T @ f_ed
        H = np.block([[H, c[:, None]], [c[None, :], np.array([[f_dd.sum()]])]])
    return H


def outcome_probabilities(params: ModelParams, i: int, j: int, h: int = 0):
    """(P(i wins), P(tie), P(j wins)) for one match with venue ``h``."""
    if h not in (-1, 0, 1):
        raise ValueError("h must be -1, 0 or +1")
    eta = params.tau * h + params.mu[i] - params.mu[j]
    delta = params.delta1 or 0.0
    p_i = float(expit(eta - delta))
    p_j = float(expit(-delta - eta))
    p_tie = max(0.0, 1.0 - p_i - p_j) if params.ties else 0.0
    return p_i, p_tie, p_j


def category_probabilities(params: ModelParams, t: Tournament) -> np.ndarray:
    """(n, 3) matrix of probabilities for WIN_J, TIE and WIN_I per match."""
    eta = linear_predictor(params, t)
    delta = params.delta1 or 0.0
    p_j = expit(-delta - eta)
    p_i = expit(eta - delta)
    p_tie = np.clip(1.0 - p_i - p_j, 0.0, 1.0) if params.ties else np.zeros_like(eta)
    return np.column_stack([p_j, p_tie, p_i])


def probability_matrix(params: ModelParams) -> np.ndarray:
    """Neutral-field probabilities that the row team beats the column team."""
    diff = params.mu[:, None] - params.mu[None, :]
    return expit(diff - (params.delta1 or 0.0))
