"""Adaptive ranking lasso solved by the augmented Lagrangian method.

The penalized problem

    minimize  -loglik(mu, tau) + lam * sum_{i<j} w_ij |mu_i - mu_j|

is rewritten with auxiliary pair differences ``theta_ij = mu_i - mu_j``
and solved by alternating a minimization step over ``(mu, tau, theta)``
with a multiplier update.  Within the minimization step the abilities
are refitted by Newton's method (a Bradley-Terry fit with a quadratic
penalty) and ``theta`` by soft-thresholding.
"""

from __future__ import annotations

import math
import warnings
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mle import (ADAPTIVE_EPS, AdaptiveWeights, ConvergenceError, DivergenceError, MleFit,
                  constrained_mle, newton_fit, sum_zero_basis)
from .model import ModelParams, Tournament, match_terms, neg_log_likelihood

V_FLOOR = 100.0


@dataclass
class LassoConfig:
    """Solver knobs.  ``lambda_grid`` (decreasing) overrides the automatic
    grid of ``n_lambda`` log-spaced values from lambda_max down to
    ``lambda_max * lambda_ratio``."""

    lambda_grid: Sequence[float] | None = None
    n_lambda: int = 100
    lambda_ratio: float = 1e-4
    inner_tol: float = 1e-8
    outer_tol: float = 1e-6
    max_inner: int = 200
    max_outer: int = 500
    v_init: float = V_FLOOR
    v_floor: float = V_FLOOR
    zero_tol: float = 1e-10
    inner: str = "newton"

    def __post_init__(self):
        if self.lambda_grid is not None:
            grid = np.asarray(self.lambda_grid, dtype=float)
            if grid.ndim != 1 or len(grid) == 0:
                raise ValueError("lambda_grid must be a nonempty 1-d sequence")
            if np.any(grid < 0) or np.any(np.diff(grid) >= 0):
                raise ValueError("lambda_grid must be nonnegative and strictly decreasing")
            self.lambda_grid = grid
        if min(self.inner_tol, self.outer_tol, self.v_init, self.v_floor) <= 0:
            raise ValueError("tolerances and v must be positive")
        if self.inner not in ("newton", "cycle"):
            raise ValueError("inner must be 'newton' or 'cycle'")


@dataclass
class Grouping:
    """Partition of the teams.  Group 0 has the highest ability."""

    assignment: np.ndarray
    levels: np.ndarray

    @property
    def n_groups(self) -> int:
        return len(self.levels)

    def members(self, g: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == g)

    def groups(self) -> list[np.ndarray]:
        return [self.members(g) for g in range(self.n_groups)]

    def same_partition(self, other: "Grouping") -> bool:
        return _canonical(self.assignment) == _canonical(other.assignment)


def _canonical(labels) -> tuple:
    seen: dict = {}
    return tuple(seen.setdefault(int(x), len(seen)) for x in labels)


@dataclass
class LassoFit:
    params: ModelParams
    theta: np.ndarray
    multipliers: np.ndarray
    v: float
    lam: float
    grouping: Grouping
    neg_loglik: float
    df: int
    aic: float
    bic: float
    converged: bool = True
    outer_iterations: int = 0
    residual: float = 0.0
    # abilities before the group-mean projection
    raw_mu: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def mu(self) -> np.ndarray:
        return self.params.mu


@dataclass
class RankingPath:
    points: list[LassoFit]
    relative_bound: np.ndarray
    weights: AdaptiveWeights
    n: int
    failures: list[tuple[float, str]] = field(default_factory=list)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    @property
    def df(self) -> np.ndarray:
        return np.array([p.df for p in self.points])

    @property
    def aic(self) -> np.ndarray:
        return np.array([p.aic for p in self.points])

    @property
    def bic(self) -> np.ndarray:
        return np.array([p.bic for p in self.points])

    @property
    def bound(self) -> np.ndarray:
        return np.array([penalty(pair_differences(p.mu), self.weights) for p in self.points])


# ---------------------------------------------------------------- pair algebra

@lru_cache(maxsize=64)
def pair_index(k: int) -> tuple[np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(k, 1)
    iu.setflags(write=False)
    ju.setflags(write=False)
    return iu, ju


def difference_matrix(k: int) -> np.ndarray:
    """(k(k-1)/2, k) matrix mapping mu to (mu_i - mu_j) for i < j."""
    iu, ju = pair_index(k)
    D = np.zeros((len(iu), k))
    rows = np.arange(len(iu))
    D[rows, iu] = 1.0
    D[rows, ju] = -1.0
    return D


def pair_differences(mu) -> np.ndarray:
    mu = np.asarray(mu)
    iu, ju = pair_index(len(mu))
    return mu[iu] - mu[ju]


def _weights_vector(w) -> np.ndarray:
    if isinstance(w, AdaptiveWeights):
        return w.pairs()
    return np.asarray(w, dtype=float)


def penalty(theta, w) -> float:
    """sum_{i<j} w_ij |theta_ij|."""
    return float(np.sum(_weights_vector(w) * np.abs(theta)))


def penalized_objective(params: ModelParams, t: Tournament, lam: float, w) -> float:
    """-loglik + lam * sum w_ij |mu_i - mu_j|."""
    return neg_log_likelihood(params, t) + lam * penalty(pair_differences(params.mu), w)


# ---------------------------------------------------------------- ALM pieces

def soft_threshold(x, t):
    """sign(x) * max(|x| - t, 0)."""
    t = np.asarray(t)
    if np.any(t < 0):
        raise ValueError("threshold must be nonnegative")
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def solve_theta(mu, u, v: float, lam: float, w) -> np.ndarray:
    """Exact minimizer over theta of the augmented objective for fixed mu."""
    if v <= 0:
        raise ValueError("v must be positive")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    target = pair_differences(mu) - np.asarray(u) / v
    return soft_threshold(target, lam * _weights_vector(w) / v)


def update_multipliers(u, theta, mu, v: float, v_floor: float = V_FLOOR):
    """Multiplier recursion; the new penalty coefficient is the largest
    squared multiplier, floored at ``v_floor``."""
    if v <= 0:
        raise ValueError("v must be positive")
    u_new = np.asarray(u) + v * (np.asarray(theta) - pair_differences(mu))
    v_new = max(float(np.max(u_new**2)) if len(u_new) else 0.0, v_floor)
    return u_new, v_new


def augmented_objective(params: ModelParams, t: Tournament, theta, u, v, lam, w) -> float:
    r = np.asarray(theta) - pair_differences(params.mu)
    return (neg_log_likelihood(params, t) + lam * penalty(theta, w)
            + float(np.dot(u, r)) + 0.5 * v * float(np.dot(r, r)))


class _Workspace:
    """Per-tournament constants shared by the ALM iterations."""

    def __init__(self, t: Tournament):
        self.t = t
        self.k = t.k
        self.D = difference_matrix(t.k)
        self.basis = sum_zero_basis(t.k)
        self.DB = self.D @ self.basis
        self.XB = t.design[:, :t.k] @ self.basis
        self.h = t.design[:, t.k].copy()
        self.free_tau = t.has_home_matches
        self.ties = t.ties_allowed
        self.M = np.column_stack([self.XB, self.h]) if self.free_tau else self.XB
        # D'D restricted to the sum-zero subspace is k * I
        self.DtD = self.k * np.eye(self.k) - np.ones((self.k, self.k))


def _minimization_step(ws: _Workspace, params: ModelParams, u, v: float, lam: float, wv,
                       tol: float, max_iter: int):
    """Joint minimizer of the augmented objective over (mu, tau, theta).

    For fixed abilities the optimal theta is the soft-thresholded value, so
    theta is profiled out: what remains is the likelihood plus a Huber
    function of ``D mu - u/v``, which is once differentiable and is
    minimized by semismooth Newton steps with backtracking.
    """
    t = ws.t
    d = ws.basis.shape[1]
    c = lam * wv / v
    shift = u / v
    XB, DB, h = ws.XB, ws.DB, ws.h
    free_tau, ties = ws.free_tau, ws.ties

    def split(x):
        z = x[:d]
        p = d
        tau = 0.0
        if free_tau:
            tau = x[p]
            p += 1
        delta = x[p] if ties else 0.0
        return z, tau, delta

    def huber(r):
        a = np.abs(r)
        inside = a <= c
        return np.where(inside, 0.5 * v * r * r, lam * wv * a - 0.5 * v * c * c), inside

    def value(x):
        z, tau, delta = split(x)
        f = match_terms(XB @ z + tau * h, delta, t.outcome).sum()
        e, _ = huber(DB @ z - shift)
        return f + e.sum()

    def derivs(x):
        z, tau, delta = split(x)
        f, (fe, fd), (fee, fed, fdd) = match_terms(XB @ z + tau * h, delta, t.outcome, order=2)
        M = ws.M
        g = M.T @ fe
        H = M.T @ (fee[:, None] * M)
        if ties:
            cc = M.T @ fed
            g = np.append(g, fd.sum())
            H = np.block([[H, cc[:, None]], [cc[None, :], np.array([[fdd.sum()]])]])
        r = DB @ z - shift
        e, inside = huber(r)
        g[:d] += DB.T @ (v * np.clip(r, -c, c))
        Di = DB[inside]
        H[:d, :d] += v * (Di.T @ Di)
        return f.sum() + e.sum(), g, H

    x = np.concatenate([ws.basis.T @ params.mu,
                        [params.tau] if free_tau else [],
                        [params.delta1] if ties else []])
    val, g, H = derivs(x)
    converged = False
    for it in range(1, max_iter + 1):
        active = np.ones(len(x), dtype=bool)
        if ties and x[-1] <= 0.0 and g[-1] > 0.0:
            active[-1] = False
        ga = g[active]
        scale = max(1.0, v)
        if np.max(np.abs(ga)) <= tol * scale:
            converged = True
            break
        Ha = H[np.ix_(active, active)]
        try:
            step = np.linalg.solve(Ha, -ga)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(Ha, ga, rcond=None)[0]
        full = np.zeros_like(x)
        full[active] = step
        slope = full @ g
        if slope >= 0 or not np.all(np.isfinite(full)):
            full = -g * active / max(1.0, np.abs(np.diag(H)).max())
            slope = full @ g
        if -slope <= 1e-15 * max(1.0, abs(val)):
            converged = True
            break
        s = 1.0
        for _ in range(60):
            xn = x + s * full
            if ties:
                xn[-1] = max(xn[-1], 0.0)
            vn = value(xn)
            if np.isfinite(vn) and vn <= val + 1e-4 * s * slope:
                break
            s *= 0.5
        else:
            converged = np.max(np.abs(ga)) <= 1e3 * tol * scale
            break
        x = xn
        val, g, H = derivs(x)
    z, tau, delta = split(x)
    mu = ws.basis @ z
    new = ModelParams(mu, tau, delta if ties else None)
    theta = soft_threshold(pair_differences(new.mu) - shift, c)
    return new, theta, it, converged


def solve_mu_tau(t: Tournament, theta, u, v: float, warm: ModelParams | None = None,
                 tol: float = 1e-8, max_iter: int = 200, _ws: _Workspace | None = None
                 ) -> ModelParams:
    """Minimize ``-loglik + u'(theta - D mu) + (v/2)|theta - D mu|^2`` over
    (mu, tau[, delta1]) with sum-zero abilities."""
    if v <= 0:
        raise ValueError("v must be positive")
    ws = _ws or _Workspace(t)
    b = ws.D.T @ (np.asarray(u) + v * np.asarray(theta))
    sol = newton_fit(t, ws.basis, start=warm, quad_A=v * ws.DtD, quad_b=b,
                     max_iter=max_iter, tol=tol, mu_bound=None)
    if not sol.converged:
        raise ConvergenceError(
            f"penalized Newton sub-problem did not converge in {sol.iterations} "
            f"iterations (gradient {sol.grad_norm:.3g})")
    return sol.params


# ---------------------------------------------------------------- groupings

def _components(k: int, iu, ju, fused) -> np.ndarray:
    parent = list(range(k))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in zip(iu[fused], ju[fused]):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return np.array([find(a) for a in range(k)])


def grouping_from_labels(labels, mu) -> Grouping:
    """Grouping with groups ordered by decreasing mean ability."""
    labels = np.asarray(labels)
    mu = np.asarray(mu, dtype=float)
    uniq, inv = np.unique(labels, return_inverse=True)
    means = np.bincount(inv, weights=mu) / np.bincount(inv)
    order = np.argsort(-means, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return Grouping(assignment=rank[inv], levels=means[order])


def extract_grouping(fit_or_theta, mu=None, zero_tol: float = 1e-10) -> tuple[Grouping, bool]:
    """Teams i, j share a group iff ``|theta_ij| <= zero_tol`` (closed
    transitively).  Returns the grouping and whether the zero pattern was
    already transitive."""
    if isinstance(fit_or_theta, LassoFit):
        theta = fit_or_theta.theta
        mu = fit_or_theta.raw_mu if fit_or_theta.raw_mu is not None else fit_or_theta.mu
    else:
        theta = np.asarray(fit_or_theta)
    mu = np.asarray(mu, dtype=float)
    k = len(mu)
    iu, ju = pair_index(k)
    fused = np.abs(theta) <= zero_tol
    labels = _components(k, iu, ju, fused)
    consistent = bool(np.array_equal(labels[iu] == labels[ju], fused))
    return grouping_from_labels(labels, mu), consistent


def _project(mu, grouping: Grouping) -> np.ndarray:
    a = grouping.assignment
    out = (np.bincount(a, weights=mu) / np.bincount(a))[a]
    return out - out.mean()


# ---------------------------------------------------------------- fitting

def _info(nll: float, df: int, n: int) -> tuple[float, float]:
    return 2.0 * nll + 2.0 * df, 2.0 * nll + math.log(n) * df


def fit_lasso(t: Tournament, lam: float, w: AdaptiveWeights, cfg: LassoConfig | None = None,
              warm: LassoFit | None = None, _ws: _Workspace | None = None) -> LassoFit:
    """Ranking-lasso estimate at penalty ``lam``."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    cfg = cfg or LassoConfig()
    ws = _ws or _Workspace(t)
    wv = _weights_vector(w)
    if len(wv) != len(ws.D):
        raise ValueError("weights do not match the number of teams")
    ties = t.ties_allowed

    if warm is not None:
        params = ModelParams(warm.raw_mu if warm.raw_mu is not None else warm.mu,
                             warm.params.tau, warm.params.delta1)
        theta = warm.theta.copy()
        # at the optimum u_ij = -lam * w_ij * sign(theta_ij), so rescale
        scale = lam / warm.lam if warm.lam > 0 else 1.0
        u = warm.multipliers * scale
        v = max(float(np.max(u**2)) if len(u) else 0.0, cfg.v_floor)
    else:
        params = ModelParams(np.zeros(t.k), 0.0, 0.5 if ties else None)
        theta = np.zeros(len(wv))
        u = np.zeros(len(wv))
        v = cfg.v_init

    def pen_obj(p, th):
        return neg_log_likelihood(p, t) + lam * float(np.sum(wv * np.abs(th)))

    obj = pen_obj(params, theta)
    converged = False
    residual = np.inf
    inner_total = 0
    outer = 0
    for outer in range(1, cfg.max_outer + 1):
        if cfg.inner == "newton":
            params, theta, n_it, ok = _minimization_step(
                ws, params, u, v, lam, wv, cfg.inner_tol, cfg.max_inner)
            inner_total += n_it
            if not ok:
                raise ConvergenceError(
                    f"minimization step did not converge at lambda={lam:.4g}")
        else:
            # cycle between (mu, tau) and theta
            for _ in range(cfg.max_inner):
                inner_total += 1
                new = solve_mu_tau(t, theta, u, v, warm=params, tol=cfg.inner_tol, _ws=ws)
                theta_new = solve_theta(new.mu, u, v, lam, wv)
                change = max(np.max(np.abs(new.mu - params.mu)),
                             np.max(np.abs(theta_new - theta)) if len(theta) else 0.0)
                params, theta = new, theta_new
                if change <= cfg.inner_tol * 100:
                    break
        # update step
        residual = float(np.max(np.abs(theta - pair_differences(params.mu)))) if len(theta) else 0.0
        u, v = update_multipliers(u, theta, params.mu, v, cfg.v_floor)
        new_obj = pen_obj(params, theta)
        done = residual <= cfg.outer_tol and abs(new_obj - obj) <= cfg.outer_tol
        obj = new_obj
        if done:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"augmented Lagrangian did not converge at lambda={lam:.4g} after "
            f"{cfg.max_outer} outer iterations (residual {residual:.3g})",
            RuntimeWarning, stacklevel=2)

    raw_mu = params.mu.copy()
    grouping, consistent = extract_grouping(theta, raw_mu, cfg.zero_tol)
    final = ModelParams(_project(raw_mu, grouping), params.tau, params.delta1)
    grouping = Grouping(grouping.assignment, np.array(
        [final.mu[grouping.assignment == g][0] for g in range(grouping.n_groups)]))
    nll = neg_log_likelihood(final, t)
    df = grouping.n_groups
    aic, bic = _info(nll, df, t.n)
    return LassoFit(
        params=final, theta=theta, multipliers=u, v=v, lam=float(lam), grouping=grouping,
        neg_loglik=nll, df=df, aic=aic, bic=bic, converged=converged,
        outer_iterations=outer, residual=residual, raw_mu=raw_mu,
        diagnostics={"inner_cycles": inner_total, "transitive": consistent},
    )


def lambda_max(t: Tournament, w: AdaptiveWeights, cfg: LassoConfig | None = None,
               start: float = 1.0, _ws: _Workspace | None = None) -> tuple[float, LassoFit]:
    """Smallest value on a doubling ladder from ``start`` at which every
    team falls into a single group."""
    cfg = cfg or LassoConfig()
    ws = _ws or _Workspace(t)
    lam = start
    fit = fit_lasso(t, lam, w, cfg, _ws=ws)
    if fit.df == 1:
        while True:
            smaller = fit_lasso(t, lam / 2, w, cfg, warm=fit, _ws=ws)
            if smaller.df > 1:
                return lam, fit
            lam, fit = lam / 2, smaller
    while fit.df > 1:
        lam *= 2
        fit = fit_lasso(t, lam, w, cfg, warm=fit, _ws=ws)
    return lam, fit


def lambda_grid(lam_max: float, n: int = 100, ratio: float = 1e-4) -> np.ndarray:
    return lam_max * np.logspace(0.0, math.log10(ratio), n)


def compute_path(t: Tournament, w: AdaptiveWeights, cfg: LassoConfig | None = None) -> RankingPath:
    """Fit every grid value from the largest penalty down, warm-starting each
    fit from the previous one."""
    cfg = cfg or LassoConfig()
    ws = _Workspace(t)
    warm = None
    if cfg.lambda_grid is None:
        lam_max, warm = lambda_max(t, w, cfg, _ws=ws)
        grid = lambda_grid(lam_max, cfg.n_lambda, cfg.lambda_ratio)
    else:
        grid = cfg.lambda_grid
    points: list[LassoFit] = []
    failures: list[tuple[float, str]] = []
    for lam in grid:
        try:
            fit = fit_lasso(t, lam, w, cfg, warm=warm, _ws=ws)
        except (ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
            failures.append((float(lam), str(exc)))
            continue
        points.append(fit)
        warm = fit
    if not points:
        raise ConvergenceError("every point of the regularization path failed")
    s = np.array([penalty(pair_differences(p.mu), w) for p in points])
    rel = s / s.max() if s.max() > 0 else np.zeros_like(s)
    return RankingPath(points, rel, w, t.n, failures)


def hybrid_fit(t: Tournament, fit: LassoFit) -> MleFit:
    """Constrained MLE on the grouping selected by the lasso.

    Falls back to the ridge-stabilized fit when a group wins or loses
    all its matches against the others.
    """
    try:
        return constrained_mle(t, fit.grouping.assignment)
    except DivergenceError:
        return constrained_mle(t, fit.grouping.assignment, ridge_eps=ADAPTIVE_EPS)


def select(path: RankingPath, criterion: str = "aic", hybrid: bool = False,
           t: Tournament | None = None) -> tuple[LassoFit, MleFit | None]:
    """Path point minimizing AIC or BIC.

    With ``hybrid=True`` the criterion is evaluated at the constrained MLE
    of each distinct grouping on the path and that refit is returned too.
    Ties on the criterion go to the larger penalty.
    """
    criterion = criterion.lower()
    if criterion not in ("aic", "bic"):
        raise ValueError("criterion must be 'aic' or 'bic'")
    if not path.points:
        raise ValueError("empty path")
    pen = 2.0 if criterion == "aic" else math.log(path.n)
    if not hybrid:
        values = np.array([getattr(p, criterion) for p in path.points])
        refits = [None] * len(values)
    else:
        if t is None:
            raise ValueError("hybrid selection needs the tournament")
        cache: dict[tuple, MleFit] = {}
        refits = []
        for p in path.points:
            key = _canonical(p.grouping.assignment)
            if key not in cache:
                cache[key] = hybrid_fit(t, p)
            refits.append(cache[key])
        values = np.array([2.0 * r.neg_loglik + pen * p.df for p, r in zip(path.points, refits)])
    lams = path.lambdas
    best = np.flatnonzero(values <= values.min() + 1e-9 * max(1.0, abs(values.min())))
    idx = best[np.argmax(lams[best])]
    return path.points[idx], refits[idx]
