"""Maximum-likelihood fitting under the sum contrast.

All fits run a damped Newton method on a reduced parameterization
``mu = B @ z`` where the columns of ``B`` span the allowed abilities
(the sum-zero subspace, or group-constant sum-zero vectors for a
constrained fit).  An optional quadratic term ``0.5 mu'A mu - b'mu`` in
the abilities covers both the ridge stabilization and the augmented
Lagrangian sub-problem of :mod:`rankinglasso.lasso`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from .model import ModelParams, Tournament, match_terms

MAX_ITER = 200
GRAD_TOL = 1e-8
MU_BOUND = 25.0
# fits with an ability this large are checked for separation
SEPARATION_CHECK = 8.0
WEIGHT_CAP = 1e8
ADAPTIVE_EPS = 1e-4


class ConvergenceError(RuntimeError):
    """Raised when an optimizer fails in a way that leaves no usable estimate."""


class DivergenceError(ConvergenceError):
    """Abilities drift to infinity (e.g. a team that wins or loses every match)."""


@dataclass
class MleFit:
    params: ModelParams
    se: np.ndarray
    neg_loglik: float
    converged: bool
    iterations: int
    tau_fixed: bool = False

    @property
    def mu(self) -> np.ndarray:
        return self.params.mu


@dataclass
class _Solution:
    params: ModelParams
    objective: float
    grad_norm: float
    iterations: int
    converged: bool
    hess_nll: np.ndarray  # reduced-space Hessian of the nll alone
    free_tau: bool
    free_delta: bool


def sum_zero_basis(k: int) -> np.ndarray:
    """Orthonormal k x (k-1) basis of {mu : sum(mu) = 0}."""
    return null_space(np.ones((1, k)))


def grouping_basis(labels) -> np.ndarray:
    """Orthonormal basis of sum-zero ability vectors constant within groups."""
    labels = np.asarray(labels)
    groups, inv = np.unique(labels, return_inverse=True)
    G = np.zeros((len(labels), len(groups)))
    G[np.arange(len(labels)), inv] = 1.0
    if len(groups) == 1:
        return np.zeros((len(labels), 0))
    N = null_space(G.sum(axis=0)[None, :])
    q, _ = np.linalg.qr(G @ N)
    return q


def separated(t: Tournament, basis: np.ndarray | None = None) -> bool:
    """True when the likelihood has no finite maximizer over ``mu = basis @ z``.

    That happens when some direction of (abilities, home effect) never
    decreases the fitted log-odds of a realized result and increases at
    least one, e.g. a team that lost every match.  Checked by a small LP.
    """
    B = sum_zero_basis(t.k) if basis is None else basis
    X = t.design
    cols = [X[:, :t.k] @ B]
    if t.has_home_matches:
        cols.append(X[:, t.k:])
    M = np.hstack(cols)
    if M.shape[1] == 0:
        return False
    decisive = t.outcome != 1
    sign = np.where(t.outcome == 2, 1.0, -1.0)[decisive]
    S = sign[:, None] * M[decisive]
    A_eq = M[~decisive] if np.any(~decisive) else None
    b_eq = np.zeros(len(A_eq)) if A_eq is not None else None
    res = linprog(-S.sum(axis=0), A_ub=-S, b_ub=np.zeros(len(S)), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(-1, 1)] * M.shape[1], method="highs")
    return bool(res.status == 0 and -res.fun > 1e-7)


def newton_fit(
    t: Tournament,
    basis: np.ndarray,
    start: ModelParams | None = None,
    quad_A: np.ndarray | None = None,
    quad_b: np.ndarray | None = None,
    max_iter: int = MAX_ITER,
    tol: float = GRAD_TOL,
    mu_bound: float | None = MU_BOUND,
) -> _Solution:
    """Minimize ``nll + 0.5 mu'A mu - b'mu`` over ``mu = basis @ z``, ``tau``
    and ``delta1 >= 0`` (ties model) by Newton steps with step halving."""
    k = t.k
    ties = t.ties_allowed
    B = basis
    d = B.shape[1]
    X = t.design
    XB = X[:, :k] @ B  # (n, d)
    h = X[:, k]
    free_tau = t.has_home_matches

    if start is None:
        start = ModelParams(np.zeros(k), 0.0, 0.5 if ties else None)
    z = B.T @ start.mu
    tau = start.tau if free_tau else 0.0
    delta = max(start.delta1, 0.0) if ties else 0.0

    if quad_A is not None:
        AB = B.T @ quad_A @ B
        bB = B.T @ quad_b if quad_b is not None else np.zeros(d)
    else:
        AB = None
        bB = B.T @ quad_b if quad_b is not None else None

    def objective(z, tau, delta):
        eta = XB @ z + tau * h
        val = match_terms(eta, delta, t.outcome).sum()
        if AB is not None:
            val += 0.5 * z @ AB @ z
        if bB is not None:
            val -= bB @ z
        return val

    def derivs(z, tau, delta):
        eta = XB @ z + tau * h
        f, (fe, fd), (fee, fed, fdd) = match_terms(eta, delta, t.outcome, order=2)
        cols = [XB]
        if free_tau:
            cols.append(h[:, None])
        M = np.hstack(cols) if len(cols) > 1 else XB
        g = M.T @ fe
        H = M.T @ (fee[:, None] * M)
        if ties:
            c = M.T @ fed
            g = np.append(g, fd.sum())
            H = np.block([[H, c[:, None]], [c[None, :], np.array([[fdd.sum()]])]])
        Hn = H.copy()
        val = f.sum()
        if AB is not None:
            g[:d] += AB @ z
            H[:d, :d] += AB
            val += 0.5 * z @ AB @ z
        if bB is not None:
            g[:d] -= bB
            val -= bB @ z
        return val, g, H, Hn

    def unpack(x):
        zz = x[:d]
        p = d
        tt = tau
        if free_tau:
            tt = x[p]
            p += 1
        dd = x[p] if ties else 0.0
        return zz, tt, dd

    x = np.concatenate([z, [tau] if free_tau else [], [delta] if ties else []])
    converged = False
    it = 0
    val, g, H, Hn = derivs(*unpack(x))
    gnorm = np.inf
    for it in range(1, max_iter + 1):
        # delta1 sits on its bound and wants to go negative: hold it there
        active = np.ones(len(x), dtype=bool)
        if ties and x[-1] <= 0.0 and g[-1] > 0.0:
            active[-1] = False
        ga = g[active]
        gnorm = float(np.max(np.abs(ga))) if len(ga) else 0.0
        if gnorm <= tol:
            converged = True
            break
        Ha = H[np.ix_(active, active)]
        try:
            step = np.linalg.solve(Ha, -ga)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(Ha, ga, rcond=None)[0]
        if not np.all(np.isfinite(step)) or step @ ga >= 0:
            step = -ga / max(1.0, np.abs(np.diag(Ha)).max())
        full = np.zeros_like(x)
        full[active] = step
        if -(full @ g) <= 1e-15 * max(1.0, abs(val)):
            # Newton decrement at working precision
            converged = True
            break
        s = 1.0
        accepted = False
        for _ in range(60):
            xn = x + s * full
            if ties:
                xn[-1] = max(xn[-1], 0.0)
            vn = objective(*unpack(xn))
            if np.isfinite(vn) and vn <= val + 1e-4 * s * (full @ g):
                accepted = True
                break
            s *= 0.5
        if not accepted:
            # no further decrease possible at working precision
            xn = x
            vn = val
        x = xn
        val, g, H, Hn = derivs(*unpack(x))
        if mu_bound is not None and d and np.max(np.abs(B @ x[:d])) > mu_bound:
            raise DivergenceError(
                f"abilities exceed {mu_bound} after {it} iterations; "
                "the likelihood has no finite maximum (try a ridge penalty)")
        if not accepted:
            active = np.ones(len(x), dtype=bool)
            if ties and x[-1] <= 0.0 and g[-1] > 0.0:
                active[-1] = False
            gnorm = float(np.max(np.abs(g[active]))) if active.any() else 0.0
            converged = gnorm <= 1e3 * tol
            break

    zz, tt, dd = unpack(x)
    params = ModelParams(B @ zz, tt, dd if ties else None)
    return _Solution(params, float(val), gnorm, it, converged, Hn, free_tau, ties)


def _standard_errors(sol: _Solution, basis: np.ndarray, k: int) -> np.ndarray:
    d = basis.shape[1]
    ties = sol.free_delta
    se = np.full(k + 1 + ties, np.nan)
    H = sol.hess_nll
    try:
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(H)
    if d:
        cov_mu = basis @ cov[:d, :d] @ basis.T
        se[:k] = np.sqrt(np.clip(np.diag(cov_mu), 0.0, None))
    else:
        se[:k] = 0.0
    p = d
    if sol.free_tau:
        se[k] = np.sqrt(max(cov[p, p], 0.0))
        p += 1
    if ties and sol.params.delta1 > 0:
        se[k + 1] = np.sqrt(max(cov[p, p], 0.0))
    return se


def _ridge_quadratic(k: int, eps: float) -> np.ndarray:
    # eps * sum_{i<j} (mu_i - mu_j)^2 = 0.5 mu' [2 eps (k I - 11')] mu
    return 2.0 * eps * (k * np.eye(k) - np.ones((k, k)))


def _checked_fit(t, B, start, A, bound, max_iter) -> _Solution:
    sol = newton_fit(t, B, start=start, quad_A=A, max_iter=max_iter, mu_bound=bound)
    if bound is not None and np.max(np.abs(sol.params.mu)) > SEPARATION_CHECK and separated(t, B):
        raise DivergenceError(
            "the likelihood has no finite maximum (some team or group won or lost "
            "all its matches against the rest); try a ridge penalty")
    return sol


def _finish(sol: _Solution, t: Tournament, basis: np.ndarray, max_iter: int) -> MleFit:
    from .model import neg_log_likelihood

    if not sol.converged:
        warnings.warn(
            f"Newton iterations stopped after {sol.iterations} steps with "
            f"gradient norm {sol.grad_norm:.3g}", RuntimeWarning, stacklevel=3)
    return MleFit(
        params=sol.params,
        se=_standard_errors(sol, basis, t.k),
        neg_loglik=neg_log_likelihood(sol.params, t),
        converged=sol.converged,
        iterations=sol.iterations,
        tau_fixed=not sol.free_tau,
    )


def fit_mle(t: Tournament, ridge_eps: float = 0.0, start: ModelParams | None = None,
            max_iter: int = MAX_ITER) -> MleFit:
    """Maximum likelihood (``ridge_eps = 0``) or ridge-stabilized fit.

    The ridge adds ``ridge_eps * sum_{i<j} (mu_i - mu_j)^2`` to the negative
    log-likelihood.  Standard errors come from the observed information of
    the likelihood alone, in the layout of :func:`rankinglasso.model.gradient`;
    the entry for ``tau`` is NaN when it is fixed at 0 for lack of
    non-neutral matches.
    """
    if ridge_eps < 0:
        raise ValueError("ridge_eps must be nonnegative")
    B = sum_zero_basis(t.k)
    A = _ridge_quadratic(t.k, ridge_eps) if ridge_eps > 0 else None
    bound = MU_BOUND if ridge_eps == 0 else None
    sol = _checked_fit(t, B, start, A, bound, max_iter)
    return _finish(sol, t, B, max_iter)


def constrained_mle(t: Tournament, grouping, start: ModelParams | None = None,
                    ridge_eps: float = 0.0) -> MleFit:
    """MLE with abilities tied within groups.

    ``grouping`` is either a :class:`rankinglasso.lasso.Grouping` or a
    per-team array of group labels.  ``ridge_eps`` works as in
    :func:`fit_mle`.
    """
    labels = getattr(grouping, "assignment", grouping)
    labels = np.asarray(labels)
    if len(labels) != t.k:
        raise ValueError("grouping must assign every team")
    if ridge_eps < 0:
        raise ValueError("ridge_eps must be nonnegative")
    B = grouping_basis(labels)
    A = _ridge_quadratic(t.k, ridge_eps) if ridge_eps > 0 else None
    bound = MU_BOUND if ridge_eps == 0 else None
    sol = _checked_fit(t, B, start, A, bound, MAX_ITER)
    return _finish(sol, t, B, MAX_ITER)


@dataclass
class AdaptiveWeights:
    """Pairwise penalty weights ``w[i, j]`` for ``i < j`` (symmetric matrix)."""

    matrix: np.ndarray

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    def pairs(self) -> np.ndarray:
        iu, ju = np.triu_indices(self.k, 1)
        return self.matrix[iu, ju]

    @classmethod
    def uniform(cls, k: int, value: float = 1.0) -> "AdaptiveWeights":
        w = np.full((k, k), float(value))
        np.fill_diagonal(w, 0.0)
        return cls(w)

    @classmethod
    def from_abilities(cls, mu, cap: float = WEIGHT_CAP) -> "AdaptiveWeights":
        mu = np.asarray(mu, dtype=float)
        diff = np.abs(mu[:, None] - mu[None, :])
        with np.errstate(divide="ignore"):
            w = np.minimum(1.0 / diff, cap)
        np.fill_diagonal(w, 0.0)
        return cls(w)


def adaptive_weights(t: Tournament, eps: float = ADAPTIVE_EPS,
                     fit: MleFit | None = None) -> AdaptiveWeights:
    """Weights ``1/|mu_i - mu_j|`` from the ridge-stabilized MLE, capped at 1e8."""
    if fit is None:
        fit = fit_mle(t, ridge_eps=eps)
    return AdaptiveWeights.from_abilities(fit.params.mu)
