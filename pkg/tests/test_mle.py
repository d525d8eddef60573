import itertools
import warnings

import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.special import logit

from rankinglasso.mle import (AdaptiveWeights, DivergenceError, adaptive_weights,
                              constrained_mle, fit_mle, grouping_basis, separated,
                              sum_zero_basis)
from rankinglasso.model import ModelParams, Tournament, gradient, neg_log_likelihood

from conftest import random_tournament


def test_bases_are_orthonormal_and_sum_zero():
    B = sum_zero_basis(6)
    np.testing.assert_allclose(B.T @ B, np.eye(5), atol=1e-12)
    np.testing.assert_allclose(B.sum(axis=0), 0, atol=1e-12)
    G = grouping_basis([0, 0, 1, 2, 2, 1])
    assert G.shape == (6, 2)
    np.testing.assert_allclose(G.T @ G, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(G[0], G[1])
    np.testing.assert_allclose(G.sum(axis=0), 0, atol=1e-12)
    assert grouping_basis([3, 3, 3]).shape == (3, 0)


@pytest.mark.parametrize("ties", [False, True])
def test_score_vanishes_at_mle(ties):
    t, _ = random_tournament(21, k=6, ties=ties)
    fit = fit_mle(t)
    assert fit.converged
    g = gradient(fit.params, t)
    assert np.max(np.abs(g)) < 1e-6
    assert abs(fit.mu.sum()) < 1e-12


def test_matches_logistic_regression_oracle():
    sm = pytest.importorskip("statsmodels.api")
    t, _ = random_tournament(4, k=6, n=80)
    X = t.design
    k = t.k
    # sum contrast: mu_k = -(mu_1 + ... + mu_{k-1})
    Z = np.column_stack([X[:, :k - 1] - X[:, [k - 1]], X[:, k]])
    res = sm.Logit((t.outcome == 2).astype(float), Z).fit(disp=0, tol=1e-12)
    fit = fit_mle(t)
    mu = np.append(res.params[:k - 1], -res.params[:k - 1].sum())
    np.testing.assert_allclose(fit.mu, mu, atol=1e-6)
    assert fit.params.tau == pytest.approx(res.params[-1], abs=1e-6)
    assert fit.se[k] == pytest.approx(res.bse[-1], rel=1e-5)
    np.testing.assert_allclose(fit.se[:k - 1], res.bse[:k - 1], rtol=1e-5)


def test_tau_fixed_without_home_matches():
    t, _ = random_tournament(8, k=5, neutral=1.0)
    fit = fit_mle(t)
    assert fit.tau_fixed and fit.params.tau == 0.0 and np.isnan(fit.se[t.k])


def _penalized_grid_oracle(t, eps):
    """Nelder-Mead on (z, tau) in a fixed sum-zero basis from several starts."""
    B = sum_zero_basis(t.k)

    def f(x):
        mu = B @ x[:-1]
        pen = eps * sum((mu[a] - mu[b]) ** 2 for a, b in itertools.combinations(range(t.k), 2))
        return neg_log_likelihood(ModelParams(mu, x[-1]), t) + pen

    best = None
    for start in itertools.product([-1.0, 1.0], repeat=t.k):
        r = minimize(f, np.array(start), method="Nelder-Mead",
                     options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
        if best is None or r.fun < best.fun:
            best = r
    return B @ best.x[:-1], best.x[-1], best.fun


def test_three_team_ridge_fit_agrees_with_derivative_free_search():
    t = Tournament.from_records(("a", "b", "c"), [
        (0, 1, 1, 2), (0, 1, -1, 2), (1, 2, 1, 2), (2, 0, 1, 2), (1, 0, 1, 2),
        (2, 1, 1, 0), (0, 2, -1, 2), (1, 2, 0, 0)])
    assert not separated(t)
    for eps in (0.0, 0.05, 1.0):
        fit = fit_mle(t, ridge_eps=eps)
        mu, tau, _ = _penalized_grid_oracle(t, eps)
        np.testing.assert_allclose(fit.mu, mu, atol=1e-4)
        assert fit.params.tau == pytest.approx(tau, abs=1e-4)


def test_one_group_fit_is_intercept_only():
    # only tau is free: P(home win) = logistic(tau), closed form
    t, _ = random_tournament(9, k=5, neutral=0.0)
    fit = constrained_mle(t, np.zeros(t.k, dtype=int))
    home_won = np.where(t.venue == 1, t.outcome == 2, t.outcome == 0)
    assert fit.params.tau == pytest.approx(logit(home_won.mean()), abs=1e-8)
    np.testing.assert_allclose(fit.mu, 0.0)
    np.testing.assert_allclose(fit.se[:t.k], 0.0)


def test_one_group_ties_fit_closed_form(ties_tournament):
    t = ties_tournament
    home = t.venue != 0
    # orient every non-neutral match from the home side
    sub = t.subset(np.flatnonzero(home))
    flip = sub.venue == -1
    y = np.where(flip, 2 - sub.outcome, sub.outcome)
    t2 = Tournament(sub.teams, np.where(flip, sub.j, sub.i), np.where(flip, sub.i, sub.j),
                    np.ones(sub.n, dtype=int), y, True)
    fit = constrained_mle(t2, np.zeros(t2.k, dtype=int))
    p_win, p_loss = np.mean(y == 2), np.mean(y == 0)
    # logistic(tau - d) = p_win, logistic(-d - tau) = p_loss
    tau = (logit(p_win) - logit(p_loss)) / 2
    d = -(logit(p_win) + logit(p_loss)) / 2
    assert fit.params.tau == pytest.approx(tau, abs=1e-7)
    assert fit.params.delta1 == pytest.approx(d, abs=1e-7)


def test_constrained_fit_respects_groups(nfl):
    labels = np.arange(nfl.k) % 4
    fit = constrained_mle(nfl, labels)
    for g in range(4):
        vals = fit.mu[labels == g]
        np.testing.assert_allclose(vals, vals[0], atol=1e-12)
    # refit over fewer parameters cannot beat the full MLE
    assert fit.neg_loglik >= fit_mle(nfl).neg_loglik - 1e-9
    with pytest.raises(ValueError):
        constrained_mle(nfl, [0, 1])


def test_separation_is_detected():
    # team c loses everything
    t = Tournament.from_records(("a", "b", "c"), [
        (0, 1, 1, 2), (1, 0, 1, 2), (0, 2, 0, 2), (1, 2, 1, 2), (2, 0, 1, 0)])
    assert separated(t)
    with pytest.raises(DivergenceError):
        fit_mle(t)
    ridge = fit_mle(t, ridge_eps=1e-4)
    assert np.all(np.isfinite(ridge.mu)) and ridge.mu[2] == ridge.mu.min()
    # groups {a, b} vs {c}: still separated, but one group is fine
    assert separated(t, grouping_basis([0, 0, 1]))
    assert not separated(t, grouping_basis([0, 0, 0]))


def test_no_separation_for_connected_results():
    t, _ = random_tournament(2, k=6)
    assert not separated(t)
    tt, _ = random_tournament(2, k=6, ties=True)
    assert not separated(tt)


def test_tie_against_everyone_is_not_separation():
    t = Tournament.from_records(("a", "b", "c"), [
        (0, 1, 0, 2), (1, 0, 0, 2), (0, 2, 0, 1), (1, 2, 0, 1)], ties_allowed=True)
    assert not separated(t)


def test_adaptive_weights():
    w = AdaptiveWeights.from_abilities([1.0, 1.0, -0.5, -1.5])
    assert w.matrix[0, 1] == 1e8
    assert w.matrix[0, 2] == pytest.approx(1 / 1.5)
    np.testing.assert_allclose(w.matrix, w.matrix.T)
    assert np.all(np.diag(w.matrix) == 0)
    assert len(w.pairs()) == 6
    assert np.all(AdaptiveWeights.uniform(4).pairs() == 1)


def test_adaptive_weights_survive_separation():
    t = Tournament.from_records(("a", "b", "c"), [(0, 1, 0, 2), (0, 2, 0, 2), (1, 2, 0, 2)])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        w = adaptive_weights(t)
    assert np.all(np.isfinite(w.pairs())) and np.all(w.pairs() > 0)


def test_mle_is_permutation_equivariant():
    t, _ = random_tournament(12, k=6)
    perm = np.random.default_rng(0).permutation(t.k)
    a, b = fit_mle(t), fit_mle(t.relabel(perm))
    np.testing.assert_allclose(b.mu[perm], a.mu, atol=1e-9)
    np.testing.assert_allclose(b.se[:t.k][perm], a.se[:t.k], atol=1e-9)


def test_mle_invariant_to_listing_order():
    # swapping i and j flips venue and outcome but describes the same match
    t, _ = random_tournament(13, k=5, ties=True)
    flipped = Tournament(t.teams, t.j, t.i, -t.venue, 2 - t.outcome, True)
    a, b = fit_mle(t), fit_mle(flipped)
    np.testing.assert_allclose(a.mu, b.mu, atol=1e-9)
    assert a.params.tau == pytest.approx(b.params.tau, abs=1e-9)
    assert a.params.delta1 == pytest.approx(b.params.delta1, abs=1e-9)


def test_ties_fit_returns_cutpoint(ties_tournament):
    fit = fit_mle(ties_tournament)
    assert fit.params.delta1 > 0 and np.isfinite(fit.se[-1])


def test_ties_fit_without_any_tie_sits_on_the_bound():
    t, _ = random_tournament(14, k=5)
    tt = Tournament(t.teams, t.i, t.j, t.venue, t.outcome, ties_allowed=True)
    fit = fit_mle(tt)
    assert fit.params.delta1 == 0.0 and np.isnan(fit.se[-1])
    np.testing.assert_allclose(fit.mu, fit_mle(t).mu, atol=1e-7)
