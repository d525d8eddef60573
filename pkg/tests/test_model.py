import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rankinglasso.model import (ModelParams, Outcome, Tournament, category_probabilities,
                                gradient, hessian, match_terms, neg_log_likelihood,
                                outcome_probabilities, probability_matrix)

from conftest import random_tournament


def nll_by_loop(params, t):
    """Sum of -log P(outcome) computed one match at a time."""
    total = 0.0
    for a, b, h, y in t.records():
        p_i, p_tie, p_j = outcome_probabilities(params, a, b, h)
        total -= math.log({Outcome.WIN_I: p_i, Outcome.TIE: p_tie, Outcome.WIN_J: p_j}[y])
    return total


def finite_difference(fun, x, step=1e-6):
    g = np.zeros_like(x)
    for a in range(len(x)):
        e = np.zeros_like(x)
        e[a] = step
        g[a] = (fun(x + e) - fun(x - e)) / (2 * step)
    return g


# ---------------------------------------------------------------- tournament

def test_tournament_rejects_bad_input():
    with pytest.raises(ValueError):
        Tournament(("a", "b"), [], [], [], [])
    with pytest.raises(ValueError):
        Tournament(("a", "b"), [0], [0], [0], [2])
    with pytest.raises(ValueError):
        Tournament(("a", "b"), [0], [2], [0], [2])
    with pytest.raises(ValueError):
        Tournament(("a", "a"), [0], [1], [0], [2])
    with pytest.raises(ValueError):
        Tournament(("a", "b"), [0], [1], [2], [2])
    with pytest.raises(ValueError, match="TIE"):
        Tournament(("a", "b"), [0], [1], [0], [1])
    Tournament(("a", "b"), [0], [1], [0], [1], ties_allowed=True)


def test_record_and_helpers():
    t = Tournament.from_records(("a", "b", "c"), [(0, 1, 1, 2), (1, 2, 0, 1), (2, 0, -1, 0)],
                                ties_allowed=True)
    assert t.k == 3 and t.n == 3
    np.testing.assert_array_equal(t.record(), [[2, 0, 0], [0, 1, 1], [0, 1, 1]])
    assert t.index("c") == 2
    assert t.matches[1].outcome is Outcome.TIE
    sub, keep = t.subset([0]).compact()
    assert sub.teams == ("a", "b") and list(keep) == [0, 1]
    assert t.design.shape == (3, 4)
    np.testing.assert_array_equal(t.design[2], [-1, 0, 1, -1])


def test_tournament_is_immutable():
    t, _ = random_tournament(0)
    with pytest.raises(ValueError):
        t.i[0] = 3


def test_params_recentred_and_validated():
    p = ModelParams([1.0, 2.0, 3.0], 0.5)
    np.testing.assert_allclose(p.mu, [-1, 0, 1])
    with pytest.raises(ValueError):
        ModelParams([0.0, 0.0], 0.0, -0.1)
    q = ModelParams.from_vector(ModelParams([1.0, -1.0], 0.2, 0.3).vector(), ties=True)
    assert q.delta1 == 0.3 and q.tau == 0.2


# ---------------------------------------------------------------- likelihood

@pytest.mark.parametrize("ties", [False, True])
def test_nll_matches_per_match_product(ties):
    t, p = random_tournament(3, k=6, ties=ties)
    assert neg_log_likelihood(p, t) == pytest.approx(nll_by_loop(p, t), rel=1e-12)


def test_nll_rejects_mismatched_params(ties_tournament):
    with pytest.raises(ValueError):
        neg_log_likelihood(ModelParams(np.zeros(ties_tournament.k)), ties_tournament)
    with pytest.raises(ValueError):
        neg_log_likelihood(ModelParams(np.zeros(3), 0.0, 0.2), ties_tournament)


def test_gradient_matches_finite_differences_on_fifty_instances():
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 7))
        ties = bool(seed % 2)
        t, p = random_tournament(100 + seed, k=k, ties=ties, require_mle=False)
        x = p.vector()
        g = gradient(p, t)
        fd = finite_difference(lambda z: neg_log_likelihood(ModelParams.from_vector(z, ties), t), x)
        worst = max(worst, np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(fd))))
    assert worst <= 1e-4


@pytest.mark.parametrize("ties", [False, True])
def test_hessian_matches_finite_differences(ties):
    t, p = random_tournament(7, k=5, ties=ties)
    H = hessian(p, t)
    x = p.vector()
    num = np.column_stack([
        finite_difference(lambda z: gradient(ModelParams.from_vector(z, ties), t)[c], x)
        for c in range(len(x))])
    np.testing.assert_allclose(H, num, atol=1e-5)


@given(eta=st.floats(-30, 30), delta=st.floats(1e-3, 5), y=st.sampled_from([0, 1, 2]))
@settings(max_examples=200, deadline=None)
def test_match_terms_derivatives(eta, delta, y):
    yy = np.array([y])
    f, (fe, fd), (fee, fed, fdd) = match_terms(np.array([eta]), delta, yy, order=2)
    h = 1e-5 * min(1.0, delta)  # the tie term curves like log(delta)
    num_e = (match_terms(np.array([eta + h]), delta, yy)[0]
             - match_terms(np.array([eta - h]), delta, yy)[0]) / (2 * h)
    num_d = (match_terms(np.array([eta]), delta + h, yy)[0]
             - match_terms(np.array([eta]), delta - h, yy)[0]) / (2 * h)
    assert np.isfinite(f[0])
    assert fe[0] == pytest.approx(num_e, rel=1e-5, abs=1e-5)
    assert fd[0] == pytest.approx(num_d, rel=1e-5, abs=1e-5)
    # log-concave categories; for ties f_eta_eta is a sum of terms of size
    # about 1/delta^2 that cancel, so allow roundoff on that scale
    assert fee[0] >= -1e-12 * max(1.0, 1.0 / delta**2)


def test_tie_probability_is_stable_far_in_the_tails():
    f = match_terms(np.array([-800.0, 800.0, 0.0]), 1e-12, np.array([1, 1, 1]))
    assert np.all(np.isfinite(f))
    assert f[2] == pytest.approx(-math.log(math.tanh(0.5e-12)), rel=1e-6)


# ---------------------------------------------------------------- probabilities

def test_binary_probabilities():
    p = ModelParams([0.4, -0.4], 0.3)
    p_i, p_tie, p_j = outcome_probabilities(p, 0, 1, 1)
    assert p_tie == 0.0
    assert p_i == pytest.approx(1 / (1 + math.exp(-1.1)))
    assert p_i + p_j == pytest.approx(1.0)
    with pytest.raises(ValueError):
        outcome_probabilities(p, 0, 1, 2)


def test_ties_model_collapses_to_binary_at_zero_cutpoint():
    t, p = random_tournament(5, k=4, ties=False)
    tt = Tournament(t.teams, t.i, t.j, t.venue, t.outcome, ties_allowed=True)
    pt = ModelParams(p.mu, p.tau, 0.0)
    np.testing.assert_allclose(category_probabilities(pt, tt), category_probabilities(p, t),
                               atol=1e-15)
    assert neg_log_likelihood(pt, tt) == pytest.approx(neg_log_likelihood(p, t), rel=1e-14)
    # the binary fast path agrees with the general three-category formulas
    g_fast = gradient(pt, tt)
    g_general = gradient(ModelParams(p.mu, p.tau, 1e-300), tt)
    np.testing.assert_allclose(g_fast, g_general, atol=1e-12)
    np.testing.assert_allclose(hessian(pt, tt), hessian(ModelParams(p.mu, p.tau, 1e-300), tt),
                               atol=1e-12)


def test_category_probabilities_sum_to_one(ties_tournament):
    p = ModelParams(np.linspace(-2, 2, ties_tournament.k), 0.4, 0.3)
    probs = category_probabilities(p, ties_tournament)
    assert np.all(probs >= 0)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)


def test_probability_matrix():
    p = ModelParams([1.0, 0.0, -1.0], 0.5)
    P = probability_matrix(p)
    np.testing.assert_allclose(P + P.T, 1.0)
    np.testing.assert_allclose(np.diag(P), 0.5)
    assert P[0, 2] == pytest.approx(1 / (1 + math.exp(-2)))
    Pt = probability_matrix(ModelParams([1.0, 0.0, -1.0], 0.5, 0.3))
    assert np.all(Pt + Pt.T < 1)  # room left for ties
