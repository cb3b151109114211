import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from misscausal import numcore as nc
from misscausal.critic import (
    RssCache,
    bic_score,
    compute_reward,
    exhaustive_best_graph,
    init_vnet,
    node_rss,
    score_from_rss,
    vnet_forward,
)
from misscausal.numcore import RngStream, acyclicity_value, least_squares

from helpers import check_grads, pinv_bic, random_dag, random_digraph

X_SMALL = np.column_stack([np.arange(4.0), 2 * np.arange(4.0)])


# -- value network -----------------------------------------------------------------
def test_vnet_zero_params(rng):
    p = init_vnet(8, rng, hidden=5)
    for t in p.tensors():
        t.data[...] = 0.0
    assert np.all(vnet_forward(rng.normal(size=(6, 8)), p).data == 0.0)


def test_vnet_shape(rng):
    p = init_vnet(8, rng, hidden=5)
    assert vnet_forward(np.zeros((7, 8)), p).shape == (7,)
    with pytest.raises(nc.ShapeError):
        vnet_forward(np.zeros((7, 9)), p)


def test_vnet_gradient_matches_fd(rng):
    p = init_vnet(4, rng, hidden=3)
    feat = rng.normal(size=(5, 4))
    w = rng.normal(size=5)

    def build(W1, b1, W2):
        p.W1, p.b1, p.W2 = W1, b1, W2
        return nc.sum_(vnet_forward(feat, p) * w)

    # shift b1 away from the relu kink
    assert check_grads(build, [p.W1.data.copy(), p.b1.data + 0.3, p.W2.data.copy()]) < 1e-4


# -- score ------------------------------------------------------------------------------
def test_score_hand_example():
    S, rss = bic_score(np.array([[0, 1], [0, 0]]), X_SMALL)
    assert rss[0] == pytest.approx(5.0)
    assert rss[1] == pytest.approx(0.0, abs=1e-20)
    assert S == pytest.approx(8 * math.log(5 / 8) + math.log(4), abs=1e-9)
    assert round(S, 4) == -2.3737


def test_score_empty_graph_example():
    S, rss = bic_score(np.zeros((2, 2), dtype=int), X_SMALL)
    _, r2 = least_squares(X_SMALL[:, 1], np.ones((4, 1)))
    assert r2 == pytest.approx(20.0)
    assert S == pytest.approx(8 * math.log((5 + r2) / 8), abs=1e-12)


def test_score_floor_on_zero_rss():
    X = np.column_stack([np.zeros(5), np.zeros(5)])
    S, _ = bic_score(np.zeros((2, 2), dtype=int), X)
    assert math.isfinite(S)
    assert S == pytest.approx(10 * math.log(1e-12 / 10))


def test_score_input_errors():
    with pytest.raises(ValueError, match="binary"):
        bic_score(np.array([[0, 2], [0, 0]]), X_SMALL)
    with pytest.raises(ValueError, match="diagonal"):
        bic_score(np.eye(2, dtype=int), X_SMALL)
    with pytest.raises(ValueError):
        bic_score(np.zeros((3, 3), dtype=int), X_SMALL)
    with pytest.raises(ValueError, match="basis"):
        bic_score(np.zeros((2, 2), dtype=int), X_SMALL, basis="cubic")


def test_score_matches_pinv_oracle():
    g = np.random.default_rng(10)
    for _ in range(200):
        d = int(g.integers(2, 7))
        X = g.normal(size=(int(g.integers(d + 3, 40)), d))
        A = random_digraph(g, d)
        S, _ = bic_score(A, X)
        assert abs(S - pinv_bic(A, X)) <= 1e-8 * max(1.0, abs(S))


def test_quadratic_basis_squares_parents():
    g = np.random.default_rng(11)
    x = g.normal(size=200)
    X = np.column_stack([x, x * x + 0.01 * g.normal(size=200)])
    A = np.array([[0, 1], [0, 0]])
    rss_lin = bic_score(A, X)[1][1]
    rss_quad = bic_score(A, X, basis="quadratic")[1][1]
    assert rss_quad < 0.01 * rss_lin
    D = np.column_stack([np.ones(200), x * x])
    assert node_rss(X, 1, [0], "quadratic") == pytest.approx(least_squares(X[:, 1], D)[1])


def test_cache_transparency():
    g = np.random.default_rng(12)
    cache = RssCache()
    batches = [g.normal(size=(30, 5)) for _ in range(4)]
    for t in range(1000):
        X = batches[t // 250]
        A = random_digraph(g, 5)
        warm, warm_rss = bic_score(A, X, cache)
        cold, cold_rss = bic_score(A, X)
        assert abs(warm - cold) <= 1e-10 * max(1.0, abs(cold))
        np.testing.assert_allclose(warm_rss, cold_rss, rtol=0, atol=1e-10)
    assert cache.hits > 0 and cache.misses > 0


def test_cache_invalidated_by_content_change():
    X = np.random.default_rng(13).normal(size=(20, 3))
    A = np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]])
    cache = RssCache()
    bic_score(A, X, cache)
    assert len(cache) == 3
    X[0, 0] += 1.0
    assert bic_score(A, X, cache)[0] == pytest.approx(bic_score(A, X)[0], abs=1e-12)
    assert cache.misses == 6


def test_cache_read_only_rebind_skips_hash(monkeypatch):
    X = np.random.default_rng(14).normal(size=(20, 3))
    X.flags.writeable = False
    cache = RssCache()
    cache.bind(X)
    calls = []
    monkeypatch.setattr(RssCache, "fingerprint", staticmethod(lambda *a: calls.append(1) or "k"))
    cache.bind(X)
    assert calls == []
    cache.bind(X.copy())
    assert calls == [1]


def test_decomposability():
    g = np.random.default_rng(15)
    for _ in range(100):
        d = int(g.integers(3, 7))
        X = g.normal(size=(40, d))
        A = random_dag(g, d)
        zeros = [(i, j) for i in range(d) for j in range(d) if i != j and not A[i, j]]
        if not zeros:
            continue
        i, j = zeros[g.integers(len(zeros))]
        B = A.copy()
        B[i, j] = 1
        _, ra = bic_score(A, X)
        _, rb = bic_score(B, X)
        for node in range(d):
            if node != j:
                assert ra[node] == rb[node]


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 6), st.integers(5, 500), st.floats(1e-3, 1e3), st.integers(0, 20))
def test_edge_penalty_is_log_n(d, n, rss, edges):
    step = score_from_rss(rss, n, d, edges + 1) - score_from_rss(rss, n, d, edges)
    assert step == pytest.approx(math.log(n), rel=1e-9)
    assert step > 0


# -- reward --------------------------------------------------------------------------------
def test_reward_on_dag_is_minus_score():
    A = np.array([[0, 1], [0, 0]])
    r = compute_reward(A, X_SMALL, 5.0, 7.0)
    assert r.reward == -r.score
    assert r.is_dag and r.h == 0.0 and r.edge_count == 1


def test_reward_two_cycle():
    A = np.array([[0, 1], [1, 0]])
    r = compute_reward(A, X_SMALL, 1.0, 1.0)
    S, _ = bic_score(A, X_SMALL)
    assert not r.is_dag
    assert r.h == pytest.approx(1.08616, abs=1e-5)
    assert r.reward == pytest.approx(-(S + 1.0 + r.h), abs=1e-12)
    assert r.as_dict()["edge_count"] == 2


def test_lambda1_monotonicity():
    g = np.random.default_rng(16)
    X = g.normal(size=(30, 4))
    for _ in range(50):
        A = random_digraph(g, 4, p=0.5)
        lo = compute_reward(A, X, 1.0, 0.5)
        hi = compute_reward(A, X, 3.0, 0.5)
        assert lo.is_dag == (acyclicity_value(A) == 0.0)
        if lo.is_dag:
            assert hi.reward == lo.reward
        else:
            assert hi.reward < lo.reward


# -- exhaustive oracle --------------------------------------------------------------------------
def test_exhaustive_empty_data():
    X = RngStream(0, "indep").normal(size=(5000, 3))
    A, S = exhaustive_best_graph(X)
    assert A.sum() == 0
    assert S == pytest.approx(bic_score(A, X)[0])


def test_exhaustive_chain_find_edge():
    rng = RngStream(1, "chain")
    x1 = rng.normal(size=2000)
    X = np.column_stack([x1, 2.0 * x1 + rng.normal(size=2000)])
    A, _ = exhaustive_best_graph(X)
    assert A[0, 1] + A[1, 0] == 1


def test_exhaustive_constant_columns():
    A, _ = exhaustive_best_graph(np.ones((10, 2)))
    assert A.sum() == 0


def test_exhaustive_is_minimal_over_dags():
    g = np.random.default_rng(17)
    X = g.normal(size=(50, 3))
    X[:, 2] += X[:, 0]
    A, S = exhaustive_best_graph(X)
    assert acyclicity_value(A) == 0.0
    for _ in range(200):
        B = random_dag(g, 3, p=0.5)
        assert bic_score(B, X)[0] >= S - 1e-9


def test_exhaustive_rejects_large_d():
    with pytest.raises(ValueError, match="d=5"):
        exhaustive_best_graph(np.zeros((10, 5)))
