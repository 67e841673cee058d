import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glance import tensor as T
from glance.errors import DimensionError, ValidationError
from glance.graph import make_graph
from glance.refine import AttentionParams, audit, prune, quantile_threshold, score_edges
from glance.tensor import Tensor


def naive_scores(x, edges, W):
    """Per-edge, per-head loop straight from the attention formula."""
    H = W.shape[0]
    out = []
    for i, j in edges:
        cat = np.concatenate([x[i], x[j]])
        out.append(sum(1.0 / (1.0 + math.exp(-float(W[h] @ cat))) for h in range(H)) / H)
    return np.array(out)


def random_graph(rng, n, m):
    n_labels = max(2, min(n, 3))
    labels = np.arange(n) % n_labels
    return make_graph(rng.integers(0, n, (m, 2)), rng.standard_normal((n, 3)), labels, n_labels)


class TestScoreEdges:
    def test_zero_weights_give_half(self, rng):
        x = Tensor(rng.standard_normal((4, 3)))
        s = score_edges(x, [(0, 1), (1, 3), (2, 3)], AttentionParams(Tensor(np.zeros((3, 6)))))
        assert np.array_equal(s.values, np.full((3, 1), 0.5))

    def test_single_head_zero_dot(self):
        x = np.zeros((2, 2))
        x[:, 1] = [4.0, -2.0]
        w = np.zeros((1, 4))
        w[0, 0] = 1.0
        s = score_edges(Tensor(x), [(0, 1)], AttentionParams(Tensor(w)))
        assert s.item() == 0.5

    def test_matches_naive_loop(self, rng):
        x = rng.standard_normal((6, 4))
        W = rng.standard_normal((2, 8))
        edges = [(0, 1), (0, 5), (2, 3), (3, 4), (1, 4)]
        s = score_edges(Tensor(x), edges, AttentionParams(Tensor(W)))
        np.testing.assert_allclose(s.values[:, 0], naive_scores(x, edges, W), rtol=1e-12)

    def test_width_mismatch(self, rng):
        with pytest.raises(DimensionError):
            score_edges(Tensor(np.ones((3, 3))), [(0, 1)], AttentionParams(Tensor(np.ones((2, 8)))))

    def test_scores_in_open_interval_and_differentiable(self, rng):
        x = Tensor(rng.standard_normal((5, 3)), requires_grad=True)
        w = Tensor(rng.standard_normal((4, 6)), requires_grad=True)
        s = score_edges(x, [(0, 1), (2, 4)], AttentionParams(w))
        assert np.all((s.values > 0) & (s.values < 1))
        T.sum(s).backward()
        assert x.grad is not None and w.grad is not None

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_permutation_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        n = 7
        x = rng.standard_normal((n, 3))
        W = rng.standard_normal((3, 6))
        edges = np.array([(0, 1), (1, 2), (2, 6), (3, 5), (4, 6)])
        perm = rng.permutation(n)  # old id -> new id
        x_new = np.empty_like(x)
        x_new[perm] = x
        before = score_edges(Tensor(x), edges, AttentionParams(Tensor(W))).values
        after = score_edges(Tensor(x_new), perm[edges], AttentionParams(Tensor(W))).values
        np.testing.assert_allclose(after, before, rtol=1e-12)


class TestQuantile:
    def test_nearest_rank_example(self):
        assert quantile_threshold([0.4, 0.1, 0.3, 0.2], 0.5) == 0.2

    def test_extremes(self, rng):
        s = rng.random(11)
        assert quantile_threshold(s, 0.0) == s.min()
        assert quantile_threshold(s, 1.0) == s.max()

    def test_empty(self):
        with pytest.raises(ValidationError):
            quantile_threshold([], 0.5)

    def test_float_noise_in_rank(self):
        # 0.3 * 10 is 3.0000000000000004; the rank must still be 3
        assert quantile_threshold(np.arange(10) / 10, 0.3) == 0.2


class TestPrune:
    def test_p_zero_keeps_everything(self, rng):
        g = random_graph(rng, 10, 25)
        r = prune(g, rng.random(g.num_edges), 0.0)
        assert len(r.kept_index) == g.num_edges

    def test_star_graph_protection(self, rng):
        g = make_graph([(0, i) for i in range(1, 9)], np.zeros((9, 1)), [0, 1, 2] * 3)
        r = prune(g, rng.random(8), 0.9)
        # each leaf's only edge is its own maximum
        assert len(r.kept_index) == 8

    def test_path_protection_trace(self):
        g = make_graph([(0, 1), (1, 2)], np.zeros((3, 1)), [0, 1, 0])
        r = prune(g, [0.9, 0.1], 0.5)
        assert r.kept_edges.tolist() == [[0, 1], [1, 2]]

    def test_out_of_range_p(self, rng):
        g = random_graph(rng, 5, 6)
        with pytest.raises(ValidationError):
            prune(g, rng.random(g.num_edges), 0.96)

    def test_misaligned_scores(self, rng):
        g = random_graph(rng, 5, 6)
        with pytest.raises(DimensionError):
            prune(g, np.ones(g.num_edges + 1), 0.2)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 100_000), st.floats(0.0, 0.95), st.floats(0.0, 0.95))
    def test_invariants(self, seed, p1, p2):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, int(rng.integers(3, 25)), int(rng.integers(1, 60)))
        if g.num_edges == 0:
            return
        s = rng.random(g.num_edges)
        lo, hi = sorted((p1, p2))
        r_lo, r_hi = prune(g, s, lo), prune(g, s, hi)
        original = {tuple(e) for e in g.edges.tolist()}
        assert {tuple(e) for e in r_hi.kept_edges.tolist()} <= original
        assert set(r_hi.kept_index.tolist()) <= set(r_lo.kept_index.tolist())
        # no originally connected node loses all its edges
        deg_before = np.bincount(g.edges.reshape(-1), minlength=g.num_nodes)
        deg_after = np.bincount(r_hi.kept_edges.reshape(-1), minlength=g.num_nodes)
        assert np.all(deg_after[deg_before > 0] >= 1)
        # unprotected removal fraction
        m = g.num_edges
        raw = prune(g, s, hi, protect=False)
        removed = 1 - len(raw.kept_index) / m
        assert hi - 1 / m - 1e-12 <= removed <= hi + 1 / m + 1e-12

    def test_audit_lists_every_edge(self, rng):
        g = random_graph(rng, 8, 12)
        s = rng.random(g.num_edges)
        r = prune(g, s, 0.5)
        rep = audit(g, s, r)
        assert len(rep["edges"]) == g.num_edges
        assert rep["num_kept"] == sum(e["kept"] for e in rep["edges"]) == len(r.kept_index)
