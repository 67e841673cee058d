import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glance.errors import ParseError, UndefinedStatisticError, ValidationError
from glance.graph import (
    Graph, augment_features, convert_geom_gcn, degree, degree_augmented, edge_homophily,
    graph_stats, load_dataset, load_splits, make_graph, make_splits, save_dataset, save_splits,
)


def random_graph(rng, n=30, m=60, d=4, c=3):
    labels = np.concatenate([np.arange(c), rng.integers(0, c, n - c)])
    return make_graph(rng.integers(0, n, (m, 2)), rng.standard_normal((n, d)), labels, c)


class TestLoad:
    def test_toy3_round_trip(self, toy3_dir):
        g = load_dataset(toy3_dir)
        assert g.num_nodes == 3 and g.num_classes == 2
        assert g.edges.tolist() == [[0, 1], [1, 2]]
        assert g.features.tolist() == [[1, 0], [0, 1], [1, 1]]
        assert g.labels.tolist() == [0, 1, 0]

    def test_save_load_identity(self, toy6_dir, tmp_path):
        g = load_dataset(toy6_dir)
        save_dataset(g, tmp_path)
        h = load_dataset(tmp_path)
        assert np.array_equal(g.edges, h.edges)
        assert np.array_equal(g.features, h.features)
        assert np.array_equal(g.labels, h.labels)
        assert (tmp_path / "nodes.tsv").read_bytes() == (toy6_dir / "nodes.tsv").read_bytes()

    def test_reversed_duplicates_and_self_loops_merged(self, tmp_path, caplog):
        (tmp_path / "nodes.tsv").write_text("0\t0\t1\n1\t1\t2\n2\t0\t3\n")
        (tmp_path / "edges.tsv").write_text("0\t1\n1\t0\n2\t2\n1\t2\n2\t1\n")
        with caplog.at_level("WARNING"):
            g = load_dataset(tmp_path)
        assert g.edges.tolist() == [[0, 1], [1, 2]]
        assert "1 self-loop" in caplog.text

    def test_malformed_line_reports_line_number(self, tmp_path):
        (tmp_path / "nodes.tsv").write_text("0\t0\t1,2\n1\t1\tnot-a-number\n")
        (tmp_path / "edges.tsv").write_text("")
        with pytest.raises(ParseError) as info:
            load_dataset(tmp_path)
        assert info.value.line_no == 2
        assert ":2:" in str(info.value)

    def test_dangling_endpoint(self, tmp_path):
        (tmp_path / "nodes.tsv").write_text("0\t0\t1\n1\t1\t2\n")
        (tmp_path / "edges.tsv").write_text("0\t5\n")
        with pytest.raises(ValidationError, match="dangling"):
            load_dataset(tmp_path)

    def test_empty_class(self, tmp_path):
        (tmp_path / "nodes.tsv").write_text("0\t0\t1\n1\t2\t2\n")
        (tmp_path / "edges.tsv").write_text("0\t1\n")
        with pytest.raises(ValidationError, match="classes with no nodes"):
            load_dataset(tmp_path)

    def test_trailing_blank_lines_tolerated(self, tmp_path):
        (tmp_path / "nodes.tsv").write_text("0\t0\t1\n1\t1\t2\n\n")
        (tmp_path / "edges.tsv").write_text("0\t1\n\n")
        assert load_dataset(tmp_path).num_edges == 1

    def test_missing_directory(self, tmp_path):
        with pytest.raises(ValidationError, match="missing file"):
            load_dataset(tmp_path / "nope")

    def test_geom_gcn_converter(self, tmp_path):
        src = tmp_path / "raw"
        src.mkdir()
        (src / "out1_node_feature_label.txt").write_text(
            "node_id\tfeature\tlabel\n0\t1,0,0\t0\n1\t0,1,0\t1\n2\t0,0,1\t0\n")
        (src / "out1_graph_edges.txt").write_text("node_id\tnode_id\n0\t1\n1\t0\n2\t2\n1\t2\n")
        g = convert_geom_gcn(src, tmp_path / "out")
        h = load_dataset(tmp_path / "out")
        assert g.edges.tolist() == h.edges.tolist() == [[0, 1], [1, 2]]
        assert h.num_features == 3 and h.num_classes == 2


class TestDegreeAndAugmentation:
    def test_isolated_and_triangle(self):
        g = make_graph([(0, 1), (1, 2), (0, 2)], np.zeros((4, 1)), [0, 1, 0, 1])
        assert degree(g, 3) == 0
        assert [degree(g, i) for i in range(3)] == [2, 2, 2]
        with pytest.raises(ValidationError):
            degree(g, 4)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_handshake(self, seed):
        g = random_graph(np.random.default_rng(seed))
        # oracle: count endpoint occurrences directly in the edge list
        counts = np.bincount(g.edges.reshape(-1), minlength=g.num_nodes)
        assert [degree(g, i) for i in range(g.num_nodes)] == counts.tolist()
        assert sum(degree(g, i) for i in range(g.num_nodes)) == 2 * g.num_edges

    def test_pre_standardization_row(self):
        g = make_graph([(0, 1), (0, 2), (0, 3)], [[1, 2], [0, 0], [0, 0], [0, 0]], [0, 1, 0, 1])
        assert degree_augmented(g)[0].tolist() == [1, 2, 3]

    def test_standardized_columns(self, rng):
        g = random_graph(rng)
        x = augment_features(g).values
        assert x.shape == (g.num_nodes, g.num_features + 1)
        np.testing.assert_allclose(x.mean(axis=0), 0, atol=1e-9)
        var = x.var(axis=0)
        assert np.all((np.abs(var - 1) <= 1e-6) | (var == 0))

    def test_constant_degree_column_zeroed(self):
        # a 4-cycle: every degree is 2
        g = make_graph([(0, 1), (1, 2), (2, 3), (3, 0)], [[1.0], [2.0], [3.0], [5.0]], [0, 1, 0, 1])
        x = augment_features(g).values
        assert np.array_equal(x[:, -1], np.zeros(4))


class TestHomophily:
    def test_all_same_label(self):
        g = make_graph([(0, 1), (2, 3)], np.zeros((4, 1)), [0, 0, 1, 1])
        assert edge_homophily(g) == 1.0

    def test_no_edges(self):
        g = make_graph(np.zeros((0, 2)), np.zeros((2, 1)), [0, 1])
        with pytest.raises(UndefinedStatisticError):
            edge_homophily(g)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.permutations(range(3)))
    def test_label_permutation_invariance(self, seed, perm):
        g = random_graph(np.random.default_rng(seed))
        relabeled = Graph(g.num_nodes, g.edges, g.features, np.asarray(perm)[g.labels], 3)
        h = edge_homophily(g)
        assert 0.0 <= h <= 1.0
        assert edge_homophily(relabeled) == h

    def test_stats_on_fixture(self, toy6_dir):
        s = graph_stats(load_dataset(toy6_dir))
        # 7 edges, one (0-1) joins equal labels
        assert s == {"nodes": 6, "edges": 7, "avg_degree": 14 / 6, "features": 3, "classes": 2,
                     "edge_homophily": 1 / 7}


class TestSplits:
    def test_deterministic(self, rng):
        g = random_graph(rng, n=60)
        assert make_splits(g, seed=3) == make_splits(g, seed=3)
        assert make_splits(g, seed=3) != make_splits(g, seed=4)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(0, 100))
    def test_partition_and_stratification(self, graph_seed, split_seed):
        rng = np.random.default_rng(graph_seed)
        g = random_graph(rng, n=183, m=300, c=5)
        if np.bincount(g.labels).min() < 3:
            return
        s = make_splits(g, (0.48, 0.32, 0.20), split_seed)
        all_nodes = list(s.train) + list(s.val) + list(s.test)
        assert sorted(all_nodes) == list(range(183))
        train = set(s.train)
        for c in range(5):
            members = np.flatnonzero(g.labels == c)
            in_train = sum(int(i) in train for i in members)
            assert in_train >= 1
            assert abs(in_train - 0.48 * len(members)) <= 1

    def test_small_class_rejected(self):
        g = make_graph([(0, 1)], np.zeros((5, 1)), [0, 0, 0, 1, 1])
        with pytest.raises(ValidationError, match="class 1"):
            make_splits(g)

    def test_bad_fractions(self, rng):
        g = random_graph(rng)
        with pytest.raises(ValidationError):
            make_splits(g, (0.5, 0.5, 0.1))

    def test_splits_json_round_trip(self, rng, tmp_path):
        g = random_graph(rng, n=40)
        s = make_splits(g, seed=9)
        save_splits(s, tmp_path / "splits.json")
        raw = json.loads((tmp_path / "splits.json").read_text())
        assert set(raw) == {"train", "val", "test", "seed"}
        assert load_splits(tmp_path / "splits.json", g.num_nodes) == s
