"""Graph container, dataset files, degree augmentation, splits and statistics.

On-disk layout of a dataset directory::

    nodes.tsv   node_id<TAB>label<TAB>f_0,f_1,...,f_{d-1}
    edges.tsv   src<TAB>dst
    splits.json {"train": [...], "val": [...], "test": [...], "seed": int}   (optional)

Node ids are dense integers starting at 0.  Edges are read as undirected:
reversed duplicates are merged and self-loops dropped.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, UndefinedStatisticError, ValidationError
from .tensor import Tensor

log = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.48, 0.32, 0.20)


@dataclass(frozen=True, eq=False)
class Graph:
    num_nodes: int
    edges: np.ndarray  # (m, 2) int, rows (i, j) with i < j, sorted
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int
    num_classes: int

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        for arr in (edges, features, labels):
            arr.flags.writeable = False
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        self.validate()

    def validate(self) -> None:
        n = self.num_nodes
        if n < 1:
            raise ValidationError("graph must have at least one node")
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValidationError(
                f"feature matrix has shape {self.features.shape}, expected {n} rows"
            )
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("feature matrix contains non-finite values")
        if self.labels.shape != (n,):
            raise ValidationError(f"expected {n} labels, got {self.labels.size}")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ValidationError(f"labels must lie in [0, {self.num_classes})")
        missing = sorted(set(range(self.num_classes)) - set(self.labels.tolist()))
        if missing:
            raise ValidationError(f"classes with no nodes: {missing}")
        if len(self.edges):
            e = self.edges
            if e.min() < 0 or e.max() >= n:
                raise ValidationError(f"edge endpoint outside [0, {n})")
            if np.any(e[:, 0] >= e[:, 1]):
                raise ValidationError("edges must be canonical (i < j) with no self-loops")
            if len(np.unique(e, axis=0)) != len(e):
                raise ValidationError("duplicate edges")

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        a[self.edges[:, 0], self.edges[:, 1]] = 1.0
        a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a


def canonical_edges(pairs, num_nodes: int | None = None) -> tuple[np.ndarray, int]:
    """Symmetrize and deduplicate an edge list.

    Returns the sorted (i < j) edge array and the number of self-loops dropped.
    """
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if num_nodes is not None and len(arr) and (arr.min() < 0 or arr.max() >= num_nodes):
        raise ValidationError(f"edge endpoint outside [0, {num_nodes})")
    loops = arr[:, 0] == arr[:, 1]
    arr = np.sort(arr[~loops], axis=1)
    if len(arr):
        arr = np.unique(arr, axis=0)
    return arr.reshape(-1, 2), int(loops.sum())


def make_graph(edges, features, labels, num_classes: int | None = None) -> Graph:
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = features.shape[0]
    canon, loops = canonical_edges(edges, n)
    if loops:
        log.warning("dropped %d self-loop(s)", loops)
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    return Graph(n, canon, features, labels, int(num_classes))


# -- files ------------------------------------------------------------------

def _read_lines(path: Path):
    if not path.is_file():
        raise ValidationError(f"missing file: {path}")
    with path.open("r", encoding="utf-8", newline="") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if line.strip() == "":
                continue
            yield line_no, line


def load_dataset(directory) -> Graph:
    directory = Path(directory)
    nodes_path = directory / "nodes.tsv"
    edges_path = directory / "edges.tsv"

    rows: dict[int, tuple[int, list[float]]] = {}
    width = None
    for line_no, line in _read_lines(nodes_path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(nodes_path, line_no, f"expected 3 tab-separated fields, got {len(parts)}")
        try:
            node_id = int(parts[0])
            label = int(parts[1])
            feats = [float(v) for v in parts[2].split(",")] if parts[2] else []
        except ValueError as exc:
            raise ParseError(nodes_path, line_no, str(exc)) from None
        if width is None:
            width = len(feats)
        elif len(feats) != width:
            raise ParseError(nodes_path, line_no, f"expected {width} features, got {len(feats)}")
        if node_id in rows:
            raise ParseError(nodes_path, line_no, f"duplicate node id {node_id}")
        rows[node_id] = (label, feats)

    n = len(rows)
    if n == 0:
        raise ValidationError(f"{nodes_path} has no nodes")
    if sorted(rows) != list(range(n)):
        raise ValidationError(f"{nodes_path}: node ids must be dense integers 0..{n - 1}")
    if not width:
        raise ValidationError(f"{nodes_path}: nodes have no features")
    labels = np.array([rows[i][0] for i in range(n)], dtype=np.int64)
    features = np.array([rows[i][1] for i in range(n)], dtype=np.float64)

    pairs = []
    for line_no, line in _read_lines(edges_path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(edges_path, line_no, f"expected 2 tab-separated fields, got {len(parts)}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ParseError(edges_path, line_no, str(exc)) from None
        if not (0 <= i < n and 0 <= j < n):
            raise ValidationError(f"{edges_path}:{line_no}: dangling edge endpoint ({i}, {j})")
        pairs.append((i, j))

    if labels.min() < 0:
        raise ValidationError(f"{nodes_path}: negative label")
    num_classes = int(labels.max()) + 1
    return make_graph(pairs, features, labels, num_classes)


def _format_float(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def save_dataset(g: Graph, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with (directory / "nodes.tsv").open("w", encoding="utf-8", newline="\n") as fh:
        for i in range(g.num_nodes):
            feats = ",".join(_format_float(v) for v in g.features[i])
            fh.write(f"{i}\t{g.labels[i]}\t{feats}\n")
    with (directory / "edges.tsv").open("w", encoding="utf-8", newline="\n") as fh:
        for i, j in g.edges:
            fh.write(f"{i}\t{j}\n")


def convert_geom_gcn(src_dir, out_dir) -> Graph:
    """Convert the public Geom-GCN WebKB files into the nodes/edges layout.

    ``src_dir`` holds ``out1_node_feature_label.txt`` and
    ``out1_graph_edges.txt`` (each with a one-line header), as distributed in
    the geom-gcn repository under ``new_data/<name>/``.
    """
    src_dir = Path(src_dir)
    feat_path = src_dir / "out1_node_feature_label.txt"
    edge_path = src_dir / "out1_graph_edges.txt"
    rows = {}
    for line_no, line in _read_lines(feat_path):
        if line_no == 1:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(feat_path, line_no, "expected node_id, features, label")
        try:
            rows[int(parts[0])] = ([float(v) for v in parts[1].split(",")], int(parts[2]))
        except ValueError as exc:
            raise ParseError(feat_path, line_no, str(exc)) from None
    n = len(rows)
    features = np.array([rows[i][0] for i in range(n)])
    labels = np.array([rows[i][1] for i in range(n)])
    pairs = []
    for line_no, line in _read_lines(edge_path):
        if line_no == 1:
            continue
        parts = line.split("\t")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except (ValueError, IndexError) as exc:
            raise ParseError(edge_path, line_no, str(exc)) from None
    g = make_graph(pairs, features, labels)
    save_dataset(g, out_dir)
    return g


# -- structure --------------------------------------------------------------

def degree(g: Graph, i: int) -> int:
    if not 0 <= i < g.num_nodes:
        raise ValidationError(f"node index {i} outside [0, {g.num_nodes})")
    e = g.edges
    return int(np.count_nonzero(e[:, 0] == i) + np.count_nonzero(e[:, 1] == i))


def standardize_columns(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    constant = sd <= 1e-12 * np.maximum(1.0, np.abs(mu))
    out = (x - mu) / np.where(constant, 1.0, sd)
    out[:, constant] = 0.0
    return out


def degree_augmented(g: Graph) -> np.ndarray:
    """Rows [x_i, deg(i)] before standardization."""
    return np.concatenate([g.features, g.degrees()[:, None].astype(np.float64)], axis=1)


def augment_features(g: Graph) -> Tensor:
    """Append node degree to the features, then standardize every column."""
    return Tensor(standardize_columns(degree_augmented(g)))


def edge_homophily(g: Graph) -> float:
    if g.num_edges == 0:
        raise UndefinedStatisticError("edge homophily is undefined for a graph with no edges")
    same = g.labels[g.edges[:, 0]] == g.labels[g.edges[:, 1]]
    return float(same.mean())


def graph_stats(g: Graph) -> dict:
    return {
        "nodes": g.num_nodes,
        "edges": g.num_edges,
        "avg_degree": 2.0 * g.num_edges / g.num_nodes,
        "features": g.num_features,
        "classes": g.num_classes,
        "edge_homophily": edge_homophily(g) if g.num_edges else None,
    }


# -- splits -----------------------------------------------------------------

@dataclass(frozen=True)
class SplitAssignment:
    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]
    seed: int

    def to_json(self) -> dict:
        return {"train": list(self.train), "val": list(self.val), "test": list(self.test),
                "seed": self.seed}


def make_splits(g: Graph, fractions=DEFAULT_FRACTIONS, seed: int = 0) -> SplitAssignment:
    """Stratified shuffle split: every class is divided by the same fractions."""
    fr = tuple(float(f) for f in fractions)
    if len(fr) != 3 or min(fr) <= 0 or abs(math.fsum(fr) - 1.0) > 1e-9:
        raise ValidationError(f"split fractions must be three positive numbers summing to 1, got {fractions}")
    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for c in range(g.num_classes):
        members = np.flatnonzero(g.labels == c)
        if len(members) < 3:
            raise ValidationError(f"class {c} has {len(members)} node(s); stratified splits need at least 3")
        members = rng.permutation(members)
        size = len(members)
        n_train = min(max(1, round(fr[0] * size)), size - 2)
        n_val = min(max(1, round(fr[1] * size)), size - n_train - 1)
        train.extend(members[:n_train].tolist())
        val.extend(members[n_train:n_train + n_val].tolist())
        test.extend(members[n_train + n_val:].tolist())
    return SplitAssignment(tuple(sorted(train)), tuple(sorted(val)), tuple(sorted(test)), int(seed))


def save_splits(splits: SplitAssignment, path) -> None:
    Path(path).write_text(json.dumps(splits.to_json()) + "\n", encoding="utf-8")


def load_splits(path, num_nodes: int | None = None) -> SplitAssignment:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"missing file: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        parts = [tuple(sorted(int(v) for v in raw[key])) for key in ("train", "val", "test")]
        seed = int(raw.get("seed", 0))
    except (ValueError, KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: invalid splits file ({exc})") from None
    seen = [i for part in parts for i in part]
    if len(seen) != len(set(seen)):
        raise ValidationError(f"{path}: train/val/test overlap")
    if num_nodes is not None and sorted(seen) != list(range(num_nodes)):
        raise ValidationError(f"{path}: splits must cover nodes 0..{num_nodes - 1} exactly")
    return SplitAssignment(*parts, seed)
