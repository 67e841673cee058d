"""Multi-head edge attention and quantile pruning.

Each undirected edge (i, j), taken with i < j, is scored by averaging H
sigmoid heads over the concatenated endpoint features.  Edges scoring below
a nearest-rank quantile of all scores are dropped, except that every node
keeps its best-scoring incident edge so pruning never isolates a node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import DimensionError, ValidationError
from .graph import Graph
from .tensor import Tensor

MAX_PRUNE_QUANTILE = 0.95


@dataclass
class AttentionParams:
    weights: Tensor  # H x 2f; row h is w_h

    def __post_init__(self):
        if self.weights.rows < 1 or self.weights.cols % 2:
            raise DimensionError(
                f"attention weights must be H x 2f with H >= 1, got {self.weights.shape}"
            )

    @property
    def heads(self) -> int:
        return self.weights.rows

    @property
    def feature_width(self) -> int:
        return self.weights.cols // 2


@dataclass(frozen=True)
class RefinedGraph:
    kept_index: np.ndarray  # positions into the original edge list
    kept_edges: np.ndarray  # (k, 2)
    scores: np.ndarray  # score of each kept edge
    threshold: float
    requested_quantile: float


def score_edges(features: Tensor, edges, params: AttentionParams) -> Tensor:
    """Attention score of every edge as an m x 1 column on the tape.

    Pairs are used in the orientation given; ``Graph.edges`` is already
    canonical (i < j).
    """
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    f = features.cols
    if params.feature_width != f:
        raise DimensionError(
            f"attention expects features of width {params.feature_width}, got {f}"
        )
    if len(e) == 0:
        raise ValidationError("cannot score an empty edge list")
    # w_h^T [x_i || x_j] = w_h[:f]·x_i + w_h[f:]·x_j, projected once per node
    w = params.weights
    left = T.matmul(features, T.transpose(T.col_select(w, np.arange(f))))
    right = T.matmul(features, T.transpose(T.col_select(w, np.arange(f, 2 * f))))
    logits = T.add(T.row_select(left, e[:, 0]), T.row_select(right, e[:, 1]))
    return T.mean(T.sigmoid(logits), axis=1)


def quantile_threshold(scores, p: float) -> float:
    """Nearest-rank lower quantile: sorted(scores)[max(0, ceil(p*m) - 1)]."""
    s = np.sort(np.asarray(scores, dtype=np.float64).reshape(-1))
    m = s.size
    if m == 0:
        raise ValidationError("quantile of an empty score list")
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"quantile p must lie in [0, 1], got {p}")
    # guard p*m against float noise such as 0.3*10 = 3.0000000000000004
    rank = math.ceil(p * m - 1e-9)
    return float(s[max(0, rank - 1)])


def prune(g: Graph, scores, p: float, protect: bool = True) -> RefinedGraph:
    """Drop edges scoring below the p-quantile, keeping each node's best edge.

    ``protect=False`` disables the per-node protection (used by tests that
    check the raw removal fraction).
    """
    if not 0.0 <= p <= MAX_PRUNE_QUANTILE:
        raise ValidationError(f"prune quantile must lie in [0, {MAX_PRUNE_QUANTILE}], got {p}")
    s = np.asarray(scores.values if isinstance(scores, Tensor) else scores,
                   dtype=np.float64).reshape(-1)
    if s.size != g.num_edges:
        raise DimensionError(f"{s.size} scores for {g.num_edges} edges")
    if s.size == 0:
        return RefinedGraph(np.zeros(0, np.int64), np.zeros((0, 2), np.int64),
                            np.zeros(0), math.nan, p)
    threshold = quantile_threshold(s, p)
    keep = s >= threshold
    if protect:
        keep[best_incident_edges(g, s)] = True
    idx = np.flatnonzero(keep)
    return RefinedGraph(idx, g.edges[idx], s[idx], threshold, p)


def best_incident_edges(g: Graph, scores: np.ndarray) -> np.ndarray:
    """Index of each non-isolated node's highest-scoring edge (ties: lowest index)."""
    best = np.full(g.num_nodes, -1, dtype=np.int64)
    best_score = np.full(g.num_nodes, -np.inf)
    for k, (i, j) in enumerate(g.edges):
        for node in (i, j):
            if scores[k] > best_score[node]:
                best_score[node] = scores[k]
                best[node] = k
    return np.unique(best[best >= 0])


def audit(g: Graph, scores, refined: RefinedGraph) -> dict:
    """Per-edge score and kept/dropped status, for the inspect-graph command."""
    s = np.asarray(scores.values if isinstance(scores, Tensor) else scores).reshape(-1)
    kept = np.zeros(g.num_edges, dtype=bool)
    kept[refined.kept_index] = True
    return {
        "quantile": refined.requested_quantile,
        "threshold": refined.threshold,
        "num_edges": g.num_edges,
        "num_kept": int(kept.sum()),
        "edges": [
            {"src": int(i), "dst": int(j), "score": float(s[k]), "kept": bool(kept[k])}
            for k, (i, j) in enumerate(g.edges)
        ],
    }
