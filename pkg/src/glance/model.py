"""The GLANCE forward pass, its composite loss, and the GCN reference model.

Pipeline for one forward pass::

    x' = standardize([X || deg])                      degree augmentation
    alpha = mean_h sigmoid(w_h . [x'_i || x'_j])      edge attention
    kept = prune(alpha, p)                            quantile pruning
    x~ = [x' || centroid of node's k-means cluster]   cluster features
    h = relu(x~ W_self + norm(alpha) x~ W_nbr + b)    attention-weighted aggregation
    l = logic(h);  z = [h || l];  logits = z W_out + b_out
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .cluster import Clustering, cluster_features, kmeans
from .config import TrainConfig
from .errors import DimensionError, ValidationError
from .graph import Graph, augment_features
from .logic import NUM_GATES, LogicLayerParams, logic_forward, logic_loss, random_wiring
from .refine import AttentionParams, RefinedGraph, prune, score_edges
from .tensor import Tensor

GLANCE_BLOCKS = ("attention", "W_self", "W_nbr", "b_hid", "gate_logits", "W_out", "b_out")
GCN_BLOCKS = ("W1", "b1", "W2", "b2")


@dataclass
class ModelParams:
    """Learnable parameter blocks (name -> float64 matrix) plus fixed wiring."""

    kind: str  # "glance" or "gcn"
    blocks: dict[str, np.ndarray]
    wiring: np.ndarray | None = None

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.kind,
            {k: v.copy() for k, v in self.blocks.items()},
            None if self.wiring is None else self.wiring.copy(),
        )

    def shapes(self) -> dict[str, tuple[int, int]]:
        return {k: tuple(v.shape) for k, v in self.blocks.items()}

    def assert_finite(self) -> None:
        for name, v in self.blocks.items():
            if not np.all(np.isfinite(v)):
                raise FloatingPointError(f"parameter block {name!r} is not finite")


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def seed_streams(seed: int) -> dict[str, int]:
    """Independent integer seeds for initialization and clustering."""
    init, clus = np.random.SeedSequence(seed).generate_state(2)
    return {"init": int(init), "kmeans": int(clus)}


@dataclass
class Context:
    """Per-run constants: the augmented features and a k-means cache."""

    graph: Graph
    cfg: TrainConfig
    seed: int
    x_aug: Tensor
    k: int
    kmeans_seed: int
    _cluster_cache: Clustering | None = field(default=None, repr=False)

    @property
    def aug_width(self) -> int:
        return self.x_aug.cols

    @property
    def cluster_width(self) -> int:
        return self.aug_width if self.cfg.cluster_on == "augmented" else self.cfg.hidden

    @property
    def input_width(self) -> int:
        return self.aug_width + self.cluster_width

    def cluster_augmented(self) -> Clustering:
        # the augmented features never change, so every epoch's k-means is identical
        if self._cluster_cache is None:
            self._cluster_cache = self.cluster(self.x_aug.values)
        return self._cluster_cache

    def cluster(self, x: np.ndarray) -> Clustering:
        return kmeans(x, self.k, seed=self.kmeans_seed, max_iter=self.cfg.kmeans_max_iter,
                      n_init=self.cfg.kmeans_n_init)


def prepare(g: Graph, cfg: TrainConfig, seed: int | None = None) -> Context:
    seed = cfg.seed if seed is None else seed
    k = cfg.clusters if cfg.clusters is not None else g.num_classes
    if k > g.num_nodes:
        raise ValidationError(f"cannot form {k} clusters from {g.num_nodes} nodes")
    return Context(g, cfg, seed, augment_features(g), k, seed_streams(seed)["kmeans"])


def init_glance(ctx: Context) -> ModelParams:
    cfg = ctx.cfg
    rng = np.random.default_rng(seed_streams(ctx.seed)["init"])
    f_aug, f_in, hid, L = ctx.aug_width, ctx.input_width, cfg.hidden, cfg.logic_neurons
    C = ctx.graph.num_classes
    blocks = {
        "attention": glorot(rng, 2 * f_aug, cfg.heads, shape=(cfg.heads, 2 * f_aug)),
        "W_self": glorot(rng, f_in, hid),
        "W_nbr": glorot(rng, f_in, hid),
        "b_hid": np.zeros((1, hid)),
        "gate_logits": glorot(rng, L, NUM_GATES),
        "W_out": glorot(rng, hid + L, C),
        "b_out": np.zeros((1, C)),
    }
    return ModelParams("glance", blocks, random_wiring(L, hid, rng))


def init_gcn(ctx: Context) -> ModelParams:
    rng = np.random.default_rng(seed_streams(ctx.seed)["init"])
    f, hid, C = ctx.aug_width, ctx.cfg.hidden, ctx.graph.num_classes
    blocks = {
        "W1": glorot(rng, f, hid),
        "b1": np.zeros((1, hid)),
        "W2": glorot(rng, hid, C),
        "b2": np.zeros((1, C)),
    }
    return ModelParams("gcn", blocks)


def leaves(params: ModelParams, requires_grad: bool = True) -> dict[str, Tensor]:
    return {k: Tensor(v, requires_grad=requires_grad, name=k) for k, v in params.blocks.items()}


def hidden_representation(
    x_tilde: Tensor,
    refined: RefinedGraph,
    alpha: Tensor | None,
    W_self: Tensor,
    W_nbr: Tensor,
    bias: Tensor,
) -> Tensor:
    """relu(x~ W_self + sum_j alpha^_ij x~_j W_nbr + b) over surviving neighbours.

    alpha^ normalizes the kept scores around each node; nodes without kept
    edges get the self term only.
    """
    if x_tilde.cols != W_self.rows or W_self.shape != W_nbr.shape:
        raise DimensionError(
            f"features {x_tilde.shape} do not fit weights {W_self.shape} / {W_nbr.shape}"
        )
    pre = T.matmul(x_tilde, W_self)
    kept = refined.kept_index
    if alpha is not None and len(kept):
        n = x_tilde.rows
        k = len(kept)
        both = T.row_select(T.row_select(alpha, kept), np.concatenate([np.arange(k)] * 2))
        e = refined.kept_edges
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        weights = T.row_normalize(T.scatter_dense(both, rows, cols, (n, n)))
        pre = T.add(pre, T.matmul(weights, T.matmul(x_tilde, W_nbr)))
    return T.relu(T.add_row(pre, bias))


@dataclass
class ForwardResult:
    logits: Tensor
    leaves: dict[str, Tensor]
    alpha: Tensor | None = None
    refined: RefinedGraph | None = None
    clustering: Clustering | None = None
    hidden: Tensor | None = None
    logic: Tensor | None = None
    logic_params: LogicLayerParams | None = None


def forward(
    ctx: Context,
    params: ModelParams,
    frozen: ForwardResult | None = None,
    requires_grad: bool = True,
) -> ForwardResult:
    """Run the model.  ``frozen`` reuses a previous pass's pruning and clustering."""
    if params.kind == "gcn":
        return gcn_forward(ctx, params, requires_grad)
    g, cfg = ctx.graph, ctx.cfg
    p = leaves(params, requires_grad)
    x = ctx.x_aug
    expected_in = ctx.input_width
    if p["W_self"].rows != expected_in:
        raise DimensionError(
            f"parameters expect input width {p['W_self'].rows}, data gives {expected_in}"
        )

    alpha = score_edges(x, g.edges, AttentionParams(p["attention"])) if g.num_edges else None
    if frozen is not None:
        refined = frozen.refined
    elif alpha is not None:
        refined = prune(g, alpha, cfg.prune_quantile)
    else:
        refined = prune(g, np.zeros(0), cfg.prune_quantile)

    if frozen is not None:
        clustering = frozen.clustering
    elif cfg.cluster_on == "augmented":
        clustering = ctx.cluster_augmented()
    else:
        blank = Tensor(np.zeros((g.num_nodes, ctx.cluster_width)))
        h0 = hidden_representation(T.concat_cols(x, blank), refined, alpha,
                                   p["W_self"], p["W_nbr"], p["b_hid"])
        clustering = ctx.cluster(h0.values)

    x_tilde = T.concat_cols(x, cluster_features(x, clustering))
    h = hidden_representation(x_tilde, refined, alpha, p["W_self"], p["W_nbr"], p["b_hid"])
    logic_params = LogicLayerParams(params.wiring, p["gate_logits"], cfg.hidden)
    l = logic_forward(h, logic_params)
    z = T.concat_cols(h, l)
    logits = T.add_row(T.matmul(z, p["W_out"]), p["b_out"])
    return ForwardResult(logits, p, alpha, refined, clustering, h, l, logic_params)


def mean_adjacency(g: Graph) -> np.ndarray:
    """Row-stochastic (A + I): each node averages itself and its neighbours."""
    a = g.adjacency() + np.eye(g.num_nodes)
    return a / a.sum(axis=1, keepdims=True)


def gcn_forward(ctx: Context, params: ModelParams, requires_grad: bool = True) -> ForwardResult:
    p = leaves(params, requires_grad)
    m = Tensor(mean_adjacency(ctx.graph))
    h = T.relu(T.add_row(T.matmul(m, T.matmul(ctx.x_aug, p["W1"])), p["b1"]))
    logits = T.add_row(T.matmul(m, T.matmul(h, p["W2"])), p["b2"])
    return ForwardResult(logits, p, hidden=h)


@dataclass
class LossParts:
    total: Tensor
    ce: float
    logic: float
    prune: float
    lambda_logic: float
    lambda_struct: float


def total_loss(
    result: ForwardResult,
    labels: np.ndarray,
    train_idx,
    cfg: TrainConfig,
    epoch: int,
) -> LossParts:
    """CE on training rows + lambda_logic(epoch) * logic + lambda_struct * prune.

    The prune term is the mean attention score of the kept edges.
    """
    idx = np.asarray(train_idx, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        raise ValidationError("training mask is empty")
    ce = T.cross_entropy(T.row_select(result.logits, idx), np.asarray(labels)[idx])
    total = ce
    lam_l = lam_s = 0.0
    logic_v = prune_v = 0.0
    if result.logic_params is not None:
        lam_l = cfg.lambda_logic_at(epoch)
        lam_s = cfg.lambda_struct
        lg = logic_loss(result.logic_params)
        logic_v = lg.item()
        total = T.add(total, T.scale(lg, lam_l))
        if result.alpha is not None and len(result.refined.kept_index):
            pr = T.mean(T.row_select(result.alpha, result.refined.kept_index))
            prune_v = pr.item()
            total = T.add(total, T.scale(pr, lam_s))
    return LossParts(total, ce.item(), logic_v, prune_v, lam_l, lam_s)
