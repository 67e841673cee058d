"""Full-batch training loop, evaluation, metrics and checkpoints."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .errors import NonFiniteError, ValidationError
from .graph import Graph, SplitAssignment, make_splits
from .model import Context, ModelParams, forward, init_gcn, init_glance, prepare, total_loss
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "glance-checkpoint/1"


def accuracy(logits: np.ndarray, labels: np.ndarray, idx) -> float:
    """Argmax accuracy over ``idx``; ties go to the lowest class index."""
    idx = np.asarray(idx, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        raise ValidationError("cannot compute accuracy on an empty split")
    pred = np.argmax(np.asarray(logits)[idx], axis=1)
    return float(np.mean(pred == np.asarray(labels)[idx]))


@dataclass
class RunMetrics:
    epochs: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_jsonl(self) -> str:
        lines = [json.dumps(rec, sort_keys=True) for rec in self.epochs]
        lines.append(json.dumps(self.summary, sort_keys=True))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def read(cls, path) -> "RunMetrics":
        records = [json.loads(line) for line in Path(path).read_text().splitlines() if line]
        return cls([r for r in records if r.get("type") == "epoch"],
                   next(r for r in records if r.get("type") == "summary"))


def train(
    g: Graph,
    splits: SplitAssignment | None,
    cfg: TrainConfig,
    model: str = "glance",
) -> tuple[ModelParams, RunMetrics]:
    """Run ``cfg.epochs`` full-batch epochs; return the best-validation parameters.

    Each epoch re-scores and re-prunes the edges, rebuilds cluster features,
    evaluates the composite loss on the training nodes and takes one Adam
    step.  The parameters kept are those that produced the highest
    validation accuracy (earliest epoch on ties).
    """
    if model not in ("glance", "gcn"):
        raise ValidationError(f"unknown model {model!r}")
    if splits is None:
        splits = make_splits(g, cfg.split_fractions, cfg.seed)
    ctx = prepare(g, cfg)
    params = init_glance(ctx) if model == "glance" else init_gcn(ctx)
    state = AdamState()
    metrics = RunMetrics()
    labels = g.labels
    best = None  # (val_acc, epoch, params, test_acc, train_acc)

    for epoch in range(cfg.epochs):
        result = forward(ctx, params)
        parts = total_loss(result, labels, splits.train, cfg, epoch)
        total = parts.total.item()
        if not math.isfinite(total):
            raise NonFiniteError(f"loss became non-finite at epoch {epoch}")
        parts.total.backward()
        grads = {k: t.grad for k, t in result.leaves.items() if t.grad is not None}

        logits = result.logits.values
        train_acc = accuracy(logits, labels, splits.train)
        val_acc = accuracy(logits, labels, splits.val)
        test_acc = accuracy(logits, labels, splits.test)
        record = {
            "type": "epoch",
            "epoch": epoch,
            "loss_total": total,
            "loss_ce": parts.ce,
            "loss_logic": parts.logic,
            "loss_prune": parts.prune,
            "lambda_logic": parts.lambda_logic,
            "lambda_struct": parts.lambda_struct,
            "train_acc": train_acc,
            "val_acc": val_acc,
            "kept_edges": int(len(result.refined.kept_index)) if result.refined else g.num_edges,
            "cluster_inertia": result.clustering.inertia if result.clustering else None,
        }
        metrics.epochs.append(record)
        if best is None or val_acc > best[0]:
            best = (val_acc, epoch, params.copy(), test_acc, train_acc)
        log.debug("epoch %d loss=%.6f train=%.3f val=%.3f", epoch, total, train_acc, val_acc)

        new_blocks, state = adam_step(params.blocks, grads, state, cfg.lr,
                                      cfg.beta1, cfg.beta2, cfg.eps)
        params = ModelParams(params.kind, new_blocks, params.wiring)
        try:
            params.assert_finite()
        except FloatingPointError as exc:
            raise NonFiniteError(f"{exc} after epoch {epoch}") from None

    val_acc, best_epoch, best_params, test_acc, train_acc = best
    metrics.summary = {
        "type": "summary",
        "model": model,
        "seed": cfg.seed,
        "config_hash": cfg.digest(),
        "epochs": cfg.epochs,
        "optimizer_steps": state.step,
        "best_epoch": best_epoch,
        "best_val_acc": val_acc,
        "train_acc_at_best": train_acc,
        "test_acc": test_acc,
    }
    return best_params, metrics


def gcn_baseline_train(g: Graph, splits: SplitAssignment | None, cfg: TrainConfig):
    """Two-layer mean-aggregation GCN under the same optimizer and protocol."""
    return train(g, splits, cfg, model="gcn")


def evaluate(g: Graph, params: ModelParams, split, cfg: TrainConfig, seed: int | None = None) -> float:
    ctx = prepare(g, cfg, seed)
    result = forward(ctx, params, requires_grad=False)
    return accuracy(result.logits.values, g.labels, split)


def predict(ctx: Context, params: ModelParams) -> np.ndarray:
    return forward(ctx, params, requires_grad=False).logits.values


# -- checkpoints ------------------------------------------------------------

def _binary_path(path: Path) -> Path:
    return path.with_name(path.name + ".bin")


def save_checkpoint(path, params: ModelParams, cfg: TrainConfig, extra: dict | None = None) -> None:
    """JSON manifest at ``path`` plus little-endian float64 values at ``path.bin``.

    Blocks are stored row-major, concatenated in manifest order.
    """
    path = Path(path)
    bin_path = _binary_path(path)
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "model": params.kind,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "blocks": [{"name": k, "shape": list(v.shape)} for k, v in params.blocks.items()],
        "wiring": None if params.wiring is None else params.wiring.tolist(),
        "data_file": bin_path.name,
        "dtype": "<f8",
    }
    if extra:
        manifest.update(extra)
    flat = np.concatenate([v.reshape(-1) for v in params.blocks.values()]).astype("<f8")
    bin_path.write_bytes(flat.tobytes())
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[ModelParams, TrainConfig, dict]:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"missing checkpoint: {path}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid checkpoint manifest ({exc})") from None
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise ValidationError(f"{path}: not a {CHECKPOINT_FORMAT} manifest")
    bin_path = path.with_name(manifest["data_file"])
    if not bin_path.is_file():
        raise ValidationError(f"missing checkpoint data: {bin_path}")
    flat = np.frombuffer(bin_path.read_bytes(), dtype="<f8").astype(np.float64)
    blocks, offset = {}, 0
    for entry in manifest["blocks"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape))
        if offset + size > flat.size:
            raise ValidationError(f"{bin_path}: truncated parameter data")
        blocks[entry["name"]] = flat[offset:offset + size].reshape(shape).copy()
        offset += size
    if offset != flat.size:
        raise ValidationError(f"{bin_path}: {flat.size - offset} trailing values")
    wiring = manifest.get("wiring")
    params = ModelParams(manifest["model"], blocks,
                         None if wiring is None else np.asarray(wiring, dtype=np.int64))
    return params, TrainConfig.from_dict(manifest["config"]), manifest
