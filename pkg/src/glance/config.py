from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError
from .refine import MAX_PRUNE_QUANTILE


@dataclass(frozen=True)
class TrainConfig:
    """Every hyperparameter and protocol choice of a training run."""

    epochs: int = 300
    lr: float = 0.005
    lambda_logic: float = 0.1
    lambda_struct: float = 0.0
    logic_warmup_epochs: int = 50
    prune_quantile: float = 0.3
    heads: int = 4
    hidden: int = 64
    logic_neurons: int = 32
    clusters: int | None = None  # None -> number of classes
    cluster_on: str = "augmented"  # or "hidden"
    kmeans_max_iter: int = 300
    kmeans_n_init: int = 10
    seed: int = 0
    split_fractions: tuple[float, float, float] = (0.48, 0.32, 0.20)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "split_fractions", tuple(float(f) for f in self.split_fractions))
        self.validate()

    def validate(self) -> None:
        problems = []
        for name in ("epochs", "heads", "hidden", "logic_neurons", "kmeans_max_iter", "kmeans_n_init"):
            if int(getattr(self, name)) < 1:
                problems.append(f"{name} must be >= 1")
        if self.clusters is not None and self.clusters < 1:
            problems.append("clusters must be >= 1")
        if self.logic_warmup_epochs < 0:
            problems.append("logic_warmup_epochs must be >= 0")
        if not self.lr > 0:
            problems.append("lr must be > 0")
        if self.lambda_logic < 0 or self.lambda_struct < 0:
            problems.append("loss weights must be >= 0")
        if not 0.0 <= self.prune_quantile <= MAX_PRUNE_QUANTILE:
            problems.append(f"prune_quantile must lie in [0, {MAX_PRUNE_QUANTILE}]")
        if self.cluster_on not in ("augmented", "hidden"):
            problems.append("cluster_on must be 'augmented' or 'hidden'")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            problems.append("adam needs 0 <= beta1, beta2 < 1 and eps > 0")
        if len(self.split_fractions) != 3:
            problems.append("split_fractions needs three entries")
        if problems:
            raise ValidationError("invalid config: " + "; ".join(problems))

    def lambda_logic_at(self, epoch: int) -> float:
        """Logic-loss weight after linear warm-up over ``logic_warmup_epochs``."""
        if self.logic_warmup_epochs == 0:
            return self.lambda_logic
        return self.lambda_logic * min(1.0, epoch / self.logic_warmup_epochs)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["split_fractions"] = list(self.split_fractions)
        return d

    def digest(self) -> str:
        """Short hash of every setting except the seed."""
        d = self.to_dict()
        d.pop("seed")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        if not isinstance(raw, dict):
            raise ValidationError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValidationError(f"unknown config keys: {unknown}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ValidationError(f"invalid config: {exc}") from None

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"missing file: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(raw)
