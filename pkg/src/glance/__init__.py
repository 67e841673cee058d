"""GLANCE: logic-gated, attention-pruned, cluster-enhanced node classification."""

from .config import TrainConfig
from .errors import DimensionError, GlanceError, ParseError, ValidationError
from .graph import Graph, SplitAssignment, augment_features, load_dataset, make_splits
from .model import ModelParams, forward
from .tensor import Tensor
from .train import RunMetrics, evaluate, gcn_baseline_train, train

__all__ = [
    "DimensionError", "GlanceError", "Graph", "ModelParams", "ParseError", "RunMetrics",
    "SplitAssignment", "Tensor", "TrainConfig", "ValidationError", "augment_features",
    "evaluate", "forward", "gcn_baseline_train", "load_dataset", "make_splits", "train",
]
__version__ = "0.1.0"
