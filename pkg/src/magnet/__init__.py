"""Multi-order actor-critic graph classification with mask-based explanations."""

from .estimator import ActorConfig, MaGNetModel, predict, train_magnet
from .graph_core import AdjacencyMatrix, normalized_laplacian
from .interpreter import ExplanationParams, optimize_explanation, threshold_explanation
from .synth import GraphDataset, generate_setting1, generate_setting2

__all__ = [
    "ActorConfig",
    "AdjacencyMatrix",
    "ExplanationParams",
    "GraphDataset",
    "MaGNetModel",
    "generate_setting1",
    "generate_setting2",
    "normalized_laplacian",
    "optimize_explanation",
    "predict",
    "threshold_explanation",
    "train_magnet",
]
