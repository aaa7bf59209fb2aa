"""Grafos compilados del motor PATH: preentrenamiento y experimento."""

from .experiment_graph import create_experiment_graph, run_ablation, run_experiment, variant_config
from .pretrain_graph import PretrainResult, create_pretrain_graph, run_pretrain

__all__ = [
    "create_pretrain_graph",
    "run_pretrain",
    "PretrainResult",
    "create_experiment_graph",
    "run_experiment",
    "run_ablation",
    "variant_config",
]
