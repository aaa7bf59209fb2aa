"""Interfaz común de las cabezas por dataset."""

from typing import Any, Dict

from src.models.enums import TaskFamily
from src.models.experiment import HeadConfig
from src.numerics.tensor import Tensor

from ..module import Module

Labels = Dict[str, Any]


class TaskHead(Module):
    """Cabeza de un dataset (ámbito DATASET, nunca compartida)."""

    family: TaskFamily

    def __init__(self, task: str, dataset: str, dim: int, config: HeadConfig, seed: int = 0,
                 lazy: bool = False):
        super().__init__(f"head.{task}.{dataset}", seed, lazy)
        self.task = task
        self.dataset = dataset
        self.dim = dim
        self.config = config

    def __call__(self, feature: Tensor, image_hw: tuple) -> Any:
        """Activaciones a partir de la característica de tarea (N, C, h, w)."""
        raise NotImplementedError

    def loss(self, output: Any, labels: Labels) -> Tensor:
        raise NotImplementedError

    def predict(self, output: Any) -> Dict[str, Any]:
        """Salidas en numpy listas para las métricas."""
        raise NotImplementedError


def pooled(feature: Tensor) -> Tensor:
    """Media espacial (N, C, h, w) → (N, C)."""
    return feature.mean(axis=(2, 3))
