"""Cabeza de atributos: capa totalmente conectada y sigmoide."""

from typing import Any, Dict

import numpy as np

from src.models.enums import TaskFamily
from src.models.experiment import HeadConfig
from src.numerics import ops
from src.numerics.tensor import Tensor

from ..layers import Linear
from .base import Labels, TaskHead, pooled


class AttributeHead(TaskHead):
    """Devuelve logits; ``probabilities`` aplica la sigmoide."""

    family = TaskFamily.ATTRIBUTE

    def __init__(self, task: str, dataset: str, dim: int, config: HeadConfig, seed: int = 0,
                 lazy: bool = False):
        super().__init__(task, dataset, dim, config, seed, lazy)
        self.fc = self.child("fc", Linear(self.path("fc"), dim, config.num_classes, seed=seed, lazy=lazy))

    def __call__(self, feature: Tensor, image_hw: tuple) -> Tensor:
        return self.fc(pooled(feature))

    @staticmethod
    def probabilities(logits: Tensor) -> Tensor:
        return ops.sigmoid(logits)

    def loss(self, output: Tensor, labels: Labels) -> Tensor:
        return ops.binary_cross_entropy_with_logits(output, np.asarray(labels["attributes"]))

    def predict(self, output: Tensor) -> Dict[str, Any]:
        return {"probabilities": self.probabilities(output).data.astype(np.float64)}
