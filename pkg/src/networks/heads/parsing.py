"""Cabeza de parsing: conv 1×1 + LayerNorm + ReLU + conv 1×1 y sobremuestreo bilineal."""

from typing import Any, Dict

import numpy as np

from src.models.enums import TaskFamily
from src.models.experiment import HeadConfig
from src.numerics import ops
from src.numerics.tensor import Tensor

from ..layers import Conv2d, LayerNorm
from .base import Labels, TaskHead


class ParsingHead(TaskHead):
    """Logits por píxel (N, N_c, H, W) a la resolución de la imagen."""

    family = TaskFamily.PARSING

    def __init__(self, task: str, dataset: str, dim: int, config: HeadConfig, seed: int = 0,
                 lazy: bool = False):
        super().__init__(task, dataset, dim, config, seed, lazy)
        self.proj = self.child("proj", Conv2d(self.path("proj"), dim, dim, 1, seed=seed, lazy=lazy))
        self.norm = self.child("norm", LayerNorm(self.path("norm"), dim, axis=1, seed=seed, lazy=lazy))
        self.classifier = self.child(
            "classifier", Conv2d(self.path("classifier"), dim, config.num_classes, 1, seed=seed, lazy=lazy)
        )

    def __call__(self, feature: Tensor, image_hw: tuple) -> Tensor:
        logits = self.classifier(ops.relu(self.norm(self.proj(feature))))
        full_h, full_w = image_hw
        return ops.bilinear_resize(logits, full_h, full_w, align_corners=False)

    def loss(self, output: Tensor, labels: Labels) -> Tensor:
        return ops.cross_entropy(output, np.asarray(labels["mask"], dtype=np.int64), axis=1)

    def predict(self, output: Tensor) -> Dict[str, Any]:
        return {"mask": output.data.argmax(axis=1)}
