"""Cabeza de ReID: BatchNorm sobre la característica agrupada, CE + triplet."""

from typing import Any, Dict

import numpy as np

from src.models.enums import TaskFamily
from src.models.experiment import HeadConfig
from src.numerics import ops
from src.numerics.tensor import Tensor

from ..layers import BatchNorm, Linear
from ..losses import batch_hard_triplet
from .base import Labels, TaskHead, pooled


class ReIDHead(TaskHead):
    """``Z = BatchNorm(P)``; Z alimenta el clasificador y las distancias del triplet."""

    family = TaskFamily.REID

    def __init__(self, task: str, dataset: str, dim: int, config: HeadConfig, seed: int = 0,
                 lazy: bool = False, momentum: float = 0.1):
        super().__init__(task, dataset, dim, config, seed, lazy)
        self.neck = self.child("neck", BatchNorm(self.path("neck"), dim, momentum, seed=seed, lazy=lazy))
        self.classifier = self.child(
            "classifier", Linear(self.path("classifier"), dim, config.num_classes, bias=False, seed=seed, lazy=lazy)
        )

    def embed(self, feature: Tensor) -> Tensor:
        return self.neck(pooled(feature))

    def __call__(self, feature: Tensor, image_hw: tuple) -> Dict[str, Tensor]:
        embedding = self.embed(feature)
        return {"embedding": embedding, "logits": self.classifier(embedding)}

    def loss(self, output: Dict[str, Tensor], labels: Labels) -> Tensor:
        identities = np.asarray(labels["identity"], dtype=np.int64)
        ce = ops.cross_entropy(output["logits"], identities, axis=1)
        triplet = batch_hard_triplet(output["embedding"], identities, self.config.triplet_margin)
        return ce + triplet

    def predict(self, output: Dict[str, Tensor]) -> Dict[str, Any]:
        return {"embedding": output["embedding"].data.astype(np.float64)}
