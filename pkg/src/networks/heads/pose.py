"""Cabeza de pose: dos bloques (deconvolución → LayerNorm → ReLU) y conv 1×1."""

from typing import Any, Dict, List

import numpy as np

from src.models.enums import TaskFamily
from src.models.experiment import HeadConfig
from src.numerics import ops
from src.numerics.tensor import Tensor

from ..layers import Conv2d, ConvTranspose2d, LayerNorm
from ..module import Module
from .base import Labels, TaskHead


class DeconvBlock(Module):
    """Duplica las extensiones espaciales."""

    def __init__(self, prefix: str, in_ch: int, out_ch: int, seed: int = 0, lazy: bool = False):
        super().__init__(prefix, seed, lazy)
        self.deconv = self.child(
            "deconv", ConvTranspose2d(self.path("deconv"), in_ch, out_ch, 4, 2, 1, seed=seed, lazy=lazy)
        )
        self.norm = self.child("norm", LayerNorm(self.path("norm"), out_ch, axis=1, seed=seed, lazy=lazy))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.relu(self.norm(self.deconv(x)))


class PoseHead(TaskHead):
    """Mapas de calor (N, N_k, 4h, 4w)."""

    family = TaskFamily.POSE

    def __init__(self, task: str, dataset: str, dim: int, config: HeadConfig, seed: int = 0,
                 lazy: bool = False):
        super().__init__(task, dataset, dim, config, seed, lazy)
        self.blocks: List[DeconvBlock] = [
            self.child(f"up{index}", DeconvBlock(self.path(f"up{index}"), dim, dim, seed=seed, lazy=lazy))
            for index in (1, 2)
        ]
        self.final = self.child(
            "final", Conv2d(self.path("final"), dim, config.num_keypoints, 1, seed=seed, lazy=lazy)
        )

    def __call__(self, feature: Tensor, image_hw: tuple) -> Tensor:
        x = feature
        for block in self.blocks:
            x = block(x)
        return self.final(x)

    def loss(self, output: Tensor, labels: Labels) -> Tensor:
        return ops.mse_loss(output, np.asarray(labels["heatmaps"], dtype=output.dtype))

    def predict(self, output: Tensor) -> Dict[str, Any]:
        return {"heatmaps": output.data.astype(np.float64)}
