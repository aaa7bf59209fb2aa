"""Cabeza de conteo: regresión de un mapa de densidad no negativo."""

from typing import Any, Dict, List

import numpy as np

from src.models.enums import TaskFamily
from src.models.experiment import HeadConfig
from src.numerics import ops
from src.numerics.tensor import Tensor

from ..layers import BatchNorm, Conv2d
from ..module import Module
from .base import Labels, TaskHead

# Canales de las tres convoluciones con BatchNorm
COUNTING_CHANNELS = (64, 32, 16)


class ConvBNReLU(Module):
    def __init__(self, prefix: str, in_ch: int, out_ch: int, momentum: float, seed: int = 0,
                 lazy: bool = False):
        super().__init__(prefix, seed, lazy)
        self.conv = self.child("conv", Conv2d(self.path("conv"), in_ch, out_ch, 3, 1, 1, seed=seed, lazy=lazy))
        self.bn = self.child("bn", BatchNorm(self.path("bn"), out_ch, momentum, seed=seed, lazy=lazy))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.relu(self.bn(self.conv(x)))


class CountingHead(TaskHead):
    """Upsample×2, conv64, conv32, upsample×2, conv16 y conv1 con ReLU final."""

    family = TaskFamily.COUNTING

    def __init__(self, task: str, dataset: str, dim: int, config: HeadConfig, seed: int = 0,
                 lazy: bool = False, momentum: float = 0.1):
        super().__init__(task, dataset, dim, config, seed, lazy)
        c1, c2, c3 = COUNTING_CHANNELS
        self.stages: List[ConvBNReLU] = [
            self.child("conv1", ConvBNReLU(self.path("conv1"), dim, c1, momentum, seed=seed, lazy=lazy)),
            self.child("conv2", ConvBNReLU(self.path("conv2"), c1, c2, momentum, seed=seed, lazy=lazy)),
            self.child("conv3", ConvBNReLU(self.path("conv3"), c2, c3, momentum, seed=seed, lazy=lazy)),
        ]
        self.output = self.child("out", Conv2d(self.path("out"), c3, 1, 3, 1, 1, seed=seed, lazy=lazy))

    def __call__(self, feature: Tensor, image_hw: tuple) -> Tensor:
        x = ops.upsample_nearest(feature, 2)
        x = self.stages[1](self.stages[0](x))
        x = ops.upsample_nearest(x, 2)
        x = self.stages[2](x)
        return ops.relu(self.output(x))

    def loss(self, output: Tensor, labels: Labels) -> Tensor:
        target = np.asarray(labels["density"], dtype=output.dtype) * self.config.density_scale
        return ops.mse_loss(output, target)

    def predict(self, output: Tensor) -> Dict[str, Any]:
        density = output.data.astype(np.float64) / self.config.density_scale
        return {"density": density, "count": density.sum(axis=(1, 2, 3))}
