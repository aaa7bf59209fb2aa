"""Optimizadores deterministas: SGD con momento y Adafactor de paso absoluto.

Cada optimizador guarda su estado por nombre de parámetro. Las cuentas se
hacen en float64 y el resultado se escribe en el dtype del parámetro, de modo
que dos réplicas con el mismo estado y el mismo gradiente quedan idénticas.
"""

import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, Mapping, Optional

import numpy as np

from src.models.enums import OptimizerKind
from src.models.errors import ConfigError
from src.models.experiment import OptimizerConfig
from src.numerics.tensor import Parameter

logger = logging.getLogger(__name__)


class Optimizer(ABC):
    """Interfaz común de los optimizadores."""

    def __init__(self, config: OptimizerConfig):
        self.config = config
        self.state: Dict[str, Dict[str, Any]] = {}

    def step(
        self,
        params: Mapping[str, Parameter],
        grads: Mapping[str, np.ndarray],
        lrs: Mapping[str, float],
        weight_decays: Optional[Mapping[str, float]] = None,
    ) -> None:
        """Aplica una actualización a los parámetros con gradiente.

        Los parámetros congelados o sin gradiente no se tocan.

        Args:
            params: Parámetros por nombre
            grads: Gradientes sincronizados por nombre
            lrs: Tasa efectiva por nombre
            weight_decays: Decaimiento por nombre (cero si falta)
        """
        weight_decays = weight_decays or {}
        for name in sorted(grads):
            parameter = params[name]
            if not parameter.trainable:
                continue
            state = self.state.setdefault(name, {})
            state["weight_decay"] = float(weight_decays.get(name, 0.0))
            value = parameter.data.astype(np.float64)
            grad = np.asarray(grads[name], dtype=np.float64)
            updated = self._update(value, grad, float(lrs[name]), state)
            parameter.data = updated.astype(parameter.data.dtype)

    @abstractmethod
    def _update(self, value: np.ndarray, grad: np.ndarray, lr: float, state: Dict[str, Any]) -> np.ndarray:
        """Nuevo valor del parámetro."""


class SGD(Optimizer):
    """Descenso por gradiente con momento opcional y decaimiento L2."""

    def _update(self, value: np.ndarray, grad: np.ndarray, lr: float, state: Dict[str, Any]) -> np.ndarray:
        update = grad + state["weight_decay"] * value
        if self.config.momentum > 0:
            buffer = state.get("momentum_buffer")
            buffer = update if buffer is None else self.config.momentum * buffer + update
            state["momentum_buffer"] = buffer
            update = buffer
        return value - lr * update


def _rms(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(values))))


class Adafactor(Optimizer):
    """Adafactor con segundo momento factorizado para matrices.

    Sin escalado por la norma del parámetro ni paso relativo; la tasa de
    decaimiento ``1 - t^decay_rate`` se limita a ``clip_beta2``.
    """

    def _update(self, value: np.ndarray, grad: np.ndarray, lr: float, state: Dict[str, Any]) -> np.ndarray:
        cfg = self.config
        eps1 = cfg.eps[0]
        state["step"] = state.get("step", 0) + 1
        beta2t = min(1.0 - state["step"] ** cfg.decay_rate, cfg.clip_beta2)
        squared = np.square(grad) + eps1

        if grad.ndim >= 2:
            row = state.get("exp_avg_sq_row", np.zeros(grad.shape[:-1]))
            col = state.get("exp_avg_sq_col", np.zeros(grad.shape[:-2] + grad.shape[-1:]))
            row = beta2t * row + (1.0 - beta2t) * squared.mean(axis=-1)
            col = beta2t * col + (1.0 - beta2t) * squared.mean(axis=-2)
            state["exp_avg_sq_row"], state["exp_avg_sq_col"] = row, col
            row_factor = 1.0 / np.sqrt(row / row.mean(axis=-1, keepdims=True))
            col_factor = 1.0 / np.sqrt(col)
            update = row_factor[..., :, None] * col_factor[..., None, :] * grad
        else:
            second = state.get("exp_avg_sq", np.zeros_like(grad))
            second = beta2t * second + (1.0 - beta2t) * squared
            state["exp_avg_sq"] = second
            update = grad / np.sqrt(second)

        update = update / max(1.0, _rms(update) / cfg.clip_threshold)
        if cfg.beta1 > 0:
            avg = state.get("exp_avg", np.zeros_like(update))
            avg = cfg.beta1 * avg + (1.0 - cfg.beta1) * update
            state["exp_avg"] = avg
            update = avg

        if state["weight_decay"]:
            value = value - state["weight_decay"] * lr * value
        return value - lr * update


def build_optimizer(config: OptimizerConfig) -> Optimizer:
    """Instancia el optimizador configurado."""
    if config.kind is OptimizerKind.SGD:
        return SGD(config)
    if config.kind is OptimizerKind.ADAFACTOR:
        return Adafactor(config)
    raise ConfigError(f"optimizador desconocido: {config.kind}")
