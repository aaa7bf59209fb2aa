"""Capas básicas construidas sobre las primitivas de ``src.numerics.ops``."""

from typing import Optional

import numpy as np

from src.numerics import ops
from src.numerics.tensor import Tensor

from .module import Module, fan_in, ones, zeros


class Linear(Module):
    """Capa afín con peso (entrada, salida)."""

    def __init__(self, prefix: str, in_dim: int, out_dim: int, bias: bool = True, seed: int = 0,
                 lazy: bool = False, gain: float = 1.0):
        super().__init__(prefix, seed, lazy)
        self.weight = self.param("weight", (in_dim, out_dim), fan_in(in_dim, gain))
        self.bias = self.param("bias", (out_dim,), zeros) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    """Normalización por capa sobre ``axis`` con afinidad aprendible."""

    def __init__(self, prefix: str, dim: int, axis: int = -1, eps: float = 1e-5, seed: int = 0,
                 lazy: bool = False):
        super().__init__(prefix, seed, lazy)
        self.axis = axis
        self.eps = eps
        self.gamma = self.param("gamma", (dim,), ones)
        self.beta = self.param("beta", (dim,), zeros)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta, eps=self.eps, axis=self.axis)


class BatchNorm(Module):
    """BatchNorm sobre el eje 1 con estadísticas locales al trabajador."""

    def __init__(self, prefix: str, channels: int, momentum: float = 0.1, seed: int = 0,
                 lazy: bool = False):
        super().__init__(prefix, seed, lazy)
        self.gamma = self.param("gamma", (channels,), ones)
        self.beta = self.param("beta", (channels,), zeros)
        self.state = self.norm_state("stats", channels, momentum)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.batch_norm(x, self.state, self.mode, self.gamma, self.beta)


class Conv2d(Module):
    """Convolución 2-D con núcleo (salida, entrada, k, k)."""

    def __init__(self, prefix: str, in_ch: int, out_ch: int, kernel: int, stride: int = 1,
                 padding: int = 0, bias: bool = True, seed: int = 0, lazy: bool = False):
        super().__init__(prefix, seed, lazy)
        self.stride = stride
        self.padding = padding
        self.weight = self.param(
            "weight", (out_ch, in_ch, kernel, kernel), fan_in(in_ch * kernel * kernel, np.sqrt(2.0))
        )
        self.bias = self.param("bias", (out_ch,), zeros) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class ConvTranspose2d(Module):
    """Convolución transpuesta (adjunta de Conv2d) con núcleo (entrada, salida, k, k)."""

    def __init__(self, prefix: str, in_ch: int, out_ch: int, kernel: int = 4, stride: int = 2,
                 padding: int = 1, bias: bool = True, seed: int = 0, lazy: bool = False):
        super().__init__(prefix, seed, lazy)
        self.stride = stride
        self.padding = padding
        self.weight = self.param(
            "weight", (in_ch, out_ch, kernel, kernel), fan_in(in_ch * kernel * kernel // (stride * stride))
        )
        self.bias = self.param("bias", (out_ch,), zeros) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return ops.transposed_conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class MultiHeadAttention(Module):
    """Atención multi-cabeza sobre secuencias (N, L, D)."""

    def __init__(self, prefix: str, dim: int, heads: int, seed: int = 0, lazy: bool = False):
        super().__init__(prefix, seed, lazy)
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = self.child("q", Linear(self.path("q"), dim, dim, seed=seed, lazy=lazy))
        self.k_proj = self.child("k", Linear(self.path("k"), dim, dim, seed=seed, lazy=lazy))
        self.v_proj = self.child("v", Linear(self.path("v"), dim, dim, seed=seed, lazy=lazy))
        self.out_proj = self.child("out", Linear(self.path("out"), dim, dim, seed=seed, lazy=lazy))
        self.last_attention: Optional[np.ndarray] = None

    def _split(self, x: Tensor) -> Tensor:
        n, length, _ = x.shape
        return x.reshape(n, length, self.heads, self.head_dim).transpose(0, 2, 1, 3)

    def __call__(self, query: Tensor, key: Optional[Tensor] = None, value: Optional[Tensor] = None) -> Tensor:
        key = query if key is None else key
        value = key if value is None else value
        n, length, _ = query.shape
        q = self._split(self.q_proj(query))
        k = self._split(self.k_proj(key))
        v = self._split(self.v_proj(value))
        scores = ops.matmul(q, k.swapaxes(-1, -2)) * (1.0 / np.sqrt(self.head_dim))
        weights = ops.softmax(scores, axis=-1)
        self.last_attention = weights.data
        mixed = ops.matmul(weights, v).transpose(0, 2, 1, 3).reshape(n, length, self.dim)
        return self.out_proj(mixed)


class MLP(Module):
    """Dos capas afines con GELU intermedia."""

    def __init__(self, prefix: str, dim: int, hidden: int, seed: int = 0, lazy: bool = False):
        super().__init__(prefix, seed, lazy)
        self.fc1 = self.child("fc1", Linear(self.path("fc1"), dim, hidden, seed=seed, lazy=lazy))
        self.fc2 = self.child("fc2", Linear(self.path("fc2"), hidden, dim, seed=seed, lazy=lazy))

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(ops.gelu(self.fc1(x)))


def to_sequence(grid: Tensor) -> Tensor:
    """(N, C, H, W) → (N, H·W, C)."""
    n, c, h, w = grid.shape
    return grid.reshape(n, c, h * w).transpose(0, 2, 1)


def to_grid(tokens: Tensor, h: int, w: int) -> Tensor:
    """(N, H·W, C) → (N, C, H, W)."""
    n, _, c = tokens.shape
    return tokens.transpose(0, 2, 1).reshape(n, c, h, w)
