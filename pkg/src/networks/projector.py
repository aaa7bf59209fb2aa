"""Proyector por tarea: atención de canal (SE), auto-atención espacial y fusión con compuertas.

Para cada tap ``f_l`` se calcula ``z_l = A(E(f_l))`` y luego se fusiona
iterativamente ``p_l = μ_l z_l + (1 − μ_l) p_{l−1}`` con ``p_1 = z_1`` y
``μ_l = σ(α_l / T)``. Las compuertas ``α`` se inicializan en cero.
"""

from typing import List, Sequence

from src.models.enums import ShareType
from src.models.experiment import ProjectorConfig
from src.models.errors import ConfigError, DimensionError
from src.numerics import ops
from src.numerics.tensor import Tensor, as_tensor

from .backbone import FeatureTap
from .layers import LayerNorm, MultiHeadAttention, to_grid, to_sequence
from .module import Module, normal, zeros


def projector_key(share_type: ShareType, task: str, dataset: str) -> str:
    """Clave del proyector que usa un dataset según la variante de compartición."""
    if share_type is ShareType.ALL:
        return "all"
    if share_type is ShareType.TASK:
        return task
    return f"{task}.{dataset}"


def gate_values(alphas: Tensor, temperature: float) -> Tensor:
    """μ = σ(α / T) para todas las capas."""
    return ops.sigmoid(as_tensor(alphas) * (1.0 / temperature))


def gate_fuse(features: Sequence[Tensor], alphas: Tensor, temperature: float) -> Tensor:
    """Fusión convexa iterativa; ``α_1`` no interviene porque ``p_1 = z_1``."""
    if not features:
        raise DimensionError("gate_fuse requiere al menos una capa")
    shape = features[0].shape
    for z in features[1:]:
        if z.shape != shape:
            raise DimensionError(f"formas distintas entre capas: {shape} vs {z.shape}")
    mus = gate_values(alphas, temperature)
    fused = features[0]
    for index in range(1, len(features)):
        mu = mus[index]
        fused = features[index] * mu + fused * (1.0 - mu)
    return fused


class SEBlock(Module):
    """Atención de canal: convolución 1-D sobre el vector comprimido seguida de sigmoide."""

    def __init__(self, prefix: str, kernel: int = 3, seed: int = 0, lazy: bool = False):
        super().__init__(prefix, seed, lazy)
        self.kernel = kernel
        self.weight = self.param("weight", (1, 1, 1, kernel), normal(0.1))

    def attention(self, feature: Tensor) -> Tensor:
        """Pesos de canal (N, C, 1, 1) en (0, 1)."""
        n, c = feature.shape[:2]
        squeezed = feature.mean(axis=(2, 3)).reshape(n, 1, 1, c)
        mixed = ops.conv2d(squeezed, self.weight, padding=(0, self.kernel // 2))
        return ops.sigmoid(mixed).reshape(n, c, 1, 1)

    def __call__(self, feature: Tensor) -> Tensor:
        return feature * self.attention(feature)


class ProjectorLayer(Module):
    """``z_l = A(E(f_l))`` con auto-atención pre-norm y residual."""

    def __init__(self, prefix: str, dim: int, config: ProjectorConfig, seed: int = 0, lazy: bool = False):
        super().__init__(prefix, seed, lazy)
        self.se = self.child("se", SEBlock(self.path("se"), config.se_kernel, seed=seed, lazy=lazy))
        self.norm = self.child("norm", LayerNorm(self.path("norm"), dim, seed=seed, lazy=lazy))
        self.attn = self.child(
            "attn", MultiHeadAttention(self.path("attn"), dim, config.attention_heads, seed=seed, lazy=lazy)
        )

    def __call__(self, feature: Tensor) -> Tensor:
        _, _, h, w = feature.shape
        tokens = to_sequence(self.se(feature))
        tokens = tokens + self.attn(self.norm(tokens))
        return to_grid(tokens, h, w)


class TaskProjector(Module):
    """Un proyector: una capa por tap y un vector de compuertas."""

    def __init__(self, key: str, dim: int, num_layers: int, config: ProjectorConfig, seed: int = 0,
                 lazy: bool = False):
        super().__init__(f"projector.{key}", seed, lazy)
        self.key = key
        self.temperature = config.temperature
        self.layers: List[ProjectorLayer] = [
            self.child(str(index), ProjectorLayer(self.path(str(index)), dim, config, seed=seed, lazy=lazy))
            for index in range(1, num_layers + 1)
        ]
        self.gates = self.param("gates", (num_layers,), zeros)

    def se_block(self, feature: Tensor, layer: int = 1) -> Tensor:
        return self.layers[layer - 1].se(feature)

    def project_layer(self, feature: Tensor, layer: int = 1) -> Tensor:
        return self.layers[layer - 1](feature)

    def gate_fuse(self, features: Sequence[Tensor]) -> Tensor:
        return gate_fuse(features, self.gates, self.temperature)

    def gate_values(self) -> Tensor:
        return gate_values(self.gates, self.temperature)

    def __call__(self, taps: FeatureTap) -> Tensor:
        """Devuelve la característica de tarea ``p = p_L``."""
        self.require_initialized()
        if len(taps) != len(self.layers):
            raise ConfigError(f"el proyector '{self.key}' espera {len(self.layers)} taps, recibió {len(taps)}")
        projected = [layer(tap) for layer, tap in zip(self.layers, taps.maps)]
        return self.gate_fuse(projected)

    projector_forward = __call__
