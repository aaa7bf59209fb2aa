"""Backbone ViT compartido por todos los datasets.

Emite los mapas intermedios (taps) que consumen los proyectores. El embedding
posicional vive en la rejilla canónica y se interpola bilinealmente
(align_corners=True) a la rejilla de tokens de cada entrada en cada forward.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from src.models.experiment import BackboneConfig
from src.models.errors import ConfigError, GeometryError
from src.numerics import ops
from src.numerics.tensor import Parameter, Tensor, as_tensor

from .layers import MLP, Conv2d, LayerNorm, MultiHeadAttention, to_grid, to_sequence
from .module import Module, normal

logger = logging.getLogger(__name__)

SHARED_POS_KEY = ""


@dataclass
class FeatureTap:
    """Mapas (N, C, h, w) de los bloques leídos, en orden creciente de bloque."""

    layers: List[int]
    maps: List[Tensor] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.maps)

    def __getitem__(self, index: int) -> Tensor:
        return self.maps[index]


class TransformerBlock(Module):
    """Bloque pre-norm: atención multi-cabeza y MLP con residuales."""

    def __init__(self, prefix: str, dim: int, heads: int, mlp_ratio: int, final_norm: bool = False,
                 seed: int = 0, lazy: bool = False):
        super().__init__(prefix, seed, lazy)
        self.norm1 = self.child("norm1", LayerNorm(self.path("norm1"), dim, seed=seed, lazy=lazy))
        self.attn = self.child("attn", MultiHeadAttention(self.path("attn"), dim, heads, seed=seed, lazy=lazy))
        self.norm2 = self.child("norm2", LayerNorm(self.path("norm2"), dim, seed=seed, lazy=lazy))
        self.mlp = self.child("mlp", MLP(self.path("mlp"), dim, dim * mlp_ratio, seed=seed, lazy=lazy))
        # La norma final del backbone pertenece al último bloque
        self.final_norm = (
            self.child("final_norm", LayerNorm(self.path("final_norm"), dim, seed=seed, lazy=lazy))
            if final_norm
            else None
        )

    def __call__(self, tokens: Tensor) -> Tensor:
        tokens = tokens + self.attn(self.norm1(tokens))
        tokens = tokens + self.mlp(self.norm2(tokens))
        if self.final_norm is not None:
            tokens = self.final_norm(tokens)
        return tokens


class VisionTransformer(Module):
    """ViT plano sin token de clase."""

    def __init__(self, config: BackboneConfig, tasks: Sequence[str] = (), seed: int = 0, lazy: bool = False):
        """Inicializa el backbone.

        Args:
            config: Geometría del backbone
            tasks: Tareas de preentrenamiento; con embedding no compartido se
                crea uno por tarea
            seed: Semilla de inicialización
            lazy: Difiere la inicialización (carga de checkpoints)
        """
        super().__init__("backbone", seed, lazy)
        self.config = config
        dim = config.embed_dim
        grid = config.canonical_grid
        self.patch_embed = self.child(
            "patch_embed",
            Conv2d(self.path("patch_embed"), 3, dim, config.patch_size, stride=config.patch_size,
                   seed=seed, lazy=lazy),
        )
        self.pos_embeds: Dict[str, Parameter] = {}
        if config.pos_embed_shared:
            self.pos_embeds[SHARED_POS_KEY] = self.param("pos_embed", (dim, grid, grid), normal(0.02))
        else:
            for task in tasks:
                self.pos_embeds[task] = self.param(f"pos_embed.{task}", (dim, grid, grid), normal(0.02))
        self.blocks: List[TransformerBlock] = []
        for index in range(1, config.depth + 1):
            block = TransformerBlock(
                self.path(f"blocks.{index}"), dim, config.heads, config.mlp_ratio,
                final_norm=index == config.depth, seed=seed, lazy=lazy,
            )
            self.blocks.append(self.child(f"blocks.{index}", block))

    # -- geometría ---------------------------------------------------------------

    def token_grid(self, input_h: int, input_w: int) -> Tuple[int, int]:
        patch = self.config.patch_size
        if input_h % patch or input_w % patch:
            raise GeometryError(f"la imagen {input_h}x{input_w} no es divisible por el parche {patch}")
        return input_h // patch, input_w // patch

    def pos_embed_parameter(self, task: Optional[str] = None) -> Parameter:
        if self.config.pos_embed_shared:
            return self.pos_embeds[SHARED_POS_KEY]
        if task is None or task not in self.pos_embeds:
            raise ConfigError(f"no hay embedding posicional para la tarea '{task}'")
        return self.pos_embeds[task]

    # -- operaciones ------------------------------------------------------------------

    def patch_embed_tokens(self, image: Tensor) -> Tensor:
        """Imagen NCHW → rejilla de tokens (N, C, h, w)."""
        image = as_tensor(image)
        if image.ndim != 4:
            raise GeometryError(f"se espera una imagen NCHW, forma {image.shape}")
        self.token_grid(image.shape[2], image.shape[3])
        return self.patch_embed(image)

    def positional_embedding_for(self, input_h: int, input_w: int, task: Optional[str] = None) -> Tensor:
        """Embedding (C, h, w) interpolado a la rejilla de tokens de la entrada."""
        h, w = self.token_grid(input_h, input_w)
        if (h, w) != (self.config.canonical_grid,) * 2:
            logger.debug("embedding posicional interpolado a %dx%d", h, w)
        return ops.bilinear_resize(self.pos_embed_parameter(task), h, w, align_corners=True)

    def forward_features(self, image: Tensor, task: Optional[str] = None) -> Tuple[Tensor, FeatureTap]:
        """Extrae el mapa final y los taps configurados.

        Returns:
            (mapa final (N, C, h, w), FeatureTap)
        """
        self.require_initialized()
        image = as_tensor(image)
        grid = self.patch_embed_tokens(image)
        _, _, h, w = grid.shape
        pos = self.positional_embedding_for(image.shape[2], image.shape[3], task)
        tokens = to_sequence(grid + pos.reshape(1, *pos.shape))

        taps = FeatureTap(layers=self.config.taps)
        wanted = set(taps.layers)
        for index, block in enumerate(self.blocks, start=1):
            tokens = block(tokens)
            if index in wanted:
                taps.maps.append(to_grid(tokens, h, w))
        final = taps.maps[-1] if taps.layers[-1] == self.config.depth else to_grid(tokens, h, w)
        return final, taps

    def block_index(self, name: str) -> int:
        """Profundidad de un parámetro: 0 embedding, 1..L bloques."""
        prefix = self.path("blocks.")
        if name.startswith(prefix):
            return int(name[len(prefix):].split(".", 1)[0])
        return 0
