"""Cabeza de detección con consultas ancladas y predicción de conjuntos.

Cada capa del decodificador aplica atención cruzada, auto-atención entre
consultas y FFN, con normalización posterior. Las posiciones de las consultas
y de los tokens son proyecciones lineales de sus coordenadas.
"""

import logging
from typing import Any, Dict, List

import numpy as np

from src.models.boxes import BoxSet
from src.models.enums import TaskFamily
from src.models.experiment import HeadConfig
from src.models.errors import ConfigError
from src.numerics import ops
from src.numerics.tensor import Tensor

from ..layers import MLP, LayerNorm, Linear, MultiHeadAttention, to_sequence
from ..losses import cxcywh_to_xyxy, giou_tensor, hungarian_match
from ..module import Module, uniform
from .base import Labels, TaskHead

logger = logging.getLogger(__name__)


def token_coordinates(h: int, w: int) -> np.ndarray:
    """Centros normalizados (h·w, 2) en orden fila-mayor, como (x, y)."""
    ys, xs = np.meshgrid((np.arange(h) + 0.5) / h, (np.arange(w) + 0.5) / w, indexing="ij")
    return np.stack([xs.reshape(-1), ys.reshape(-1)], axis=1).astype(np.float32)


class DecoderLayer(Module):
    """Atención cruzada → auto-atención → FFN, cada una con residual y LayerNorm."""

    def __init__(self, prefix: str, dim: int, heads: int, seed: int = 0, lazy: bool = False):
        super().__init__(prefix, seed, lazy)
        self.cross = self.child("cross", MultiHeadAttention(self.path("cross"), dim, heads, seed=seed, lazy=lazy))
        self.norm1 = self.child("norm1", LayerNorm(self.path("norm1"), dim, seed=seed, lazy=lazy))
        self.self_attn = self.child(
            "self_attn", MultiHeadAttention(self.path("self_attn"), dim, heads, seed=seed, lazy=lazy)
        )
        self.norm2 = self.child("norm2", LayerNorm(self.path("norm2"), dim, seed=seed, lazy=lazy))
        self.ffn = self.child("ffn", MLP(self.path("ffn"), dim, dim * 2, seed=seed, lazy=lazy))
        self.norm3 = self.child("norm3", LayerNorm(self.path("norm3"), dim, seed=seed, lazy=lazy))

    def __call__(self, content: Tensor, query_pos: Tensor, memory: Tensor, memory_pos: Tensor) -> Tensor:
        content = self.norm1(content + self.cross(content + query_pos, memory + memory_pos, memory))
        positioned = content + query_pos
        content = self.norm2(content + self.self_attn(positioned, positioned, content))
        return self.norm3(content + self.ffn(content))


class DetectionHead(TaskHead):
    """Q consultas → (logits de clase con clase vacía, cajas normalizadas)."""

    family = TaskFamily.DETECTION

    def __init__(self, task: str, dataset: str, dim: int, config: HeadConfig, seed: int = 0,
                 lazy: bool = False, heads: int = 1):
        super().__init__(task, dataset, dim, config, seed, lazy)
        if config.num_queries < 1:
            raise ConfigError("detección requiere al menos una consulta")
        self.num_queries = config.num_queries
        self.num_classes = config.num_classes
        self.anchors = self.param("anchors", (config.num_queries, 2), uniform(0.0, 1.0))
        self.pos_proj = self.child("pos_proj", Linear(self.path("pos_proj"), 2, dim, seed=seed, lazy=lazy))
        self.layers: List[DecoderLayer] = [
            self.child(f"decoder.{index}",
                       DecoderLayer(self.path(f"decoder.{index}"), dim, heads, seed=seed, lazy=lazy))
            for index in range(1, config.decoder_layers + 1)
        ]
        self.class_head = self.child(
            "cls", Linear(self.path("cls"), dim, config.num_classes + 1, seed=seed, lazy=lazy)
        )
        self.box_head = self.child("bbox", Linear(self.path("bbox"), dim, 4, seed=seed, lazy=lazy, gain=0.1))

    def decode(self, feature: Tensor) -> Tensor:
        """Contenido final de las consultas (N, Q, C)."""
        n, c, h, w = feature.shape
        memory = to_sequence(feature)
        memory_pos = self.pos_proj(Tensor(token_coordinates(h, w).astype(feature.dtype)))
        query_pos = self.pos_proj(self.anchors)
        content = Tensor(np.zeros((n, self.num_queries, c), dtype=feature.dtype))
        for layer in self.layers:
            content = layer(content, query_pos, memory, memory_pos)
        return content

    def __call__(self, feature: Tensor, image_hw: tuple) -> Dict[str, Tensor]:
        content = self.decode(feature)
        logits = self.class_head(content)
        raw = self.box_head(content)
        anchors = self.anchors.clip(1e-4, 1.0 - 1e-4)
        anchor_logit = (anchors / (1.0 - anchors)).log()
        centers = ops.sigmoid(raw[..., 0:2] + anchor_logit)
        sizes = ops.sigmoid(raw[..., 2:4])
        boxes = cxcywh_to_xyxy(ops.concatenate([centers, sizes], axis=-1))
        return {"logits": logits, "boxes": boxes}

    def loss(self, output: Dict[str, Tensor], labels: Labels) -> Tensor:
        logits, boxes = output["logits"], output["boxes"]
        ground_truth: List[BoxSet] = labels["boxes"]
        n, q, _ = logits.shape
        no_object = self.num_classes
        targets = np.full((n, q), no_object, dtype=np.int64)
        weights = np.full((n, q), self.config.no_object_weight, dtype=np.float64)
        batch_idx: List[int] = []
        pred_idx: List[int] = []
        gt_boxes: List[np.ndarray] = []

        probs = ops.softmax(logits.detach(), axis=-1).data
        for b, gt in enumerate(ground_truth):
            if len(gt) == 0:
                logger.debug("imagen %d sin cajas: todas las consultas son fondo", b)
                continue
            assignment = hungarian_match(
                boxes.data[b], probs[b, :, :no_object], gt,
                self.config.lambda_cls, self.config.lambda_l1, self.config.lambda_iou,
            )
            gt_array = gt.to_array()
            for p, g in assignment.pairs():
                targets[b, p] = gt.classes[g]
                weights[b, p] = 1.0
                batch_idx.append(b)
                pred_idx.append(p)
                gt_boxes.append(gt_array[g])

        total = ops.cross_entropy(logits, targets, axis=-1, weights=weights) * self.config.lambda_cls
        if batch_idx:
            num_boxes = float(len(batch_idx))
            matched = boxes[np.asarray(batch_idx), np.asarray(pred_idx)]
            target_boxes = np.stack(gt_boxes).astype(matched.dtype)
            l1 = (matched - target_boxes).abs().sum() * (1.0 / num_boxes)
            generalized = (1.0 - giou_tensor(matched, target_boxes)).sum() * (1.0 / num_boxes)
            total = total + l1 * self.config.lambda_l1 + generalized * self.config.lambda_iou
        return total

    def predict(self, output: Dict[str, Tensor]) -> Dict[str, Any]:
        probs = ops.softmax(output["logits"].detach(), axis=-1).data[..., : self.num_classes]
        return {
            "boxes": output["boxes"].data.astype(np.float64),
            "scores": probs.max(axis=-1).astype(np.float64),
            "classes": probs.argmax(axis=-1),
        }
