"""Pérdidas y utilidades de cajas compartidas por las cabezas."""

import itertools
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from src.models.boxes import BoxSet
from src.models.errors import ConfigError
from src.numerics import ops
from src.numerics.tensor import Tensor, as_tensor

logger = logging.getLogger(__name__)


# -- ReID -----------------------------------------------------------------------


def triplet_loss(d_p: object, d_n: object, margin: float) -> Tensor:
    """``[d_p − d_n + margin]_+`` elemento a elemento."""
    return (as_tensor(d_p) - as_tensor(d_n) + margin).clip(low=0.0)


def pairwise_distances(embeddings: Tensor) -> Tensor:
    """Distancias euclídeas (N, N) entre filas."""
    n, d = embeddings.shape
    diff = embeddings.reshape(n, 1, d) - embeddings.reshape(1, n, d)
    return ((diff * diff).sum(axis=-1) + 1e-12) ** 0.5


def batch_hard_triplet(embeddings: Tensor, labels: np.ndarray, margin: float) -> Tensor:
    """Triplet con minado duro dentro del lote (positivo más lejano, negativo más cercano).

    Las anclas sin positivo o sin negativo en el lote se ignoran; si ninguna
    es válida la pérdida es cero.
    """
    labels = np.asarray(labels)
    distances = pairwise_distances(embeddings)
    values = distances.data
    same = labels[:, None] == labels[None, :]
    eye = np.eye(labels.shape[0], dtype=bool)
    positive_mask = same & ~eye
    negative_mask = ~same

    anchors = np.flatnonzero(positive_mask.any(axis=1) & negative_mask.any(axis=1))
    if anchors.size == 0:
        logger.debug("lote sin anclas válidas para triplet (%d muestras)", labels.shape[0])
        return distances.sum() * 0.0
    hardest_positive = np.where(positive_mask, values, -np.inf)[anchors].argmax(axis=1)
    hardest_negative = np.where(negative_mask, values, np.inf)[anchors].argmin(axis=1)
    d_p = distances[anchors, hardest_positive]
    d_n = distances[anchors, hardest_negative]
    return triplet_loss(d_p, d_n, margin).mean()


# -- cajas ------------------------------------------------------------------------


def _area(box: np.ndarray) -> float:
    return float(max(box[2] - box[0], 0.0) * max(box[3] - box[1], 0.0))


def giou(a: Sequence[float], b: Sequence[float]) -> float:
    """IoU generalizada de dos cajas (x_min, y_min, x_max, y_max).

    Si la unión tiene área nula el término IoU vale 0; si además la caja
    envolvente es nula el resultado es 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    inter_w = max(min(a[2], b[2]) - max(a[0], b[0]), 0.0)
    inter_h = max(min(a[3], b[3]) - max(a[1], b[1]), 0.0)
    inter = inter_w * inter_h
    union = _area(a) + _area(b) - inter
    iou = inter / union if union > 0 else 0.0
    hull = (max(a[2], b[2]) - min(a[0], b[0])) * (max(a[3], b[3]) - min(a[1], b[1]))
    if hull <= 0:
        return 0.0
    return float(iou - (hull - union) / hull)


def iou(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    inter_w = max(min(a[2], b[2]) - max(a[0], b[0]), 0.0)
    inter_h = max(min(a[3], b[3]) - max(a[1], b[1]), 0.0)
    inter = inter_w * inter_h
    union = _area(a) + _area(b) - inter
    return float(inter / union) if union > 0 else 0.0


def _column(boxes: Tensor, index: int) -> Tensor:
    return boxes[..., index]


def giou_tensor(pred: Tensor, target: np.ndarray, eps: float = 1e-7) -> Tensor:
    """GIoU diferenciable respecto a ``pred`` para pares (M, 4)."""
    target = np.asarray(target, dtype=pred.dtype)
    px0, py0, px1, py1 = (_column(pred, i) for i in range(4))
    tx0, ty0, tx1, ty1 = (as_tensor(target[:, i]) for i in range(4))
    inter_w = (ops.minimum(px1, tx1) - ops.maximum(px0, tx0)).clip(low=0.0)
    inter_h = (ops.minimum(py1, ty1) - ops.maximum(py0, ty0)).clip(low=0.0)
    inter = inter_w * inter_h
    area_p = (px1 - px0).clip(low=0.0) * (py1 - py0).clip(low=0.0)
    area_t = (tx1 - tx0) * (ty1 - ty0)
    union = area_p + area_t - inter
    hull = (ops.maximum(px1, tx1) - ops.minimum(px0, tx0)) * (ops.maximum(py1, ty1) - ops.minimum(py0, ty0))
    return inter / (union + eps) - (hull - union) / (hull + eps)


def cxcywh_to_xyxy(boxes: Tensor) -> Tensor:
    """(cx, cy, w, h) → (x_min, y_min, x_max, y_max), recortado a [0, 1]."""
    cx, cy, w, h = (_column(boxes, i) for i in range(4))
    corners = [cx - w * 0.5, cy - h * 0.5, cx + w * 0.5, cy + h * 0.5]
    shape = cx.shape + (1,)
    stacked = ops.concatenate([c.reshape(shape) for c in corners], axis=-1)
    return stacked.clip(0.0, 1.0)


# -- emparejamiento ---------------------------------------------------------------------


@dataclass
class Assignment:
    """Pares (predicción, verdad) de coste mínimo."""

    pred_indices: np.ndarray
    gt_indices: np.ndarray
    total_cost: float

    def pairs(self) -> List[Tuple[int, int]]:
        return [(int(p), int(g)) for p, g in zip(self.pred_indices, self.gt_indices)]


def solve_assignment(cost: np.ndarray) -> Assignment:
    """Asignación inyectiva de columnas (verdades) a filas (predicciones)."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ConfigError(f"matriz de costes inválida: {cost.shape}")
    if cost.shape[1] > cost.shape[0]:
        raise ConfigError(f"{cost.shape[1]} verdades para {cost.shape[0]} predicciones")
    rows, cols = linear_sum_assignment(cost)
    order = np.argsort(cols)
    rows, cols = rows[order], cols[order]
    return Assignment(rows, cols, float(cost[rows, cols].sum()))


def brute_force_assignment(cost: np.ndarray) -> float:
    """Coste mínimo por enumeración exhaustiva (oráculo para instancias pequeñas)."""
    cost = np.asarray(cost, dtype=np.float64)
    n_pred, n_gt = cost.shape
    best = np.inf
    for chosen in itertools.permutations(range(n_pred), n_gt):
        best = min(best, float(sum(cost[p, g] for g, p in enumerate(chosen))))
    return best


def match_cost(
    pred_boxes: np.ndarray,
    pred_probs: np.ndarray,
    gt: BoxSet,
    lambda_cls: float,
    lambda_l1: float,
    lambda_iou: float,
) -> np.ndarray:
    """cost(i, j) = λ_cls·(1 − p_i(c_j)) + λ_L1·‖b_i − b_j‖₁ + λ_iou·(1 − giou(b_i, b_j))."""
    gt_boxes = gt.to_array()
    pred_boxes = np.asarray(pred_boxes, dtype=np.float64)
    probs = np.asarray(pred_probs, dtype=np.float64)
    cls_cost = 1.0 - probs[:, np.asarray(gt.classes, dtype=np.int64)]
    l1_cost = np.abs(pred_boxes[:, None, :] - gt_boxes[None, :, :]).sum(axis=-1)
    giou_cost = np.array(
        [[1.0 - giou(p, g) for g in gt_boxes] for p in pred_boxes], dtype=np.float64
    ).reshape(pred_boxes.shape[0], gt_boxes.shape[0])
    return lambda_cls * cls_cost + lambda_l1 * l1_cost + lambda_iou * giou_cost


def hungarian_match(
    pred_boxes: np.ndarray,
    pred_probs: np.ndarray,
    gt: BoxSet,
    lambda_cls: float = 2.0,
    lambda_l1: float = 5.0,
    lambda_iou: float = 2.0,
) -> Assignment:
    """Asignación de coste mínimo entre predicciones y verdades de una imagen.

    Raises:
        ConfigError: Si hay más verdades que predicciones
    """
    if len(gt) > len(pred_boxes):
        raise ConfigError(f"{len(gt)} verdades para {len(pred_boxes)} predicciones")
    if len(gt) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return Assignment(empty, empty, 0.0)
    cost = match_cost(pred_boxes, pred_probs, gt, lambda_cls, lambda_l1, lambda_iou)
    return solve_assignment(cost)


# -- agregación ----------------------------------------------------------------------------


def aggregate_loss(losses: Sequence[Tensor], weights: Sequence[float]) -> Tensor:
    """Combinación lineal ``Σ λ_i L_i``."""
    if len(losses) != len(weights):
        raise ConfigError("cada pérdida necesita su peso")
    if any(weight < 0 for weight in weights):
        raise ConfigError("los pesos de pérdida deben ser no negativos")
    total = as_tensor(0.0)
    for loss, weight in zip(losses, weights):
        total = total + as_tensor(loss) * float(weight)
    return total
