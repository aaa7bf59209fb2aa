"""Métricas de evaluación por familia de tarea.

Todas son funciones puras sobre arreglos numpy. Los rangos documentados:
mAP, Top1, mIoU, pACC, PCK, mA y AP en [0, 1]; EPE, MAE y RMSE ≥ 0.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.models.boxes import BoxSet
from src.models.errors import DimensionError
from src.networks.losses import iou

logger = logging.getLogger(__name__)


# -- ReID ---------------------------------------------------------------------------


def average_precision(relevance: Sequence[bool]) -> float:
    """AP de una lista ordenada: media de la precisión en cada acierto."""
    hits = np.asarray(relevance, dtype=bool)
    if not hits.any():
        return 0.0
    ranks = np.flatnonzero(hits) + 1
    precisions = np.arange(1, len(ranks) + 1) / ranks
    return float(precisions.mean())


def cosine_distances(query: np.ndarray, gallery: np.ndarray) -> np.ndarray:
    q = query / np.maximum(np.linalg.norm(query, axis=1, keepdims=True), 1e-12)
    g = gallery / np.maximum(np.linalg.norm(gallery, axis=1, keepdims=True), 1e-12)
    return 1.0 - q @ g.T


def reid_map_top1(
    query: np.ndarray,
    gallery: np.ndarray,
    query_ids: Sequence[int],
    gallery_ids: Sequence[int],
) -> Tuple[float, float]:
    """mAP y Top1 con ranking por distancia coseno.

    Las consultas sin ningún elemento relevante en la galería se excluyen.

    Returns:
        Tuple[float, float]: (mAP, Top1); (0, 0) si no queda ninguna consulta
    """
    query_ids = np.asarray(query_ids)
    gallery_ids = np.asarray(gallery_ids)
    distances = cosine_distances(np.asarray(query, dtype=np.float64), np.asarray(gallery, dtype=np.float64))
    aps, tops = [], []
    for row, identity in zip(distances, query_ids):
        relevant = gallery_ids[np.argsort(row, kind="stable")] == identity
        if not relevant.any():
            continue
        aps.append(average_precision(relevant))
        tops.append(float(relevant[0]))
    excluded = len(query_ids) - len(aps)
    if excluded:
        logger.warning("reid: %d consultas sin elementos relevantes excluidas", excluded)
    if not aps:
        return 0.0, 0.0
    return float(np.mean(aps)), float(np.mean(tops))


# -- parsing -----------------------------------------------------------------------


def confusion_matrix(pred: np.ndarray, gt: np.ndarray, num_classes: int) -> np.ndarray:
    """Matriz (gt, pred) de conteos."""
    pred = np.asarray(pred, dtype=np.int64).reshape(-1)
    gt = np.asarray(gt, dtype=np.int64).reshape(-1)
    return np.bincount(gt * num_classes + pred, minlength=num_classes * num_classes).reshape(num_classes, num_classes)


def miou_pacc(pred: np.ndarray, gt: np.ndarray, num_classes: int) -> Tuple[float, float]:
    """mIoU sobre las clases presentes en gt ∪ pred, y exactitud por píxel.

    Raises:
        DimensionError: Si las formas difieren
    """
    if np.shape(pred) != np.shape(gt):
        raise DimensionError(f"formas distintas: {np.shape(pred)} vs {np.shape(gt)}")
    matrix = confusion_matrix(pred, gt, num_classes).astype(np.float64)
    intersection = np.diag(matrix)
    union = matrix.sum(axis=0) + matrix.sum(axis=1) - intersection
    present = union > 0
    miou = float((intersection[present] / union[present]).mean()) if present.any() else 1.0
    total = matrix.sum()
    pacc = float(intersection.sum() / total) if total else 1.0
    return miou, pacc


# -- pose ----------------------------------------------------------------------------


def heatmap_peaks(heatmaps: np.ndarray, image_hw: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """Coordenadas (x, y) en píxeles de imagen del máximo de cada mapa.

    Un mapa todo ceros produce (0, 0) con advertencia.
    """
    heatmaps = np.asarray(heatmaps, dtype=np.float64)
    h, w = heatmaps.shape[-2:]
    image_hw = image_hw or (h, w)
    flat = heatmaps.reshape(heatmaps.shape[:-2] + (h * w,))
    rows, cols = np.divmod(flat.argmax(axis=-1), w)
    sy, sx = h / image_hw[0], w / image_hw[1]
    points = np.stack([(cols + 0.5) / sx - 0.5, (rows + 0.5) / sy - 0.5], axis=-1)
    empty = ~np.any(flat != 0, axis=-1)
    if empty.any():
        logger.warning("pose: %d mapas de calor vacíos, keypoint en (0, 0)", int(empty.sum()))
        points[empty] = 0.0
    return points


def pose_pck_epe(
    heatmaps: np.ndarray,
    keypoints: np.ndarray,
    threshold: float,
    image_hw: Optional[Tuple[int, int]] = None,
) -> Tuple[float, float]:
    """PCK con umbral en píxeles y error medio de punto final (EPE)."""
    predicted = heatmap_peaks(heatmaps, image_hw)
    errors = np.linalg.norm(predicted - np.asarray(keypoints, dtype=np.float64), axis=-1)
    return float((errors <= threshold).mean()), float(errors.mean())


# -- atributos ------------------------------------------------------------------------


def attribute_ma(probs: np.ndarray, gt: np.ndarray, threshold: float = 0.5) -> float:
    """Exactitud media: promedio de (TPR + TNR) / 2 por atributo."""
    predicted = np.asarray(probs) >= threshold
    truth = np.asarray(gt).astype(bool)
    scores = []
    for column in range(truth.shape[1]):
        p, g = predicted[:, column], truth[:, column]
        positives, negatives = g.sum(), (~g).sum()
        if positives == 0 or negatives == 0:
            logger.warning("atributo %d sin positivos o sin negativos en gt", column)
        tpr = (p & g).sum() / positives if positives else 1.0
        tnr = (~p & ~g).sum() / negatives if negatives else 1.0
        scores.append((tpr + tnr) / 2.0)
    return float(np.mean(scores))


# -- detección ----------------------------------------------------------------------


def interpolated_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    """Área bajo la curva PR con la envolvente de precisión (todos los puntos)."""
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    changes = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[changes + 1] - mrec[changes]) * mpre[changes + 1]))


def detection_ap50(
    predictions: Sequence[BoxSet],
    ground_truth: Sequence[BoxSet],
    iou_threshold: float = 0.5,
) -> Optional[float]:
    """AP con IoU 0.5 y asignación voraz por puntuación.

    Cada detección se compara con la caja de gt de mayor IoU y misma clase en
    su imagen; si esa caja ya fue asignada, la detección es un falso positivo.

    Returns:
        Optional[float]: AP, o None si no hay cajas de gt
    """
    total_gt = sum(len(gt) for gt in ground_truth)
    if total_gt == 0:
        return None
    detections: List[Tuple[float, int, int]] = []
    for image, pred in enumerate(predictions):
        scores = pred.scores if pred.scores is not None else [1.0] * len(pred)
        detections += [(-float(score), image, index) for index, score in enumerate(scores)]
    detections.sort()

    matched = [np.zeros(len(gt), dtype=bool) for gt in ground_truth]
    tp = np.zeros(len(detections))
    for rank, (_, image, index) in enumerate(detections):
        gt = ground_truth[image]
        box = predictions[image].boxes[index]
        label = predictions[image].classes[index]
        candidates = [g for g in range(len(gt)) if gt.classes[g] == label]
        if not candidates:
            continue
        overlaps = [iou(np.asarray(box), np.asarray(gt.boxes[g])) for g in candidates]
        best = int(np.argmax(overlaps))
        if overlaps[best] >= iou_threshold and not matched[image][candidates[best]]:
            matched[image][candidates[best]] = True
            tp[rank] = 1.0
    cumulative_tp = np.cumsum(tp)
    recall = cumulative_tp / total_gt
    precision = cumulative_tp / np.arange(1, len(detections) + 1)
    return interpolated_ap(recall, precision)


# -- conteo ------------------------------------------------------------------------------


def counting_errors(pred: Sequence[float], gt: Sequence[float]) -> Tuple[float, float]:
    """MAE y RMSE de los conteos."""
    errors = np.asarray(pred, dtype=np.float64) - np.asarray(gt, dtype=np.float64)
    return float(np.abs(errors).mean()), float(np.sqrt(np.square(errors).mean()))
