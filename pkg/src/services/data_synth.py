"""Generadores sintéticos deterministas para las seis familias de tareas.

Las imágenes son figuras de colores (rectángulo, elipse, triángulo) sobre
fondo oscuro con ruido; las etiquetas se derivan de los parámetros de
renderizado. Cada generador es función pura de (familia, semilla, n, split).

Formato de exportación (un directorio por dataset):
    meta.json       familia, semilla, split, tamaño de imagen y de mapas
    images/NNNNNN.f32   imagen (3, H, W) en float32 little-endian
    labels.jsonl    un registro JSON por muestra, en orden
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.models.boxes import BoxSet
from src.models.enums import Split, TaskFamily
from src.models.errors import ConfigError
from src.models.experiment import DatasetSpec, HeadConfig

logger = logging.getLogger(__name__)

PALETTE = np.array(
    [
        [0.95, 0.20, 0.20],
        [0.20, 0.85, 0.25],
        [0.25, 0.35, 0.95],
        [0.95, 0.85, 0.20],
        [0.85, 0.25, 0.90],
        [0.20, 0.90, 0.90],
    ],
    dtype=np.float64,
)
SHAPES = ("rectangle", "ellipse", "triangle")
FAMILY_INDEX = {family: index for index, family in enumerate(TaskFamily)}
SPLIT_INDEX = {split: index for index, split in enumerate(Split)}
NOISE_STD = 0.05
MAX_BLOBS = 5
MAX_OBJECTS = 3

Sample = Dict[str, Any]
Size = Tuple[int, int]
Point = Tuple[float, float]
Rendered = Tuple[np.ndarray, Sample]


# -- renderizado ---------------------------------------------------------------


def shape_mask(kind: int, center: Point, half: Point, hw: Size) -> np.ndarray:
    """Máscara booleana (H, W) de una figura sobre los centros de píxel."""
    cy, cx = center
    hh, hwid = half
    ys, xs = np.meshgrid(np.arange(hw[0], dtype=np.float64), np.arange(hw[1], dtype=np.float64), indexing="ij")
    if SHAPES[kind] == "rectangle":
        return (np.abs(ys - cy) <= hh) & (np.abs(xs - cx) <= hwid)
    if SHAPES[kind] == "ellipse":
        return ((ys - cy) / hh) ** 2 + ((xs - cx) / hwid) ** 2 <= 1.0
    rise = np.clip((ys - (cy - hh)) / (2.0 * hh), 0.0, 1.0)
    return (ys >= cy - hh) & (ys <= cy + hh) & (np.abs(xs - cx) <= hwid * rise)


def gaussian(center: Point, sigma: float, hw: Size) -> np.ndarray:
    ys, xs = np.meshgrid(np.arange(hw[0], dtype=np.float64), np.arange(hw[1], dtype=np.float64), indexing="ij")
    return np.exp(-((ys - center[0]) ** 2 + (xs - center[1]) ** 2) / (2.0 * sigma**2))


def to_map_coords(point: Point, image_hw: Size, map_hw: Size) -> Point:
    """Convierte (y, x) de píxeles de imagen a píxeles del mapa (centros alineados)."""
    sy, sx = map_hw[0] / image_hw[0], map_hw[1] / image_hw[1]
    return (point[0] + 0.5) * sy - 0.5, (point[1] + 0.5) * sx - 0.5


def map_size(image_hw: Size, patch_size: int) -> Size:
    """Resolución de los mapas densos: cuatro veces la rejilla de tokens."""
    return 4 * image_hw[0] // patch_size, 4 * image_hw[1] // patch_size


def _background(rng: np.random.Generator, hw: Size) -> np.ndarray:
    base = rng.uniform(0.0, 0.2, size=3)
    return np.broadcast_to(base[:, None, None], (3,) + hw).copy()


def _paint(image: np.ndarray, mask: np.ndarray, color: np.ndarray) -> None:
    image[:, mask] = color[:, None]


def _finish(image: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    noisy = image + rng.normal(0.0, NOISE_STD, size=image.shape)
    return np.clip(noisy, 0.0, 1.0).astype(np.float32)


def _random_shape(rng: np.random.Generator, hw: Size, scale: Point) -> Tuple[Point, Point]:
    hh = rng.uniform(*scale) * hw[0] / 2.0
    hwid = rng.uniform(*scale) * hw[1] / 2.0
    cy = rng.uniform(hh, hw[0] - 1 - hh)
    cx = rng.uniform(hwid, hw[1] - 1 - hwid)
    return (cy, cx), (max(hh, 1.5), max(hwid, 1.5))


# -- generadores por familia ------------------------------------------------------


def _render_reid(rng: np.random.Generator, hw: Size, head: HeadConfig, map_hw: Size) -> Rendered:
    identity = int(rng.integers(head.num_classes))
    color, kind = PALETTE[identity % len(PALETTE)], identity // len(PALETTE)
    center = (hw[0] / 2.0 + rng.uniform(-2, 2), hw[1] / 2.0 + rng.uniform(-2, 2))
    half = (hw[0] * rng.uniform(0.3, 0.4), hw[1] * rng.uniform(0.3, 0.4))
    image = _background(rng, hw)
    _paint(image, shape_mask(kind, center, half, hw), color)
    return _finish(image, rng), {"identity": identity}


def _render_pose(rng: np.random.Generator, hw: Size, head: HeadConfig, map_hw: Size) -> Rendered:
    image = _background(rng, hw)
    keypoints = np.zeros((head.num_keypoints, 2), dtype=np.float64)
    heatmaps = np.zeros((head.num_keypoints,) + map_hw, dtype=np.float32)
    for k in range(head.num_keypoints):
        y = float(rng.integers(2, hw[0] - 2))
        x = float(rng.integers(2, hw[1] - 2))
        keypoints[k] = (x, y)
        _paint(image, gaussian((y, x), 1.0, hw) > 0.3, PALETTE[k % len(PALETTE)])
        heatmaps[k] = gaussian(to_map_coords((y, x), hw, map_hw), 1.0, map_hw)
    return _finish(image, rng), {"keypoints": keypoints, "heatmaps": heatmaps}


def _render_parsing(rng: np.random.Generator, hw: Size, head: HeadConfig, map_hw: Size) -> Rendered:
    image = _background(rng, hw)
    mask = np.zeros(hw, dtype=np.int64)
    if head.num_classes > 1:
        for _ in range(int(rng.integers(1, MAX_OBJECTS + 1))):
            kind = int(rng.integers(len(SHAPES)))
            label = 1 + kind % (head.num_classes - 1)
            region = shape_mask(kind, *_random_shape(rng, hw, (0.25, 0.5)), hw)
            _paint(image, region, PALETTE[label % len(PALETTE)])
            mask[region] = label
    return _finish(image, rng), {"mask": mask}


def _render_attribute(rng: np.random.Generator, hw: Size, head: HeadConfig, map_hw: Size) -> Rendered:
    attributes = rng.integers(0, 2, size=head.num_classes).astype(np.float32)
    side = math.ceil(math.sqrt(head.num_classes))
    cell_h, cell_w = hw[0] // side, hw[1] // side
    image = _background(rng, hw)
    for index, bit in enumerate(attributes):
        if bit:
            row, col = divmod(index, side)
            rows = slice(row * cell_h, (row + 1) * cell_h)
            cols = slice(col * cell_w, (col + 1) * cell_w)
            image[:, rows, cols] = PALETTE[index % len(PALETTE)][:, None, None]
    return _finish(image, rng), {"attributes": attributes}


def _render_detection(rng: np.random.Generator, hw: Size, head: HeadConfig, map_hw: Size) -> Rendered:
    image = _background(rng, hw)
    boxes, classes = [], []
    for _ in range(int(rng.integers(1, min(MAX_OBJECTS, head.num_queries) + 1))):
        kind = int(rng.integers(len(SHAPES)))
        region = shape_mask(kind, *_random_shape(rng, hw, (0.2, 0.45)), hw)
        if not region.any():
            continue
        _paint(image, region, PALETTE[kind % len(PALETTE)])
        rows, cols = np.nonzero(region)
        boxes.append((cols.min() / hw[1], rows.min() / hw[0], (cols.max() + 1) / hw[1], (rows.max() + 1) / hw[0]))
        classes.append(kind % head.num_classes)
    return _finish(image, rng), {"boxes": BoxSet(boxes=boxes, classes=classes)}


def _render_counting(rng: np.random.Generator, hw: Size, head: HeadConfig, map_hw: Size) -> Rendered:
    image = _background(rng, hw)
    density = np.zeros((1,) + map_hw, dtype=np.float64)
    count = int(rng.integers(0, MAX_BLOBS + 1))
    for _ in range(count):
        y, x = rng.uniform(1.0, hw[0] - 2.0), rng.uniform(1.0, hw[1] - 2.0)
        spot = gaussian((y, x), 1.5, hw)
        image = np.maximum(image, spot[None] * 0.9)
        blob = gaussian(to_map_coords((y, x), hw, map_hw), 1.5 * map_hw[0] / hw[0], map_hw)
        density[0] += blob / blob.sum()
    return _finish(image, rng), {"density": density.astype(np.float32), "count": float(count)}


RENDERERS: Dict[TaskFamily, Callable[..., Tuple[np.ndarray, Sample]]] = {
    TaskFamily.REID: _render_reid,
    TaskFamily.POSE: _render_pose,
    TaskFamily.PARSING: _render_parsing,
    TaskFamily.ATTRIBUTE: _render_attribute,
    TaskFamily.DETECTION: _render_detection,
    TaskFamily.COUNTING: _render_counting,
}


# -- volteo horizontal ---------------------------------------------------------------


def flip_sample(family: TaskFamily, image: np.ndarray, label: Sample) -> Tuple[np.ndarray, Sample]:
    """Voltea horizontalmente una muestra y su etiqueta de forma coherente."""
    width = image.shape[-1]
    flipped = dict(label)
    if family is TaskFamily.POSE:
        keypoints = np.array(label["keypoints"], dtype=np.float64)
        keypoints[:, 0] = width - 1 - keypoints[:, 0]
        flipped["keypoints"] = keypoints
        flipped["heatmaps"] = np.ascontiguousarray(label["heatmaps"][..., ::-1])
    elif family is TaskFamily.PARSING:
        flipped["mask"] = np.ascontiguousarray(label["mask"][:, ::-1])
    elif family is TaskFamily.DETECTION:
        flipped["boxes"] = label["boxes"].flipped()
    elif family is TaskFamily.COUNTING:
        flipped["density"] = np.ascontiguousarray(label["density"][..., ::-1])
    return np.ascontiguousarray(image[..., ::-1]), flipped


# -- dataset ----------------------------------------------------------------------


@dataclass
class SyntheticDataset:
    """Muestras renderizadas (imagen, etiqueta) de una familia."""

    family: TaskFamily
    seed: int
    split: Split
    image_size: Tuple[int, int]
    map_size: Tuple[int, int]
    images: np.ndarray
    labels: List[Sample] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.labels)

    def sample(self, index: int) -> Tuple[np.ndarray, Sample]:
        return self.images[index], self.labels[index]

    def batch(self, indices: Sequence[int], flips: Optional[Sequence[bool]] = None) -> Tuple[np.ndarray, Sample]:
        """Lote (imágenes, etiquetas agrupadas) para las cabezas.

        Args:
            indices: Índices de las muestras
            flips: Volteo horizontal por muestra (opcional)
        """
        images, labels = [], []
        for position, index in enumerate(indices):
            image, label = self.sample(int(index))
            if flips is not None and flips[position]:
                image, label = flip_sample(self.family, image, label)
            images.append(image)
            labels.append(label)
        return np.stack(images).astype(np.float32), collate(self.family, labels)


def collate(family: TaskFamily, labels: Sequence[Sample]) -> Sample:
    """Agrupa etiquetas por muestra en el formato por lote de cada cabeza."""
    if family is TaskFamily.REID:
        return {"identity": np.array([label["identity"] for label in labels], dtype=np.int64)}
    if family is TaskFamily.POSE:
        return {
            "keypoints": np.stack([label["keypoints"] for label in labels]),
            "heatmaps": np.stack([label["heatmaps"] for label in labels]),
        }
    if family is TaskFamily.PARSING:
        return {"mask": np.stack([label["mask"] for label in labels])}
    if family is TaskFamily.ATTRIBUTE:
        return {"attributes": np.stack([label["attributes"] for label in labels])}
    if family is TaskFamily.DETECTION:
        return {"boxes": [label["boxes"] for label in labels]}
    return {
        "density": np.stack([label["density"] for label in labels]),
        "count": np.array([label["count"] for label in labels], dtype=np.float64),
    }


def generate(
    family: Union[TaskFamily, str],
    seed: int,
    n: int,
    split: Split = Split.PRETRAIN,
    image_size: Optional[Tuple[int, int]] = None,
    head: Optional[HeadConfig] = None,
    patch_size: int = 4,
) -> SyntheticDataset:
    """Genera un dataset sintético.

    Args:
        family: Familia de tarea
        seed: Semilla del generador
        n: Número de muestras
        split: Partición (cambia el flujo aleatorio)
        image_size: (H, W); por defecto 48×32 para ReID y 32×32 para el resto
        head: Aridades de la cabeza (clases, keypoints, consultas)
        patch_size: Parche del backbone, fija la resolución de los mapas densos

    Returns:
        SyntheticDataset: Muestras en orden de generación

    Raises:
        ConfigError: Familia desconocida, ``n`` < 1 o aridades incompatibles
    """
    try:
        family = TaskFamily(family)
    except ValueError as exc:
        raise ConfigError(f"familia desconocida: {family}") from exc
    if n < 1:
        raise ConfigError("n debe ser al menos 1")
    head = head or HeadConfig()
    if family is TaskFamily.REID and head.num_classes > len(PALETTE) * len(SHAPES):
        raise ConfigError(f"ReID admite a lo sumo {len(PALETTE) * len(SHAPES)} identidades")
    split = Split(split)
    hw = tuple(image_size) if image_size is not None else ((48, 32) if family is TaskFamily.REID else (32, 32))
    map_hw = map_size(hw, patch_size)

    rng = np.random.default_rng([seed, SPLIT_INDEX[split], FAMILY_INDEX[family]])
    render = RENDERERS[family]
    images, labels = [], []
    for _ in range(n):
        image, label = render(rng, hw, head, map_hw)
        images.append(image)
        labels.append(label)
    logger.debug("generado %s: %d muestras (semilla %d, %s)", family.value, n, seed, split.value)
    return SyntheticDataset(family, seed, split, hw, map_hw, np.stack(images), labels)


def dataset_for(
    spec: DatasetSpec,
    split: Split = Split.PRETRAIN,
    patch_size: int = 4,
    seed_offset: int = 0,
    samples: Optional[int] = None,
) -> SyntheticDataset:
    """Dataset sintético de una especificación de dataset."""
    return generate(
        spec.family,
        spec.seed + seed_offset,
        samples or spec.samples,
        split=split,
        image_size=spec.resolved_image_size(),
        head=spec.head,
        patch_size=patch_size,
    )


# -- exportación ---------------------------------------------------------------------


def _encode_label(label: Sample) -> Dict[str, Any]:
    record: Dict[str, Any] = {}
    for key, value in label.items():
        if isinstance(value, BoxSet):
            record[key] = value.model_dump(mode="json")
        elif isinstance(value, np.ndarray):
            record[key] = value.tolist()
        else:
            record[key] = value
    return record


def _decode_label(family: TaskFamily, record: Dict[str, Any]) -> Sample:
    if family is TaskFamily.REID:
        return {"identity": int(record["identity"])}
    if family is TaskFamily.POSE:
        return {
            "keypoints": np.array(record["keypoints"], dtype=np.float64),
            "heatmaps": np.array(record["heatmaps"], dtype=np.float32),
        }
    if family is TaskFamily.PARSING:
        return {"mask": np.array(record["mask"], dtype=np.int64)}
    if family is TaskFamily.ATTRIBUTE:
        return {"attributes": np.array(record["attributes"], dtype=np.float32)}
    if family is TaskFamily.DETECTION:
        return {"boxes": BoxSet.model_validate(record["boxes"])}
    return {"density": np.array(record["density"], dtype=np.float32), "count": float(record["count"])}


def export_dataset(dataset: SyntheticDataset, directory: Union[str, Path]) -> Path:
    """Escribe el dataset en ``directory`` (imágenes f32 crudas y etiquetas JSONL)."""
    root = Path(directory)
    (root / "images").mkdir(parents=True, exist_ok=True)
    meta = {
        "family": dataset.family.value,
        "seed": dataset.seed,
        "split": dataset.split.value,
        "image_size": list(dataset.image_size),
        "map_size": list(dataset.map_size),
        "samples": len(dataset),
    }
    with open(root / "meta.json", "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2)
    with open(root / "labels.jsonl", "w", encoding="utf-8") as f:
        for index, (image, label) in enumerate(zip(dataset.images, dataset.labels)):
            (root / "images" / f"{index:06d}.f32").write_bytes(image.astype("<f4").tobytes())
            f.write(json.dumps({"index": index, **_encode_label(label)}) + "\n")
    logger.info("dataset %s exportado en %s", dataset.family.value, root)
    return root


def load_exported_dataset(directory: Union[str, Path]) -> SyntheticDataset:
    """Lee un dataset escrito por ``export_dataset``."""
    root = Path(directory)
    with open(root / "meta.json", "r", encoding="utf-8") as f:
        meta = json.load(f)
    family = TaskFamily(meta["family"])
    hw = tuple(meta["image_size"])
    images, labels = [], []
    with open(root / "labels.jsonl", "r", encoding="utf-8") as f:
        for line in f:
            record = json.loads(line)
            raw = (root / "images" / f"{record.pop('index'):06d}.f32").read_bytes()
            images.append(np.frombuffer(raw, dtype="<f4").reshape((3,) + hw).astype(np.float32))
            labels.append(_decode_label(family, record))
    return SyntheticDataset(
        family, meta["seed"], Split(meta["split"]), hw, tuple(meta["map_size"]), np.stack(images), labels
    )
