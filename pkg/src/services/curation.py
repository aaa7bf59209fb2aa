"""Curación de datos: hash de diferencias, deduplicación y filtros."""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Hashable, List, Mapping, Sequence, Set, Tuple, TypeVar, Union

import imagehash
import numpy as np
from PIL import Image

from src.models.errors import ConfigError

from .data_synth import SyntheticDataset

logger = logging.getLogger(__name__)

T = TypeVar("T")
ImageLike = Union[np.ndarray, Image.Image]

# Tamaño del hash: 9×8 píxeles, 64 bits
HASH_SIZE = 8
MIN_IMAGES_PER_IDENTITY = 15
MAX_IMAGES_PER_IDENTITY = 200


@dataclass(frozen=True)
class HashCode:
    """Código de 64 bits de una imagen."""

    value: int

    def __int__(self) -> int:
        return self.value

    def __sub__(self, other: "HashCode") -> int:
        return hamming_distance(self, other)

    def bits(self) -> np.ndarray:
        return np.array([(self.value >> (63 - i)) & 1 for i in range(64)], dtype=np.uint8)


def to_pil(image: ImageLike) -> Image.Image:
    """Convierte (3, H, W) o (H, W) en [0, 1] a una imagen PIL de 8 bits."""
    if isinstance(image, Image.Image):
        return image
    array = np.asarray(image, dtype=np.float64)
    if array.ndim == 3:
        array = np.transpose(array, (1, 2, 0))
    pixels = np.round(np.clip(array, 0.0, 1.0) * 255.0).astype(np.uint8)
    return Image.fromarray(pixels)


def dhash(image: ImageLike) -> HashCode:
    """Hash de diferencias: bit 1 si un píxel es estrictamente menor que su vecino derecho."""
    code = imagehash.dhash(to_pil(image), hash_size=HASH_SIZE)
    return HashCode(int(str(code), 16))


def hamming_distance(a: HashCode, b: HashCode) -> int:
    return bin(int(a) ^ int(b)).count("1")


def hash_dataset(dataset: Union[SyntheticDataset, Sequence[ImageLike]]) -> List[HashCode]:
    images = dataset.images if isinstance(dataset, SyntheticDataset) else dataset
    return [dhash(image) for image in images]


def subset(dataset: SyntheticDataset, indices: Sequence[int]) -> SyntheticDataset:
    """Copia del dataset restringida a ``indices``."""
    return SyntheticDataset(
        dataset.family,
        dataset.seed,
        dataset.split,
        dataset.image_size,
        dataset.map_size,
        dataset.images[list(indices)] if len(indices) else dataset.images[:0],
        [dataset.labels[index] for index in indices],
    )


def dedup_indices(pretrain_codes: Sequence[HashCode], eval_codes: Sequence[HashCode]) -> List[int]:
    """Índices de preentrenamiento cuyo código no coincide con ninguno de evaluación."""
    blocked = set(eval_codes)
    return [index for index, code in enumerate(pretrain_codes) if code not in blocked]


def dedup(pretrain: SyntheticDataset, evaluation: SyntheticDataset) -> SyntheticDataset:
    """Elimina del preentrenamiento las imágenes con el mismo hash que alguna de evaluación."""
    keep = dedup_indices(hash_dataset(pretrain), hash_dataset(evaluation))
    removed = len(pretrain) - len(keep)
    if removed:
        logger.info("dedup: %d imágenes de preentrenamiento eliminadas", removed)
    return subset(pretrain, keep)


def near_duplicates(
    pretrain: Union[SyntheticDataset, Sequence[ImageLike]],
    evaluation: Union[SyntheticDataset, Sequence[ImageLike]],
    max_distance: int = 4,
) -> List[Tuple[int, int, int]]:
    """Pares (i, j, distancia) con distancia de Hamming ≤ ``max_distance``, para auditoría."""
    if max_distance < 0:
        raise ConfigError("max_distance no puede ser negativo")
    eval_codes = hash_dataset(evaluation)
    pairs = []
    for i, code in enumerate(hash_dataset(pretrain)):
        for j, other in enumerate(eval_codes):
            distance = hamming_distance(code, other)
            if distance <= max_distance:
                pairs.append((i, j, distance))
    return pairs


def temporal_subsample(frames: Sequence[T], stride: int = 8) -> List[T]:
    """Conserva el primer cuadro de cada bloque de ``stride`` cuadros consecutivos."""
    if stride < 1:
        raise ConfigError("stride debe ser al menos 1")
    return list(frames[::stride])


def identity_filter(
    counts: Mapping[Hashable, int],
    low: int = MIN_IMAGES_PER_IDENTITY,
    high: int = MAX_IMAGES_PER_IDENTITY,
) -> Set[Hashable]:
    """Identidades con un número de imágenes en [low, high], ambos inclusive."""
    return {identity for identity, count in counts.items() if low <= count <= high}


def identity_counts(identities: Sequence[Hashable]) -> Dict[Hashable, int]:
    return dict(Counter(identities))
