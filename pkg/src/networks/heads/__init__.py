"""Cabezas por familia de tarea."""

from typing import Dict, Type

from src.models.enums import TaskFamily
from src.models.errors import ConfigError
from src.models.experiment import HeadConfig

from .attribute import AttributeHead
from .base import TaskHead
from .counting import CountingHead
from .detection import DetectionHead
from .parsing import ParsingHead
from .pose import PoseHead
from .reid import ReIDHead

HEADS: Dict[TaskFamily, Type[TaskHead]] = {
    TaskFamily.REID: ReIDHead,
    TaskFamily.POSE: PoseHead,
    TaskFamily.PARSING: ParsingHead,
    TaskFamily.ATTRIBUTE: AttributeHead,
    TaskFamily.DETECTION: DetectionHead,
    TaskFamily.COUNTING: CountingHead,
}


def build_head(
    family: TaskFamily,
    task: str,
    dataset: str,
    dim: int,
    config: HeadConfig,
    seed: int = 0,
    lazy: bool = False,
) -> TaskHead:
    """Instancia la cabeza de ``family`` para un dataset."""
    try:
        head_cls = HEADS[TaskFamily(family)]
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"familia desconocida: {family}") from exc
    return head_cls(task, dataset, dim, config, seed=seed, lazy=lazy)


__all__ = [
    "AttributeHead",
    "CountingHead",
    "DetectionHead",
    "HEADS",
    "ParsingHead",
    "PoseHead",
    "ReIDHead",
    "TaskHead",
    "build_head",
]
