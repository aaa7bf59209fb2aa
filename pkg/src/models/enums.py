"""Definición de enumeraciones para el motor PATH."""

from enum import Enum


class TaskFamily(str, Enum):
    """Familias de tareas centradas en personas."""

    REID = "reid"
    POSE = "pose"
    PARSING = "parsing"
    ATTRIBUTE = "attribute"
    DETECTION = "detection"
    COUNTING = "counting"


class ShareType(str, Enum):
    """Variantes de compartición del proyector."""

    ALL = "A"  # un proyector para todos los datasets
    SPECIFIC = "S"  # un proyector por dataset
    TASK = "T"  # un proyector por tarea


class ScopeKind(str, Enum):
    """Niveles de la compartición jerárquica de pesos."""

    GLOBAL = "GLOBAL"
    TASK = "TASK"
    DATASET = "DATASET"


class Protocol(str, Enum):
    """Protocolos de entrenamiento y evaluación."""

    PRETRAIN = "pretrain"
    FULL_FT = "full-ft"
    HEAD_FT = "head-ft"
    PARTIAL_FT = "partial-ft"

    @classmethod
    def from_cli(cls, value: str) -> "Protocol":
        """Traduce los nombres cortos de la CLI (full|head|partial)."""
        aliases = {"full": cls.FULL_FT, "head": cls.HEAD_FT, "partial": cls.PARTIAL_FT}
        if value in aliases:
            return aliases[value]
        return cls(value)


class Scenario(str, Enum):
    """Escenarios de evaluación."""

    IN_DATASET = "in"
    OUT_OF_DATASET = "out"
    UNSEEN_TASK = "unseen"


class Split(str, Enum):
    """Particiones de los datasets sintéticos."""

    PRETRAIN = "pretrain"
    IN_EVAL = "in-eval"
    OUT_EVAL = "out-eval"


class OptimizerKind(str, Enum):
    """Optimizadores disponibles."""

    SGD = "sgd"
    ADAFACTOR = "adafactor"


class NormMode(str, Enum):
    """Modo de las capas de normalización por lotes."""

    TRAIN = "train"
    EVAL = "eval"
