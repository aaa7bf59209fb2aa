"""Redes: backbone ViT, proyectores por tarea, cabezas y ensamblado del modelo."""

from .backbone import FeatureTap, TransformerBlock, VisionTransformer
from .heads import TaskHead, build_head
from .module import Module
from .path_model import EvaluationModel, PathModel
from .projector import TaskProjector, gate_fuse, projector_key

__all__ = [
    "EvaluationModel",
    "FeatureTap",
    "Module",
    "PathModel",
    "TaskHead",
    "TaskProjector",
    "TransformerBlock",
    "VisionTransformer",
    "build_head",
    "gate_fuse",
    "projector_key",
]
