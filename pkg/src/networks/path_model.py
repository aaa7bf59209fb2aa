"""Ensamblado del modelo: backbone → proyector → cabeza.

``PathModel`` contiene todos los parámetros de un experimento de
preentrenamiento. ``EvaluationModel`` es el modelo de evaluación: solo el
backbone y una cabeza nueva que lee directamente el mapa final.
"""

from typing import Any, Dict, List, Optional, Sequence

from src.models.enums import TaskFamily
from src.models.experiment import BackboneConfig, DatasetSpec, ExperimentConfig, ProjectorConfig
from src.models.errors import ConfigError
from src.numerics.tensor import Tensor, as_tensor

from .backbone import VisionTransformer
from .heads import TaskHead, build_head
from .heads.base import Labels
from .module import Module
from .projector import TaskProjector, projector_key


def unique_tasks(datasets: Sequence[DatasetSpec]) -> List[str]:
    tasks: List[str] = []
    for spec in datasets:
        if spec.task not in tasks:
            tasks.append(spec.task)
    return tasks


class PathModel(Module):
    """Backbone compartido, proyectores según la variante y una cabeza por dataset."""

    def __init__(
        self,
        backbone: BackboneConfig,
        projector: ProjectorConfig,
        datasets: Sequence[DatasetSpec],
        seed: int = 0,
        lazy: bool = False,
    ):
        super().__init__("", seed, lazy)
        self.backbone_config = backbone
        self.projector_config = projector
        self.specs: Dict[str, DatasetSpec] = {spec.name: spec for spec in datasets}
        self.tasks = unique_tasks(datasets)
        self.backbone = self.child("backbone", VisionTransformer(backbone, self.tasks, seed=seed, lazy=lazy))

        self.projectors: Dict[str, TaskProjector] = {}
        self.heads: Dict[str, TaskHead] = {}
        num_layers = len(backbone.taps)
        for spec in datasets:
            key = self.projector_key(spec.name)
            if key not in self.projectors:
                self.projectors[key] = self.child(
                    f"projector.{key}",
                    TaskProjector(key, backbone.embed_dim, num_layers, projector, seed=seed, lazy=lazy),
                )
            self.heads[spec.name] = self.child(
                f"head.{spec.task}.{spec.name}",
                build_head(spec.family, spec.task, spec.name, backbone.embed_dim, spec.head, seed=seed, lazy=lazy),
            )

    @classmethod
    def from_config(cls, config: ExperimentConfig, seed: Optional[int] = None, lazy: bool = False) -> "PathModel":
        return cls(config.backbone, config.projector, config.datasets,
                   seed=config.plan.seed if seed is None else seed, lazy=lazy)

    def projector_key(self, dataset: str) -> str:
        spec = self.spec(dataset)
        return projector_key(self.projector_config.share_type, spec.task, spec.name)

    def spec(self, dataset: str) -> DatasetSpec:
        if dataset not in self.specs:
            raise ConfigError(f"dataset desconocido: '{dataset}'")
        return self.specs[dataset]

    def task_feature(self, dataset: str, images: Any) -> Tensor:
        """Característica de tarea ``p`` del dataset para un lote de imágenes."""
        spec = self.spec(dataset)
        _, taps = self.backbone.forward_features(as_tensor(images), spec.task)
        return self.projectors[self.projector_key(dataset)](taps)

    def forward(self, dataset: str, images: Any) -> Any:
        images = as_tensor(images)
        feature = self.task_feature(dataset, images)
        return self.heads[dataset](feature, images.shape[2:])

    def loss(self, dataset: str, images: Any, labels: Labels) -> Tensor:
        return self.heads[dataset].loss(self.forward(dataset, images), labels)


class EvaluationModel(Module):
    """Backbone sin proyectores y una cabeza de evaluación recién inicializada."""

    def __init__(self, backbone: BackboneConfig, tasks: Sequence[str], spec: DatasetSpec, seed: int = 0):
        super().__init__("", seed, lazy=False)
        self.spec = spec
        self.tasks = list(tasks)
        self.backbone = self.child("backbone", VisionTransformer(backbone, self.tasks, seed=seed))
        self.head = self.child(
            f"head.{spec.task}.{spec.name}",
            build_head(spec.family, spec.task, spec.name, backbone.embed_dim, spec.head, seed=seed),
        )

    @property
    def family(self) -> TaskFamily:
        return self.spec.family

    def embedding_task(self) -> Optional[str]:
        """Tarea cuyo embedding posicional se usa si no es compartido."""
        if self.backbone.config.pos_embed_shared:
            return None
        return self.spec.task if self.spec.task in self.tasks else self.tasks[0]

    def forward(self, images: Any) -> Any:
        images = as_tensor(images)
        final, _ = self.backbone.forward_features(images, self.embedding_task())
        return self.head(final, images.shape[2:])

    def loss(self, images: Any, labels: Labels) -> Tensor:
        return self.head.loss(self.forward(images), labels)
