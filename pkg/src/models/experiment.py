"""Documento de experimento del motor PATH.

Agrupa la geometría del backbone, el proyector, las especificaciones de los
datasets (con sus cabezas), el plan de entrenamiento y la evaluación. Todas
las invariantes se validan al cargar; las claves desconocidas se rechazan.
"""

import json
from decimal import Decimal
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .enums import OptimizerKind, Protocol, Scenario, ShareType, TaskFamily
from .errors import ConfigError
from .validators import validate_dataset_name

_STRICT = ConfigDict(extra="forbid", use_enum_values=False)


class BackboneConfig(BaseModel):
    """Geometría del ViT compartido."""

    model_config = _STRICT

    patch_size: int = Field(4, ge=1, description="Lado del parche en píxeles")
    embed_dim: int = Field(32, ge=1, description="Canales de los tokens")
    depth: int = Field(4, ge=1, description="Número de bloques transformer")
    heads: int = Field(4, ge=1, description="Cabezas de atención")
    mlp_ratio: int = Field(4, ge=1, description="Expansión del MLP de cada bloque")
    canonical_image: int = Field(32, ge=1, description="Lado de la imagen canónica")
    tap_layers: Optional[List[int]] = Field(
        None, description="Bloques (base 1) leídos por el proyector; por defecto los últimos min(8, depth)"
    )
    pos_embed_shared: bool = Field(True, description="Un único embedding posicional global")

    @model_validator(mode="after")
    def check_geometry(self) -> "BackboneConfig":
        """Verifica divisibilidades y la política de taps."""
        if self.embed_dim % self.heads:
            raise ValueError(f"embed_dim={self.embed_dim} no es divisible por heads={self.heads}")
        if self.canonical_image % self.patch_size:
            raise ValueError("canonical_image debe ser divisible por patch_size")
        if self.tap_layers is not None:
            taps = self.tap_layers
            if not taps:
                raise ValueError("tap_layers no puede estar vacío")
            if any(b <= a for a, b in zip(taps, taps[1:])):
                raise ValueError("tap_layers debe ser estrictamente creciente")
            if taps[0] < 1 or taps[-1] > self.depth:
                raise ValueError(f"tap_layers fuera de [1, {self.depth}]")
        return self

    @property
    def taps(self) -> List[int]:
        """Bloques leídos, resolviendo la política por defecto."""
        if self.tap_layers is not None:
            return list(self.tap_layers)
        count = min(8, self.depth)
        return list(range(self.depth - count + 1, self.depth + 1))

    @property
    def canonical_grid(self) -> int:
        return self.canonical_image // self.patch_size


class ProjectorConfig(BaseModel):
    """Proyector por tarea: SE + auto-atención + compuertas."""

    model_config = _STRICT

    share_type: ShareType = ShareType.TASK
    temperature: float = Field(0.1, gt=0.0, description="Temperatura T de las compuertas")
    attention_heads: int = Field(1, ge=1)
    se_kernel: int = Field(3, ge=1, description="Núcleo de la convolución 1-D del bloque SE")

    @field_validator("se_kernel")
    @classmethod
    def check_odd_kernel(cls, value: int) -> int:
        """El núcleo del SE debe ser impar para conservar el número de canales."""
        if value % 2 == 0:
            raise ValueError("se_kernel debe ser impar")
        return value


class HeadConfig(BaseModel):
    """Aridades e hiperparámetros de pérdida de una cabeza."""

    model_config = _STRICT

    num_classes: int = Field(4, ge=1, description="Identidades, clases o atributos")
    num_keypoints: int = Field(4, ge=1)
    num_queries: int = Field(8, ge=1)
    decoder_layers: int = Field(2, ge=1)
    triplet_margin: float = Field(0.3, ge=0.0)
    lambda_cls: float = Field(2.0, ge=0.0)
    lambda_iou: float = Field(2.0, ge=0.0)
    lambda_l1: float = Field(5.0, ge=0.0)
    no_object_weight: float = Field(0.1, ge=0.0)
    density_scale: float = Field(100.0, gt=0.0, description="Escala del mapa de densidad en la pérdida")


class DatasetSpec(BaseModel):
    """Un dataset de preentrenamiento, atendido por un trabajador."""

    model_config = _STRICT

    name: str = Field(..., min_length=1)
    task: str = Field(..., min_length=1, description="Tarea a la que pertenece el dataset")
    family: TaskFamily
    seed: int = 0
    samples: int = Field(64, ge=1)
    image_size: Optional[Tuple[int, int]] = None
    batch_per_replica: int = Field(4, ge=1)
    replicas: int = Field(1, ge=1)
    sample_weight: Union[int, float] = Field(1, gt=0)
    augment_flip: bool = False
    head: HeadConfig = Field(default_factory=HeadConfig)

    @field_validator("name", "task")
    @classmethod
    def check_path_component(cls, value: str) -> str:
        """Los nombres forman parte de las rutas de parámetros."""
        if not validate_dataset_name(value):
            raise ValueError(f"nombre inválido '{value}': use letras, dígitos, '_' o '-'")
        return value

    @property
    def loss_weight(self) -> Union[int, float]:
        """Peso λ = sample_weight × batch_per_replica × replicas, exacto."""
        product = Decimal(str(self.sample_weight)) * self.batch_per_replica * self.replicas
        if product == product.to_integral_value():
            return int(product)
        return float(product)

    def resolved_image_size(self) -> Tuple[int, int]:
        """Tamaño de imagen efectivo (48×32 para ReID por defecto)."""
        if self.image_size is not None:
            return self.image_size
        return (48, 32) if self.family is TaskFamily.REID else (32, 32)


class OptimizerConfig(BaseModel):
    """Optimizador y sus hiperparámetros."""

    model_config = _STRICT

    kind: OptimizerKind = OptimizerKind.ADAFACTOR
    momentum: float = Field(0.0, ge=0.0, lt=1.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    clip_threshold: float = Field(0.5, gt=0.0)
    decay_rate: float = Field(-0.8, lt=0.0)
    clip_beta2: float = Field(0.999, gt=0.0, lt=1.0)
    eps: Tuple[float, float] = (1e-30, 1e-3)
    scale_parameter: bool = False
    relative_step: bool = False

    @model_validator(mode="after")
    def check_flags(self) -> "OptimizerConfig":
        """Solo se soporta la variante con paso absoluto."""
        if self.scale_parameter or self.relative_step:
            raise ValueError("scale_parameter y relative_step deben ser false")
        return self


class TrainPlan(BaseModel):
    """Presupuesto, calendario de lr, decaimiento por capa y optimizador."""

    model_config = _STRICT

    max_iter: int = Field(200, ge=0)
    warmup_steps: int = Field(10, ge=0)
    base_lr: float = Field(1e-7, ge=0.0)
    warmup_lr: float = Field(5e-4, ge=0.0)
    lr_mults: List[float] = Field(default_factory=list)
    lr_steps: List[int] = Field(default_factory=list)
    layer_decay_rate: float = Field(0.75, gt=0.0, le=1.0)
    weight_decay: float = Field(0.05, ge=0.0)
    backbone_multiplier: float = Field(1.0, ge=0.0)
    pos_embed_multiplier: float = Field(1.0, ge=0.0)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    protocol: Protocol = Protocol.PRETRAIN
    seed: int = 0

    @model_validator(mode="after")
    def check_schedule(self) -> "TrainPlan":
        """Verifica la coherencia de lr_steps y lr_mults."""
        if len(self.lr_mults) != len(self.lr_steps):
            raise ValueError("lr_mults y lr_steps deben tener la misma longitud")
        steps = self.lr_steps
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError("lr_steps debe ser estrictamente creciente")
        if steps and steps[-1] >= self.max_iter:
            raise ValueError(f"lr_steps debe ser menor que max_iter={self.max_iter}")
        return self


class EvaluationConfig(BaseModel):
    """Escenarios, protocolos y presupuesto del finetuning de evaluación."""

    model_config = _STRICT

    scenarios: List[Scenario] = Field(
        default_factory=lambda: [Scenario.IN_DATASET, Scenario.OUT_OF_DATASET, Scenario.UNSEEN_TASK]
    )
    protocols: List[Protocol] = Field(
        default_factory=lambda: [Protocol.FULL_FT, Protocol.HEAD_FT, Protocol.PARTIAL_FT]
    )
    partial_k: int = Field(2, ge=0)
    finetune_iters: int = Field(100, ge=0)
    finetune_lr: float = Field(1e-2, gt=0.0)
    train_samples: int = Field(64, ge=2)
    test_samples: int = Field(32, ge=1)
    heldout_seed_offset: int = Field(1000, ge=1)
    unseen: DatasetSpec = Field(
        default_factory=lambda: DatasetSpec(name="counting_unseen", task="counting", family=TaskFamily.COUNTING)
    )

    @field_validator("protocols")
    @classmethod
    def check_protocols(cls, value: List[Protocol]) -> List[Protocol]:
        """La evaluación no admite el protocolo de preentrenamiento."""
        if Protocol.PRETRAIN in value:
            raise ValueError("pretrain no es un protocolo de evaluación")
        return value


class ExperimentConfig(BaseModel):
    """Documento completo de un experimento."""

    model_config = _STRICT

    backbone: BackboneConfig = Field(default_factory=BackboneConfig)
    projector: ProjectorConfig = Field(default_factory=ProjectorConfig)
    datasets: List[DatasetSpec] = Field(..., min_length=1)
    plan: TrainPlan = Field(default_factory=TrainPlan)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)

    @model_validator(mode="after")
    def check_datasets(self) -> "ExperimentConfig":
        """Nombres únicos, una familia por tarea y geometría divisible por el parche."""
        names = [spec.name for spec in self.datasets]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise ValueError(f"datasets duplicados: {duplicates}")
        families: Dict[str, TaskFamily] = {}
        for spec in self.datasets:
            previous = families.setdefault(spec.task, spec.family)
            if previous is not spec.family:
                raise ValueError(f"la tarea '{spec.task}' mezcla las familias {previous.value} y {spec.family.value}")
            h, w = spec.resolved_image_size()
            if h % self.backbone.patch_size or w % self.backbone.patch_size:
                raise ValueError(f"la imagen {h}x{w} de '{spec.name}' no es divisible por el parche")
            if spec.family is TaskFamily.DETECTION and spec.head.num_queries < 1:
                raise ValueError("detección requiere al menos una consulta")
        if self.evaluation.partial_k > self.backbone.depth:
            raise ValueError("partial_k no puede superar la profundidad del backbone")
        return self

    @property
    def tasks(self) -> Dict[str, List[DatasetSpec]]:
        """Datasets agrupados por tarea, en orden de aparición."""
        grouped: Dict[str, List[DatasetSpec]] = {}
        for spec in self.datasets:
            grouped.setdefault(spec.task, []).append(spec)
        return grouped

    def dataset(self, name: str) -> DatasetSpec:
        for spec in self.datasets:
            if spec.name == name:
                return spec
        raise KeyError(name)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        """Carga y valida un documento JSON.

        Raises:
            ConfigError: Si el archivo no se puede leer o no es JSON válido
            ValidationError: Si el documento viola alguna invariante
        """
        try:
            with open(path, "r", encoding="utf-8") as f:
                document = json.load(f)
        except (json.JSONDecodeError, UnicodeDecodeError, OSError) as exc:
            raise ConfigError(f"no se pudo leer el experimento '{path}': {exc}") from exc
        return cls.model_validate(document)

    def dump(self, path: Union[str, Path]) -> None:
        """Escribe el documento en JSON (load → dump → load es la identidad)."""
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.model_dump(mode="json"), f, ensure_ascii=False, indent=2)
