"""Registro de compartición jerárquica de pesos.

Asigna a cada parámetro un ámbito (GLOBAL, TASK(t) o DATASET(t, j)), resuelve
qué trabajadores lo comparten y produce las máscaras de congelamiento de los
protocolos de evaluación. El registro es inmutable una vez construido.
"""

import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict

from src.models.enums import Protocol, ScopeKind, ShareType
from src.models.errors import ConfigError, ParameterLookupError, ScopeError
from src.models.experiment import DatasetSpec, ExperimentConfig
from src.models.reports import RegistryRow
from src.networks.module import Module
from src.networks.path_model import EvaluationModel, PathModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SharingScope:
    """Ámbito de compartición de un parámetro."""

    kind: ScopeKind
    task: Optional[str] = None
    dataset: Optional[str] = None

    def __str__(self) -> str:
        if self.kind is ScopeKind.GLOBAL:
            return "GLOBAL"
        if self.kind is ScopeKind.TASK:
            return f"TASK({self.task})"
        return f"DATASET({self.task},{self.dataset})"


@dataclass(frozen=True)
class ParameterGroup:
    """Componente del modelo con un ámbito concreto."""

    component: str
    scope: SharingScope


class FreezeMask(BaseModel):
    """Conjunto de parámetros entrenables bajo un protocolo."""

    model_config = ConfigDict(frozen=True)

    protocol: Protocol
    trainable: FrozenSet[str]
    force_zero_weight_decay: bool = False

    def is_trainable(self, name: str) -> bool:
        return name in self.trainable

    def apply(self, module: Module) -> None:
        """Marca cada parámetro del módulo como entrenable o congelado."""
        for name, parameter in module.named_parameters():
            parameter.trainable = name in self.trainable


def freeze_mask_for(names: Iterable[str], protocol: Protocol, depth: int, k: int = 2) -> FreezeMask:
    """Máscara de congelamiento para un conjunto de nombres.

    Args:
        names: Nombres de los parámetros del modelo
        protocol: Protocolo de entrenamiento
        depth: Bloques del backbone
        k: Bloques finales que se descongelan en partial-ft

    Raises:
        ConfigError: Si ``k`` supera la profundidad
    """
    protocol = Protocol(protocol)
    if k > depth or k < 0:
        raise ConfigError(f"K={k} fuera de [0, {depth}]")
    names = list(names)
    if protocol in (Protocol.PRETRAIN, Protocol.FULL_FT):
        trainable = set(names)
    else:
        trainable = {name for name in names if name.startswith("head.")}
        if protocol is Protocol.PARTIAL_FT:
            blocks = {f"backbone.blocks.{index}." for index in range(depth - k + 1, depth + 1)}
            trainable |= {name for name in names if any(name.startswith(b) for b in blocks)}
    return FreezeMask(
        protocol=protocol,
        trainable=frozenset(trainable),
        force_zero_weight_decay=protocol in (Protocol.HEAD_FT, Protocol.PARTIAL_FT),
    )


class SharingRegistry:
    """Grupos de parámetros, ámbitos y conjuntos de sincronización."""

    def __init__(self, tasks: Mapping[str, Sequence[str]], share_type: ShareType, pos_embed_shared: bool = True):
        """Inicializa el registro; use ``build_groups`` para validarlo.

        Args:
            tasks: Datasets por tarea, en orden
            share_type: Variante de compartición del proyector
            pos_embed_shared: Si el embedding posicional es global
        """
        self.share_type = ShareType(share_type)
        self.pos_embed_shared = pos_embed_shared
        self.tasks: Dict[str, Tuple[str, ...]] = {task: tuple(datasets) for task, datasets in tasks.items()}
        self.workers: Tuple[str, ...] = tuple(d for datasets in self.tasks.values() for d in datasets)
        self.task_of: Dict[str, str] = {d: task for task, datasets in self.tasks.items() for d in datasets}
        self._scopes: Dict[str, SharingScope] = {}
        self._trainable: Dict[str, bool] = {}
        self.depth: Optional[int] = None

    # -- grupos --------------------------------------------------------------------

    @property
    def groups(self) -> List[ParameterGroup]:
        """Grupos de parámetros en orden: backbone, embeddings, proyectores, cabezas."""
        groups = [ParameterGroup("backbone", SharingScope(ScopeKind.GLOBAL))]
        if not self.pos_embed_shared:
            groups += [ParameterGroup("pos_embed", SharingScope(ScopeKind.TASK, task)) for task in self.tasks]
        if self.share_type is ShareType.ALL:
            groups.append(ParameterGroup("projector", SharingScope(ScopeKind.GLOBAL)))
        elif self.share_type is ShareType.TASK:
            groups += [ParameterGroup("projector", SharingScope(ScopeKind.TASK, task)) for task in self.tasks]
        else:
            groups += [
                ParameterGroup("projector", SharingScope(ScopeKind.DATASET, task, d))
                for task, datasets in self.tasks.items()
                for d in datasets
            ]
        groups += [
            ParameterGroup("head", SharingScope(ScopeKind.DATASET, task, d))
            for task, datasets in self.tasks.items()
            for d in datasets
        ]
        return groups

    def groups_of(self, component: str) -> List[ParameterGroup]:
        return [group for group in self.groups if group.component == component]

    # -- ámbitos -----------------------------------------------------------------------

    def resolve_scope(self, name: str) -> SharingScope:
        """Ámbito que corresponde a un nombre de parámetro según sus prefijos."""
        parts = name.split(".")
        if parts[0] == "backbone":
            if len(parts) >= 3 and parts[1] == "pos_embed" and not self.pos_embed_shared:
                task = parts[2]
                if task not in self.tasks:
                    raise ScopeError(f"embedding posicional de una tarea desconocida: '{name}'")
                return SharingScope(ScopeKind.TASK, task)
            return SharingScope(ScopeKind.GLOBAL)
        if parts[0] == "projector" and len(parts) >= 2:
            if self.share_type is ShareType.ALL and parts[1] == "all":
                return SharingScope(ScopeKind.GLOBAL)
            if parts[1] in self.tasks:
                task = parts[1]
                if self.share_type is ShareType.TASK:
                    return SharingScope(ScopeKind.TASK, task)
                if self.share_type is ShareType.SPECIFIC and len(parts) >= 3 and parts[2] in self.tasks[task]:
                    return SharingScope(ScopeKind.DATASET, task, parts[2])
        if parts[0] == "head" and len(parts) >= 3:
            task, dataset = parts[1], parts[2]
            if dataset in self.tasks.get(task, ()):
                return SharingScope(ScopeKind.DATASET, task, dataset)
        raise ScopeError(f"parámetro sin ámbito: '{name}'")

    def register(self, model: Module) -> "SharingRegistry":
        """Asigna un ámbito a todos los parámetros del modelo (función total)."""
        for name, parameter in model.named_parameters():
            scope = self.resolve_scope(name)
            parameter.bind_scope(scope)
            self._scopes[name] = scope
            self._trainable[name] = parameter.trainable
        backbone = getattr(model, "backbone", None)
        if backbone is not None:
            self.depth = backbone.config.depth
        logger.debug("registro: %d parámetros en %d grupos", len(self._scopes), len(self.groups))
        return self

    @property
    def names(self) -> List[str]:
        return list(self._scopes)

    def scope(self, name: str) -> SharingScope:
        if name not in self._scopes:
            raise ParameterLookupError(name)
        return self._scopes[name]

    def sync_set(self, name: str) -> Tuple[str, ...]:
        """Trabajadores (datasets) que comparten el parámetro.

        Raises:
            ParameterLookupError: Si el parámetro no está registrado
        """
        scope = self.scope(name)
        if scope.kind is ScopeKind.GLOBAL:
            return self.workers
        if scope.kind is ScopeKind.TASK:
            return self.tasks[scope.task]
        return (scope.dataset,)

    def params_for_worker(self, worker: str) -> List[str]:
        """Parámetros cuyo conjunto de sincronización incluye al trabajador."""
        if worker not in self.task_of:
            raise ParameterLookupError(worker)
        return [name for name in self._scopes if worker in self.sync_set(name)]

    def freeze_mask(self, protocol: Protocol, k: int = 2) -> FreezeMask:
        if self.depth is None:
            raise ConfigError("el registro no tiene un modelo registrado")
        return freeze_mask_for(self._scopes, protocol, self.depth, k)

    def dump(self, mask: Optional[FreezeMask] = None) -> List[RegistryRow]:
        """Tabla de auditoría (nombre, ámbito, conjunto de sincronización, entrenable)."""
        return [
            RegistryRow(
                name=name,
                scope=str(scope),
                sync_set=list(self.sync_set(name)),
                trainable=mask.is_trainable(name) if mask is not None else self._trainable[name],
            )
            for name, scope in self._scopes.items()
        ]


def build_groups(
    tasks: Mapping[str, Sequence[str]],
    share_type: ShareType = ShareType.TASK,
    pos_embed_shared: bool = True,
) -> SharingRegistry:
    """Construye el registro a partir de los datasets de cada tarea.

    Raises:
        ConfigError: Sin tareas, tareas vacías o datasets duplicados
    """
    if not tasks:
        raise ConfigError("se requiere al menos una tarea")
    seen: List[str] = []
    for task, datasets in tasks.items():
        if not datasets:
            raise ConfigError(f"la tarea '{task}' no tiene datasets")
        for dataset in datasets:
            if dataset in seen:
                raise ConfigError(f"dataset duplicado: '{dataset}'")
            seen.append(dataset)
    return SharingRegistry(tasks, share_type, pos_embed_shared)


def registry_for(config: ExperimentConfig, model: Optional[PathModel] = None) -> SharingRegistry:
    """Registro de un experimento, con los parámetros del modelo ya asignados."""
    tasks = {task: [spec.name for spec in specs] for task, specs in config.tasks.items()}
    registry = build_groups(tasks, config.projector.share_type, config.backbone.pos_embed_shared)
    return registry.register(model if model is not None else PathModel.from_config(config))


def discard_projectors(
    state: Mapping[str, object],
    config: ExperimentConfig,
    spec: DatasetSpec,
    seed: int = 0,
) -> EvaluationModel:
    """Modelo de evaluación: backbone preentrenado y cabeza nueva, sin proyectores.

    Args:
        state: Entradas de un checkpoint (o ``PathModel.state_dict()``)
        config: Experimento de preentrenamiento
        spec: Dataset de evaluación que define la cabeza
        seed: Semilla de inicialización de la cabeza
    """
    tasks = list(config.tasks)
    model = EvaluationModel(config.backbone, tasks, spec, seed=seed)
    backbone_entries = {name: value for name, value in state.items() if name.startswith("backbone.")}
    model.backbone.load_state_dict(backbone_entries, strict=True)
    return model
