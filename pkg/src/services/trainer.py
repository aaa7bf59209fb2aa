"""Entrenador multi-trabajador simulado.

Cada dataset tiene un trabajador con su propia réplica del modelo. En cada
ronda todos los trabajadores calculan gradientes (``local_step``), se
sincronizan por conjunto de compartición (``synchronize``) y aplican la misma
actualización del optimizador (``optimizer_step``). Las réplicas de un
parámetro compartido quedan idénticas bit a bit después de cada ronda.
"""

import copy
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from src.models.enums import Split
from src.models.errors import DivergenceError, SyncProtocolError
from src.models.experiment import DatasetSpec, ExperimentConfig
from src.networks.path_model import PathModel
from src.numerics.tensor import Parameter

from .data_synth import SyntheticDataset, dataset_for
from .optimizers import Optimizer, build_optimizer
from .schedule import effective_lr, lr_at, weight_decay_for
from .sharing_registry import FreezeMask, SharingRegistry, freeze_mask_for, registry_for

logger = logging.getLogger(__name__)

Gradients = Dict[str, np.ndarray]


@dataclass
class Worker:
    """Trabajador de un dataset con su réplica, datos, RNG y optimizador."""

    rank: int
    spec: DatasetSpec
    model: PathModel
    names: List[str]
    dataset: SyntheticDataset
    optimizer: Optimizer
    rng: np.random.Generator
    params: Dict[str, Parameter] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.params = dict(self.model.named_parameters())

    @property
    def name(self) -> str:
        return self.spec.name


def synchronize(gradients: Mapping[str, Gradients], registry: SharingRegistry) -> Dict[str, Gradients]:
    """Media de cada gradiente sobre su conjunto de sincronización.

    La suma se hace en float64 sobre los valores ordenados, de modo que el
    resultado no depende del orden de los trabajadores. Los parámetros de un
    solo trabajador pasan sin cambios.

    Args:
        gradients: Gradientes por trabajador (nombre del dataset) y parámetro
        registry: Registro con los conjuntos de sincronización

    Raises:
        SyncProtocolError: Si falta el gradiente de algún miembro del conjunto
    """
    synced: Dict[str, Gradients] = {worker: {} for worker in gradients}
    names = sorted({name for grads in gradients.values() for name in grads})
    for name in names:
        members = registry.sync_set(name)
        missing = [w for w in members if name not in gradients.get(w, {})]
        if missing:
            raise SyncProtocolError(f"faltan gradientes de {missing} para '{name}'")
        if len(members) == 1:
            synced[members[0]][name] = gradients[members[0]][name]
            continue
        first = gradients[members[0]][name]
        stacked = np.stack([gradients[w][name] for w in members]).astype(np.float64)
        mean = (np.sort(stacked, axis=0).sum(axis=0) / len(members)).astype(first.dtype)
        for worker in members:
            synced[worker][name] = mean
    return synced


class Trainer:
    """Estado de un preentrenamiento: réplicas, registro y máscara de congelamiento."""

    def __init__(
        self,
        config: ExperimentConfig,
        seed: Optional[int] = None,
        max_workers: int = 1,
        datasets: Optional[Mapping[str, SyntheticDataset]] = None,
    ):
        """Construye el modelo, el registro y un trabajador por dataset.

        Args:
            config: Experimento validado
            seed: Semilla global (por defecto la del plan)
            max_workers: Contextos de ejecución concurrentes para ``local_step``
            datasets: Datasets ya generados por nombre (por defecto se sintetizan)
        """
        self.config = config
        self.plan = config.plan
        self.seed = config.plan.seed if seed is None else seed
        self.max_workers = max(1, max_workers)
        self.depth = config.backbone.depth

        self.master = PathModel.from_config(config, seed=self.seed)
        self.registry = registry_for(config, self.master)
        self.mask: FreezeMask = freeze_mask_for(self.registry.names, self.plan.protocol, self.depth)
        self.mask.apply(self.master)

        datasets = datasets or {}
        self.workers: List[Worker] = []
        for rank, spec in enumerate(config.datasets):
            data = datasets.get(spec.name)
            if data is None:
                data = dataset_for(spec, Split.PRETRAIN, config.backbone.patch_size)
            self.workers.append(
                Worker(
                    rank=rank,
                    spec=spec,
                    model=copy.deepcopy(self.master),
                    names=self.registry.params_for_worker(spec.name),
                    dataset=data,
                    optimizer=build_optimizer(self.plan.optimizer),
                    rng=np.random.default_rng([self.seed, rank]),
                )
            )
        self.pending: Dict[str, Gradients] = {}
        self.losses: Dict[str, float] = {}
        # Estado previo a la ronda en curso
        self.round_start_state: Optional[Dict[str, np.ndarray]] = None
        logger.info(
            "entrenador: %d trabajadores, %d parámetros, variante %s",
            len(self.workers), self.master.num_parameters(), config.projector.share_type.value,
        )

    def worker(self, name: str) -> Worker:
        for worker in self.workers:
            if worker.name == name:
                return worker
        raise KeyError(name)

    # -- fases de una ronda ---------------------------------------------------------

    def local_step(self, worker: Worker, step: int, weight: Optional[float] = None) -> Tuple[Gradients, float]:
        """Gradientes de λ·L del trabajador, promediados sobre sus réplicas.

        Args:
            worker: Trabajador
            step: Iteración actual (para el error de divergencia)
            weight: Peso de pérdida; por defecto el del dataset

        Returns:
            Tuple[Gradients, float]: Gradientes por parámetro entrenable y pérdida media sin peso

        Raises:
            DivergenceError: Si la pérdida no es finita
        """
        spec = worker.spec
        weight = spec.loss_weight if weight is None else weight
        model = worker.model
        model.train()
        trainable = [name for name in worker.names if worker.params[name].trainable]
        totals = {name: np.zeros(worker.params[name].shape, dtype=np.float64) for name in trainable}
        values = []
        for _ in range(spec.replicas):
            indices = worker.rng.integers(0, len(worker.dataset), size=spec.batch_per_replica)
            flips = worker.rng.random(spec.batch_per_replica) < 0.5 if spec.augment_flip else None
            images, labels = worker.dataset.batch(indices, flips)
            model.zero_grad()
            loss = model.loss(spec.name, images, labels)
            value = loss.item()
            if not np.isfinite(value):
                raise DivergenceError(step, spec.name, value)
            (loss * weight).backward()
            values.append(value)
            for name in trainable:
                grad = worker.params[name].grad
                if grad is not None:
                    totals[name] += grad
        model.zero_grad()
        grads = {
            name: (total / spec.replicas).astype(worker.params[name].data.dtype) for name, total in totals.items()
        }
        return grads, float(np.mean(values))

    def local_steps(self, step: int) -> Dict[str, float]:
        """Ejecuta ``local_step`` en todos los trabajadores y guarda los gradientes."""
        self.round_start_state = self.state_dict()
        if self.max_workers > 1 and len(self.workers) > 1:
            with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
                results = list(pool.map(lambda w: self.local_step(w, step), self.workers))
        else:
            results = [self.local_step(worker, step) for worker in self.workers]
        self.pending = {worker.name: grads for worker, (grads, _) in zip(self.workers, results)}
        self.losses = {worker.name: loss for worker, (_, loss) in zip(self.workers, results)}
        return dict(self.losses)

    def synchronize(self) -> Dict[str, Gradients]:
        self.pending = synchronize(self.pending, self.registry)
        return self.pending

    def optimizer_step(self, step: int) -> None:
        """Aplica la actualización de cada trabajador con los gradientes sincronizados."""
        for worker in self.workers:
            grads = self.pending.get(worker.name, {})
            lrs = {name: effective_lr(name, step, self.plan, self.depth) for name in grads}
            decays = {name: weight_decay_for(name, self.plan, self.mask.force_zero_weight_decay) for name in grads}
            worker.optimizer.step(worker.params, grads, lrs, decays)
        self.pending = {}

    def round(self, step: int) -> Dict[str, float]:
        """Una ronda completa: pasos locales, sincronización y optimizador."""
        losses = self.local_steps(step)
        self.synchronize()
        self.optimizer_step(step)
        return losses

    def lr(self, step: int) -> float:
        return lr_at(step, self.plan)

    # -- estado ---------------------------------------------------------------------------

    def _owner(self, entry: str) -> Worker:
        parts = entry.split(".")
        if entry in self.registry.names:
            return self.worker(self.registry.sync_set(entry)[0])
        if parts[0] == "head" and len(parts) > 2:
            return self.worker(parts[2])
        return self.workers[0]

    def last_good_state(self) -> Dict[str, np.ndarray]:
        """Estado al inicio de la última ronda iniciada, o el actual si no hubo ninguna."""
        return self.round_start_state if self.round_start_state is not None else self.state_dict()

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Estado completo, tomando cada entrada de un trabajador que la posee."""
        replicas = {worker.name: worker.model.state_dict() for worker in self.workers}
        return {name: replicas[self._owner(name).name][name].copy() for name in self.master.state_dict()}

    def sharing_violations(self) -> List[str]:
        """Parámetros cuyas réplicas difieren dentro de su conjunto de sincronización."""
        violations = []
        for name in self.registry.names:
            members = self.registry.sync_set(name)
            reference = self.worker(members[0]).params[name].data.tobytes()
            if any(self.worker(w).params[name].data.tobytes() != reference for w in members[1:]):
                violations.append(name)
        return violations
