"""Evaluación descendente: escenarios × protocolos sobre datos sintéticos.

Para cada dataset del escenario se construye un modelo de evaluación (backbone
del checkpoint + cabeza nueva, sin proyectores), se aplica la máscara del
protocolo, se afina sobre la partición de entrenamiento y se miden las
métricas de la familia sobre la partición de prueba.
"""

import csv
import io
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from src.models.boxes import BoxSet
from src.models.enums import Protocol, Scenario, Split, TaskFamily
from src.models.errors import ConfigError, DivergenceError
from src.models.experiment import DatasetSpec, ExperimentConfig
from src.models.reports import DatasetMetric, EvalReport
from src.networks.path_model import EvaluationModel
from src.numerics.tensor import no_grad

from . import metrics
from .checkpoint_repository import Checkpoint, load_checkpoint
from .curation import dedup_indices, hash_dataset, subset
from .data_synth import SyntheticDataset, generate
from .optimizers import Optimizer, build_optimizer
from .schedule import weight_decay_for
from .sharing_registry import discard_projectors, freeze_mask_for

logger = logging.getLogger(__name__)

# Umbral de PCK como fracción del lado mayor de la imagen
PCK_THRESHOLD_FRACTION = 0.1


def scenario_specs(config: ExperimentConfig, scenario: Scenario) -> List[DatasetSpec]:
    """Datasets evaluados en un escenario.

    Raises:
        ConfigError: Si la tarea no vista forma parte del preentrenamiento
    """
    if Scenario(scenario) is Scenario.UNSEEN_TASK:
        unseen = config.evaluation.unseen
        if unseen.task in config.tasks:
            raise ConfigError(f"la tarea no vista '{unseen.task}' aparece en el preentrenamiento")
        return [unseen]
    return list(config.datasets)


def scenario_split(
    spec: DatasetSpec, scenario: Scenario, config: ExperimentConfig
) -> Tuple[SyntheticDataset, SyntheticDataset]:
    """Particiones (entrenamiento, prueba) de un dataset en el escenario.

    El escenario intra-dataset usa la semilla de preentrenamiento; el
    extra-dataset usa una semilla reservada de la misma familia.
    """
    evaluation = config.evaluation
    if Scenario(scenario) is Scenario.OUT_OF_DATASET:
        seed, split = spec.seed + evaluation.heldout_seed_offset, Split.OUT_EVAL
    else:
        seed, split = spec.seed, Split.IN_EVAL
    total = evaluation.train_samples + evaluation.test_samples
    data = generate(
        spec.family, seed, total, split=split, image_size=spec.resolved_image_size(),
        head=spec.head, patch_size=config.backbone.patch_size,
    )
    train_idx = list(range(evaluation.train_samples))
    test = subset(data, list(range(evaluation.train_samples, total)))
    # Sin fuga: se descartan imágenes de entrenamiento idénticas a alguna de prueba
    keep = dedup_indices(hash_dataset(subset(data, train_idx)), hash_dataset(test))
    return subset(data, keep), test


def finetune(
    model: EvaluationModel,
    data: SyntheticDataset,
    config: ExperimentConfig,
    protocol: Protocol,
    seed: int,
    optimizer: Optional[Optimizer] = None,
) -> List[float]:
    """Afina los parámetros entrenables del modelo según el protocolo.

    Args:
        model: Modelo de evaluación con la cabeza nueva
        data: Partición de entrenamiento
        config: Experimento con los ajustes de evaluación
        protocol: Protocolo que fija la máscara de congelamiento
        seed: Semilla del muestreo de lotes
        optimizer: Optimizador a usar; si falta se construye desde el plan

    Raises:
        DivergenceError: Si la pérdida deja de ser finita
    """
    evaluation = config.evaluation
    names = [name for name, _ in model.named_parameters()]
    mask = freeze_mask_for(names, protocol, config.backbone.depth, evaluation.partial_k)
    mask.apply(model)
    params = dict(model.named_parameters())
    optimizer = optimizer or build_optimizer(config.plan.optimizer)
    rng = np.random.default_rng([seed, len(data)])
    batch = max(2, model.spec.batch_per_replica)
    losses = []
    model.train()
    for step in range(evaluation.finetune_iters):
        indices = rng.integers(0, len(data), size=batch)
        images, labels = data.batch(indices)
        model.zero_grad()
        loss = model.loss(images, labels)
        value = loss.item()
        if not np.isfinite(value):
            model.zero_grad()
            raise DivergenceError(step, model.spec.name, value)
        loss.backward()
        losses.append(value)
        grads = {
            name: p.grad for name, p in params.items() if p.trainable and p.grad is not None
        }
        lrs = {name: evaluation.finetune_lr for name in grads}
        decays = {
            name: weight_decay_for(name, config.plan, mask.force_zero_weight_decay) for name in grads
        }
        optimizer.step(params, grads, lrs, decays)
    model.zero_grad()
    return losses


def predict(model: EvaluationModel, data: SyntheticDataset, batch: int = 16) -> Dict[str, Any]:
    """Predicciones de la cabeza sobre todo el dataset, en orden."""
    model.eval()
    chunks: List[Dict[str, Any]] = []
    with no_grad():
        for start in range(0, len(data), batch):
            images, _ = data.batch(range(start, min(start + batch, len(data))))
            chunks.append(model.head.predict(model.forward(images)))
    return {key: np.concatenate([chunk[key] for chunk in chunks]) for key in chunks[0]}


def to_boxsets(prediction: Dict[str, Any]) -> List[BoxSet]:
    """Convierte las salidas de todas las consultas en conjuntos de cajas con puntuación."""
    sets = []
    for boxes, scores, classes in zip(prediction["boxes"], prediction["scores"], prediction["classes"]):
        sets.append(
            BoxSet(
                boxes=[tuple(float(v) for v in box) for box in boxes],
                classes=[int(c) for c in classes],
                scores=[float(s) for s in scores],
            )
        )
    return sets


def measure(
    family: TaskFamily, spec: DatasetSpec, prediction: Dict[str, Any], test: SyntheticDataset
) -> List[Tuple[str, Optional[float]]]:
    """Métricas (principal primero) de una familia sobre la partición de prueba."""
    _, labels = test.batch(range(len(test)))
    if family is TaskFamily.REID:
        half = len(test) // 2
        emb, ids = prediction["embedding"], labels["identity"]
        map_, top1 = metrics.reid_map_top1(emb[:half], emb[half:], ids[:half], ids[half:])
        return [("mAP", map_), ("top1", top1)]
    if family is TaskFamily.PARSING:
        miou, pacc = metrics.miou_pacc(prediction["mask"], labels["mask"], spec.head.num_classes)
        return [("mIoU", miou), ("pACC", pacc)]
    if family is TaskFamily.POSE:
        threshold = PCK_THRESHOLD_FRACTION * max(test.image_size)
        pck, epe = metrics.pose_pck_epe(prediction["heatmaps"], labels["keypoints"], threshold, test.image_size)
        return [("PCK", pck), ("EPE", epe)]
    if family is TaskFamily.ATTRIBUTE:
        return [("mA", metrics.attribute_ma(prediction["probabilities"], labels["attributes"]))]
    if family is TaskFamily.DETECTION:
        return [("AP50", metrics.detection_ap50(to_boxsets(prediction), labels["boxes"]))]
    mae, rmse = metrics.counting_errors(prediction["count"], labels["count"])
    return [("MAE", mae), ("RMSE", rmse)]


def run_evaluation(
    checkpoint: Union[Checkpoint, str, Path],
    scenario: Scenario,
    protocol: Protocol,
    config: Optional[ExperimentConfig] = None,
    seed: Optional[int] = None,
) -> EvalReport:
    """Evalúa un checkpoint en un escenario con un protocolo.

    Args:
        checkpoint: Checkpoint cargado o ruta
        scenario: in | out | unseen
        protocol: full-ft | head-ft | partial-ft
        config: Experimento; por defecto el guardado en el checkpoint
        seed: Semilla de las cabezas y los lotes; por defecto la del checkpoint

    Raises:
        ConfigError: Escenario o protocolo no configurados
        DivergenceError: Si el afinado de algún dataset diverge
    """
    started = time.perf_counter()
    if not isinstance(checkpoint, Checkpoint):
        checkpoint = load_checkpoint(checkpoint)
    if config is None:
        if "config" not in checkpoint.metadata:
            raise ConfigError("el checkpoint no incluye la configuración del experimento")
        config = ExperimentConfig.model_validate(checkpoint.metadata["config"])
    scenario, protocol = Scenario(scenario), Protocol(protocol)
    if scenario not in config.evaluation.scenarios:
        raise ConfigError(f"escenario no configurado: {scenario.value}")
    if protocol not in config.evaluation.protocols:
        raise ConfigError(f"protocolo no configurado: {protocol.value}")
    seed = checkpoint.seed if seed is None else seed

    rows: List[DatasetMetric] = []
    for spec in scenario_specs(config, scenario):
        train, test = scenario_split(spec, scenario, config)
        model = discard_projectors(checkpoint.entries, config, spec, seed=seed)
        finetune(model, train, config, protocol, seed)
        prediction = predict(model, test)
        for metric, value in measure(spec.family, spec, prediction, test):
            rows.append(DatasetMetric(dataset=spec.name, family=spec.family.value, metric=metric, value=value))
        logger.info("evaluado %s (%s, %s)", spec.name, scenario.value, protocol.value)

    return EvalReport(
        scenario=scenario,
        protocol=protocol,
        seed=seed,
        backbone_frozen=protocol is Protocol.HEAD_FT,
        metrics=rows,
        wall_time=time.perf_counter() - started,
    )


def format_report(report: EvalReport) -> str:
    """Tabla legible: una columna por dataset con sus métricas."""
    tag = "[out-of-dataset] " if report.scenario is Scenario.OUT_OF_DATASET else ""
    lines = [
        f"{tag}escenario={report.scenario.value} protocolo={report.protocol.value} "
        f"semilla={report.seed} backbone_congelado={report.backbone_frozen}"
    ]
    for dataset, values in report.values().items():
        cells = ", ".join(f"{k}={'n/a' if v is None else f'{v:.4f}'}" for k, v in values.items())
        lines.append(f"  {dataset:<20} {cells}")
    return "\n".join(lines)


def report_csv(report: EvalReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(("scenario", "protocol", "seed", "dataset", "family", "metric", "value"))
    for row in report.metrics:
        writer.writerow(
            (report.scenario.value, report.protocol.value, report.seed, row.dataset, row.family, row.metric,
             "" if row.value is None else repr(row.value))
        )
    return buffer.getvalue()
