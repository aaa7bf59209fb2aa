"""Suites de propiedades ejecutadas por ``verify``.

Cada suite devuelve un texto de detalle o lanza una excepción; ``run_suites``
las ejecuta todas en orden y reporta cada una exactamente una vez.
"""

import copy
import logging
import time
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.models.boxes import BoxSet
from src.models.enums import Protocol, ShareType, Split, TaskFamily
from src.models.experiment import (
    BackboneConfig,
    DatasetSpec,
    EvaluationConfig,
    ExperimentConfig,
    HeadConfig,
    OptimizerConfig,
    ProjectorConfig,
    TrainPlan,
)
from src.models.reports import GradCheckReport, SuiteResult, VerifyReport
from src.networks.backbone import FeatureTap
from src.networks.heads import build_head
from src.networks.losses import iou
from src.networks.projector import TaskProjector, gate_fuse, gate_values
from src.numerics import ops
from src.numerics.gradcheck import check_primitive, grad_check
from src.numerics.tensor import Tensor

from . import metrics
from .curation import dedup_indices, dhash
from .data_synth import generate
from .evaluation_service import finetune
from .optimizers import build_optimizer
from .schedule import layer_decay_multiplier, lr_at
from .sharing_registry import discard_projectors
from .trainer import Trainer

logger = logging.getLogger(__name__)

GRADCHECK_TOLERANCE = 1e-3


# -- configuraciones mínimas ------------------------------------------------------


def tiny_experiment(
    share_type: ShareType = ShareType.TASK,
    pos_embed_shared: bool = True,
    max_iter: int = 3,
    optimizer: Optional[OptimizerConfig] = None,
    depth: int = 2,
) -> ExperimentConfig:
    """Experimento de cinco datasets (tarea A: 3, tarea B: 2) a escala mínima."""
    head = HeadConfig(num_classes=3)
    datasets = [
        DatasetSpec(name=f"attr_{i}", task="attributes", family=TaskFamily.ATTRIBUTE, seed=i,
                    samples=8, image_size=(16, 16), batch_per_replica=2, head=head)
        for i in range(3)
    ] + [
        DatasetSpec(name=f"parse_{i}", task="parsing", family=TaskFamily.PARSING, seed=10 + i,
                    samples=8, image_size=(16, 16), batch_per_replica=2, head=head)
        for i in range(2)
    ]
    return ExperimentConfig(
        backbone=BackboneConfig(patch_size=4, embed_dim=8, depth=depth, heads=2, mlp_ratio=2,
                                canonical_image=16, pos_embed_shared=pos_embed_shared),
        projector=ProjectorConfig(share_type=share_type),
        datasets=datasets,
        plan=TrainPlan(max_iter=max_iter, warmup_steps=1, base_lr=1e-4, warmup_lr=1e-2,
                       optimizer=optimizer or OptimizerConfig()),
        evaluation=EvaluationConfig(finetune_iters=2, train_samples=4, test_samples=4, partial_k=1),
    )


def full_scale_plan() -> TrainPlan:
    """Plan con las constantes del calendario a escala completa."""
    return TrainPlan(max_iter=80000, warmup_steps=1500, base_lr=1e-7, warmup_lr=5e-4,
                     lr_mults=[0.5, 0.2, 0.1], lr_steps=[40000, 60000, 76000])


# -- verificación de gradientes ---------------------------------------------------


def _head_case(family: TaskFamily) -> Callable[[], GradCheckReport]:
    def run() -> GradCheckReport:
        config = HeadConfig(num_classes=3, num_keypoints=2, num_queries=3, decoder_layers=1)
        head = build_head(family, "t", "d", 8, config, seed=3)
        data = generate(family, 5, 2, image_size=(8, 8), head=config, patch_size=4)
        images, labels = data.batch([0, 1])
        feature = Tensor(np.random.default_rng(7).standard_normal((2, 8, 2, 2)))
        return grad_check(lambda: head.loss(head(feature, images.shape[2:]), labels),
                          head.parameters(), tol=GRADCHECK_TOLERANCE, max_entries=6)

    return run


def _projector_case() -> GradCheckReport:
    projector = TaskProjector("t", 8, 2, ProjectorConfig(), seed=1)
    rng = np.random.default_rng(2)
    taps = FeatureTap([1, 2], [Tensor(rng.standard_normal((2, 8, 2, 2))) for _ in range(2)])
    weights = rng.standard_normal((2, 8, 2, 2))
    return grad_check(lambda: (projector(taps) * weights).sum(), projector.parameters(),
                      tol=GRADCHECK_TOLERANCE, max_entries=8)


def _batch_norm(inputs: Sequence[Tensor]) -> Tensor:
    return ops.batch_norm(inputs[0], ops.BatchNormState.create(3), "train", inputs[1], inputs[2])


GRADCHECK_CASES: Dict[str, Callable[[], GradCheckReport]] = {
    "matmul": lambda: check_primitive(lambda t: ops.matmul(t[0], t[1]), [(3, 4), (4, 2)]),
    "linear": lambda: check_primitive(lambda t: ops.linear(t[0], t[1], t[2]), [(2, 3, 4), (4, 5), (5,)]),
    "conv2d": lambda: check_primitive(
        lambda t: ops.conv2d(t[0], t[1], t[2], stride=2, padding=1), [(2, 2, 5, 5), (3, 2, 3, 3), (3,)]
    ),
    "transposed_conv2d": lambda: check_primitive(
        lambda t: ops.transposed_conv2d(t[0], t[1], t[2]), [(1, 2, 3, 3), (2, 3, 4, 4), (3,)]
    ),
    "upsample_nearest": lambda: check_primitive(lambda t: ops.upsample_nearest(t[0], 2), [(1, 2, 3, 3)]),
    "layer_norm": lambda: check_primitive(lambda t: ops.layer_norm(t[0], t[1], t[2]), [(2, 3, 5), (5,), (5,)]),
    "batch_norm": lambda: check_primitive(_batch_norm, [(4, 3, 2, 2), (3,), (3,)]),
    "gelu": lambda: check_primitive(lambda t: ops.gelu(t[0]), [(3, 4)]),
    "sigmoid": lambda: check_primitive(lambda t: ops.sigmoid(t[0]), [(3, 4)]),
    "softmax": lambda: check_primitive(lambda t: ops.softmax(t[0], axis=-1), [(3, 5)]),
    "bilinear_resize": lambda: check_primitive(lambda t: ops.bilinear_resize(t[0], 5, 7), [(1, 2, 3, 4)]),
    "cross_entropy": lambda: check_primitive(
        lambda t: ops.cross_entropy(t[0], np.array([0, 2, 1]), axis=1), [(3, 4)]
    ),
    "bce_with_logits": lambda: check_primitive(
        lambda t: ops.binary_cross_entropy_with_logits(t[0], np.array([[0.0, 1.0], [1.0, 0.0]])), [(2, 2)]
    ),
    "projector": _projector_case,
    **{f"head_{family.value}": _head_case(family) for family in TaskFamily},
}


def suite_gradcheck() -> str:
    failures = []
    worst = 0.0
    for name, case in GRADCHECK_CASES.items():
        report = case()
        worst = max(worst, report.max_rel_error)
        if not report.passed:
            failures.append(f"{name} ({report.max_rel_error:.2e})")
    if failures:
        raise AssertionError(f"gradientes incorrectos: {', '.join(failures)}")
    return f"{len(GRADCHECK_CASES)} casos, error relativo máximo {worst:.2e}"


# -- compartición -------------------------------------------------------------------------


def suite_sharing_identity(steps: int = 200) -> str:
    trainer = Trainer(tiny_experiment(max_iter=steps))
    initial = {w.name: copy.deepcopy(w.model.state_dict()) for w in trainer.workers}
    for step in range(steps):
        trainer.round(step)
        violations = trainer.sharing_violations()
        if violations:
            raise AssertionError(f"réplicas distintas tras el paso {step}: {violations[:3]}")
    for worker in trainer.workers:
        current = worker.model.state_dict()
        foreign = [
            name for name in current
            if name.startswith("head.") and name.split(".")[2] != worker.name
            and current[name].tobytes() != initial[worker.name][name].tobytes()
        ]
        if foreign:
            raise AssertionError(f"{worker.name} modificó cabezas ajenas: {foreign[:3]}")
    return f"{len(trainer.workers)} trabajadores, {steps} pasos sin divergencias entre réplicas"


def finetune_changes(
    config: ExperimentConfig, protocol: Protocol, seed: int = 0
) -> Tuple[List[str], Dict[str, Dict[str, Any]]]:
    """Afina una cabeza nueva sobre el primer dataset del experimento.

    Returns:
        (parámetros cuyo valor cambió, estado del optimizador por parámetro)
    """
    spec = config.datasets[0]
    data = generate(spec.family, spec.seed, 4, Split.IN_EVAL, spec.image_size, spec.head,
                    config.backbone.patch_size)
    model = discard_projectors(Trainer(config).state_dict(), config, spec)
    before = {name: p.data.tobytes() for name, p in model.named_parameters()}
    optimizer = build_optimizer(config.plan.optimizer)
    finetune(model, data, config, protocol, seed=seed, optimizer=optimizer)
    changed = [name for name, p in model.named_parameters() if p.data.tobytes() != before[name]]
    return changed, optimizer.state


def suite_freeze_semantics(iters: int = 500, k: int = 2) -> str:
    base = tiny_experiment(depth=k + 1)
    config = base.model_copy(
        update={"evaluation": base.evaluation.model_copy(update={"finetune_iters": iters, "partial_k": k})}
    )
    depth = config.backbone.depth
    allowed = {
        Protocol.HEAD_FT: ("head.",),
        Protocol.PARTIAL_FT: ("head.",) + tuple(f"backbone.blocks.{i}." for i in range(depth - k + 1, depth + 1)),
    }
    summary = []
    for protocol, prefixes in allowed.items():
        changed, state = finetune_changes(config, protocol)
        outside = [name for name in changed if not name.startswith(prefixes)]
        if outside:
            raise AssertionError(f"{protocol.value} modificó parámetros congelados: {outside[:3]}")
        if not any(name.startswith("head.") for name in changed):
            raise AssertionError(f"{protocol.value} no actualizó la cabeza")
        decayed = [name for name, entry in state.items() if entry["weight_decay"] != 0.0]
        if not state or decayed:
            raise AssertionError(f"{protocol.value} aplicó decaimiento de pesos: {decayed[:3]}")
        summary.append(f"{protocol.value}: {len(changed)} cambiados")
    return f"{iters} pasos, " + ", ".join(summary) + ", decaimiento nulo"


# -- calendario -------------------------------------------------------------------------


def suite_schedule() -> str:
    plan = full_scale_plan()
    checks = [
        (lr_at(0, plan), 1e-7),
        (lr_at(1500, plan), 5e-4),
        (lr_at(40000, plan), 2.5e-4),
        (lr_at(60000, plan), 5e-4 * 0.2),
        (lr_at(79999, plan), 5e-4 * 0.1),
        (layer_decay_multiplier(13, 12, 0.75), 1.0),
        (layer_decay_multiplier(12, 12, 0.75), 0.75),
        (layer_decay_multiplier(0, 12, 0.75), 0.75**13),
    ]
    for got, expected in checks:
        if got != expected:
            raise AssertionError(f"valor {got!r} != {expected!r}")
    if abs(lr_at(750, plan) - (1e-7 + 5e-4) / 2) > 1e-15:
        raise AssertionError("interpolación del calentamiento incorrecta")
    weights = [
        DatasetSpec(name="coco", task="pose", family=TaskFamily.POSE, sample_weight=224,
                    batch_per_replica=2, replicas=8000).loss_weight,
        DatasetSpec(name="crowdhuman", task="det", family=TaskFamily.DETECTION, sample_weight=2,
                    batch_per_replica=16, replicas=10).loss_weight,
        DatasetSpec(name="reid_mix", task="reid", family=TaskFamily.REID, sample_weight=112,
                    batch_per_replica=1, replicas=5).loss_weight,
    ]
    if weights != [3584000, 320, 560]:
        raise AssertionError(f"pesos de pérdida {weights}")
    return f"{len(checks) + 4} constantes exactas"


# -- oráculos de métricas ---------------------------------------------------------------


def brute_force_ap(relevance: Sequence[bool]) -> float:
    total = sum(relevance)
    if total == 0:
        return 0.0
    score = 0.0
    for rank in range(1, len(relevance) + 1):
        if relevance[rank - 1]:
            score += sum(relevance[:rank]) / rank
    return score / total


def brute_force_miou(pred: Sequence[int], gt: Sequence[int]) -> float:
    values = []
    for label in sorted(set(pred) | set(gt)):
        p = {i for i, v in enumerate(pred) if v == label}
        g = {i for i, v in enumerate(gt) if v == label}
        values.append(len(p & g) / len(p | g))
    return sum(values) / len(values)


def brute_force_ma(pred: np.ndarray, gt: np.ndarray) -> float:
    total = 0.0
    for column in range(gt.shape[1]):
        tp = fn = tn = fp = 0
        for p, g in zip(pred[:, column], gt[:, column]):
            if g and p:
                tp += 1
            elif g:
                fn += 1
            elif p:
                fp += 1
            else:
                tn += 1
        tpr = tp / (tp + fn) if tp + fn else 1.0
        tnr = tn / (tn + fp) if tn + fp else 1.0
        total += (tpr + tnr) / 2
    return total / gt.shape[1]


def brute_force_detection_ap(predictions: Sequence[BoxSet], ground_truth: Sequence[BoxSet]) -> float:
    """AP recontando precisión y recall desde cero para cada prefijo del ranking."""
    total = sum(len(gt) for gt in ground_truth)
    ranked = sorted(
        ((-s, i, j) for i, p in enumerate(predictions) for j, s in enumerate(p.scores)), key=lambda t: t
    )
    points = []
    for k in range(1, len(ranked) + 1):
        prefix = [
            BoxSet(boxes=[], classes=[], scores=[]) for _ in predictions
        ]
        for _, i, j in ranked[:k]:
            prefix[i] = BoxSet(
                boxes=prefix[i].boxes + [predictions[i].boxes[j]],
                classes=prefix[i].classes + [predictions[i].classes[j]],
                scores=prefix[i].scores + [predictions[i].scores[j]],
            )
        tp = 0
        for image, (pred, gt) in enumerate(zip(prefix, ground_truth)):
            used = set()
            order = sorted(range(len(pred)), key=lambda j: -pred.scores[j])
            for j in order:
                best, best_iou = None, -1.0
                for g in range(len(gt)):
                    if gt.classes[g] != pred.classes[j]:
                        continue
                    overlap = iou(pred.boxes[j], gt.boxes[g])
                    if overlap > best_iou:
                        best, best_iou = g, overlap
                if best is not None and best_iou >= 0.5 and best not in used:
                    used.add(best)
                    tp += 1
        points.append((tp / total, tp / k))
    ap, previous = 0.0, 0.0
    for index, (recall, _) in enumerate(points):
        if recall > previous:
            ap += (recall - previous) * max(p for _, p in points[index:])
            previous = recall
    return ap


def brute_force_pck(heatmaps: np.ndarray, keypoints: np.ndarray, threshold: float) -> Tuple[float, float]:
    """PCK y EPE recorriendo cada mapa píxel a píxel; mapas a resolución de imagen."""
    hits, errors = 0, []
    for sample in range(heatmaps.shape[0]):
        for joint in range(heatmaps.shape[1]):
            heatmap = heatmaps[sample, joint]
            best, peak = -np.inf, (0, 0)
            for row in range(heatmap.shape[0]):
                for col in range(heatmap.shape[1]):
                    if heatmap[row, col] > best:
                        best, peak = heatmap[row, col], (col, row)
            gx, gy = keypoints[sample, joint]
            error = ((peak[0] - gx) ** 2 + (peak[1] - gy) ** 2) ** 0.5
            errors.append(error)
            hits += error <= threshold
    return hits / len(errors), sum(errors) / len(errors)


def suite_metric_oracles(trials: int = 100, seed: int = 0) -> str:
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        n = int(rng.integers(2, 20))
        relevance = list(rng.random(n) < 0.4)
        if any(relevance) and abs(metrics.average_precision(relevance) - brute_force_ap(relevance)) > 1e-12:
            raise AssertionError("AP de ReID difiere del oráculo")

        pred, gt = rng.integers(0, 4, size=n), rng.integers(0, 4, size=n)
        if abs(metrics.miou_pacc(pred, gt, 4)[0] - brute_force_miou(list(pred), list(gt))) > 1e-12:
            raise AssertionError("mIoU difiere del oráculo")

        probs, labels = rng.random((n, 3)), rng.integers(0, 2, size=(n, 3))
        if abs(metrics.attribute_ma(probs, labels) - brute_force_ma(probs >= 0.5, labels)) > 1e-12:
            raise AssertionError("mA difiere del oráculo")

        gts, preds = [], []
        for _ in range(int(rng.integers(1, 4))):
            gts.append(_random_boxset(rng, int(rng.integers(0, 3)), scored=False))
            preds.append(_random_boxset(rng, int(rng.integers(0, 4)), scored=True, near=gts[-1]))
        expected = metrics.detection_ap50(preds, gts)
        if expected is not None and abs(expected - brute_force_detection_ap(preds, gts)) > 1e-9:
            raise AssertionError("AP50 difiere del oráculo")

        samples, joints = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        hw = (int(rng.integers(2, 9)), int(rng.integers(2, 9)))
        heatmaps = rng.random((samples, joints) + hw)
        keypoints = rng.uniform(0.0, max(hw), size=(samples, joints, 2))
        threshold = float(rng.uniform(0.5, 4.0))
        got = metrics.pose_pck_epe(heatmaps, keypoints, threshold, image_hw=hw)
        if not np.allclose(got, brute_force_pck(heatmaps, keypoints, threshold), rtol=0.0, atol=1e-9):
            raise AssertionError("PCK/EPE difiere del oráculo")
    return f"{trials} instancias aleatorias coinciden con los oráculos"


def _random_boxset(rng: np.random.Generator, count: int, scored: bool, near: Optional[BoxSet] = None) -> BoxSet:
    boxes, classes = [], []
    for index in range(count):
        if near is not None and len(near) and rng.random() < 0.6:
            x0, y0, x1, y1 = near.boxes[index % len(near)]
            jitter = rng.uniform(-0.03, 0.03, size=4)
            box = np.clip([x0 + jitter[0], y0 + jitter[1], x1 + jitter[2], y1 + jitter[3]], 0.0, 1.0)
            label = near.classes[index % len(near)]
        else:
            corner = rng.uniform(0.0, 0.6, size=2)
            box = np.concatenate([corner, corner + rng.uniform(0.1, 0.4, size=2)])
            label = int(rng.integers(0, 2))
        x0, y0, x1, y1 = (float(v) for v in box)
        boxes.append((min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1)))
        classes.append(label)
    scores = [float(s) for s in rng.random(count)] if scored else None
    return BoxSet(boxes=boxes, classes=classes, scores=scores)


# -- deduplicación -----------------------------------------------------------------------


def brute_force_dedup(pretrain: Sequence[int], evaluation: Sequence[int]) -> List[int]:
    return [i for i, code in enumerate(pretrain) if not any(code == other for other in evaluation)]


def suite_dedup_oracle(seed: int = 0, total: int = 1000, planted: int = 10) -> str:
    pretrain = generate(TaskFamily.ATTRIBUTE, seed, total, image_size=(16, 16)).images.copy()
    evaluation = generate(TaskFamily.ATTRIBUTE, seed + 1, 5 * planted, image_size=(16, 16)).images
    rng = np.random.default_rng(seed)
    targets = sorted(int(i) for i in rng.choice(total, size=planted, replace=False))
    sources = rng.choice(len(evaluation), size=planted, replace=False)
    pretrain[targets] = evaluation[sources]
    pre_codes = [dhash(image) for image in pretrain]
    eval_codes = [dhash(image) for image in evaluation]
    kept = dedup_indices(pre_codes, eval_codes)
    expected = brute_force_dedup(pre_codes, eval_codes)
    if kept != expected:
        raise AssertionError(f"dedup difiere del oráculo en {sorted(set(kept) ^ set(expected))[:5]}")
    removed = sorted(set(range(total)) - set(kept))
    if removed != targets:
        raise AssertionError(f"dedup eliminó {removed[:12]}, se plantaron {targets}")
    return f"{len(removed)} de {total} imágenes eliminadas, exactamente las plantadas"


# -- compuertas ------------------------------------------------------------------------------


def suite_gating_contract(trials: int = 1000, seed: int = 0) -> str:
    projector = TaskProjector("t", 8, 4, ProjectorConfig(), seed=seed)
    if not np.all(projector.gate_values().data == 0.5):
        raise AssertionError("compuertas iniciales deben valer 0.5 exactamente")
    single = gate_values(Tensor(np.array([0.1])), 0.1).item()
    if abs(single - 0.7310586) > 1e-6:
        raise AssertionError(f"mu(0.1, T=0.1) = {single}")
    rng = np.random.default_rng(seed)
    feature = Tensor(rng.standard_normal((1, 2, 2, 2)))
    fused = gate_fuse([feature] * 4, Tensor(rng.standard_normal(4)), 0.1)
    if not np.allclose(fused.data, feature.data, atol=1e-12):
        raise AssertionError("la fusión de capas idénticas debe ser la identidad")
    for trial in range(trials):
        layers = int(rng.integers(1, 7))
        shape = tuple(int(n) for n in rng.integers(1, 4, size=4))
        features = [Tensor(rng.standard_normal(shape)) for _ in range(layers)]
        alphas = Tensor(rng.normal(0.0, 2.0, size=layers))
        stacked = np.stack([f.data for f in features])
        value = gate_fuse(features, alphas, float(rng.uniform(0.05, 1.0))).data
        if np.any(value < stacked.min(axis=0) - 1e-9) or np.any(value > stacked.max(axis=0) + 1e-9):
            raise AssertionError(f"la fusión sale de la envolvente en el intento {trial}")
    return f"compuertas neutras en cero, {trials} fusiones dentro de la envolvente"


SUITES: Dict[str, Callable[[], str]] = {
    "gradcheck": suite_gradcheck,
    "sharing_identity": suite_sharing_identity,
    "freeze_semantics": suite_freeze_semantics,
    "schedule_exactness": suite_schedule,
    "metric_oracles": suite_metric_oracles,
    "dedup_oracle": suite_dedup_oracle,
    "gating_contract": suite_gating_contract,
}


def run_suites(names: Optional[Iterable[str]] = None) -> VerifyReport:
    """Ejecuta las suites pedidas (todas por defecto) en orden de registro."""
    selected = list(SUITES) if names is None else [name for name in SUITES if name in set(names)]
    results: List[SuiteResult] = []
    for name in selected:
        started = time.perf_counter()
        try:
            detail, passed = SUITES[name](), True
        except Exception as exc:
            detail, passed = f"{type(exc).__name__}: {exc}", False
            logger.error("suite %s falló: %s", name, detail)
        results.append(SuiteResult(name=name, passed=passed, detail=detail, seconds=time.perf_counter() - started))
    return VerifyReport(suites=results)
