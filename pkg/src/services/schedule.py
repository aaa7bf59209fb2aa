"""Calendario de tasa de aprendizaje, decaimiento por capa y pesos de pérdida."""

from typing import Union

from src.models.errors import ConfigError
from src.models.experiment import DatasetSpec, TrainPlan


def loss_weight(spec: DatasetSpec) -> Union[int, float]:
    """Peso λ del dataset: sample_weight × imágenes por réplica × réplicas."""
    return spec.loss_weight


def lr_at(step: int, plan: TrainPlan) -> float:
    """Tasa de aprendizaje global en un paso.

    Calentamiento lineal de ``base_lr`` a ``warmup_lr`` durante
    ``warmup_steps`` y, después, ``warmup_lr`` por el último multiplicador
    cuyo paso ya se alcanzó (los multiplicadores se reemplazan, no se acumulan).

    Raises:
        ConfigError: Si el paso es negativo
    """
    if step < 0:
        raise ConfigError(f"paso negativo: {step}")
    if step < plan.warmup_steps:
        return plan.base_lr + (plan.warmup_lr - plan.base_lr) * step / plan.warmup_steps
    mult = 1.0
    for boundary, value in zip(plan.lr_steps, plan.lr_mults):
        if step >= boundary:
            mult = value
    return plan.warmup_lr * mult


def layer_decay_multiplier(depth_index: int, num_layers: int, rate: float) -> float:
    """Multiplicador rate^(L+1-d) para la profundidad ``d``.

    Args:
        depth_index: 0 para el embedding, 1..L para bloques, L+1 para proyector y cabeza
        num_layers: Número de bloques L
        rate: Tasa de decaimiento

    Raises:
        ConfigError: Si ``d`` está fuera de [0, L+1]
    """
    if not 0 <= depth_index <= num_layers + 1:
        raise ConfigError(f"profundidad {depth_index} fuera de [0, {num_layers + 1}]")
    return rate ** (num_layers + 1 - depth_index)


def parameter_depth(name: str, num_layers: int) -> int:
    """Profundidad de un parámetro a partir de su nombre."""
    parts = name.split(".")
    if parts[0] != "backbone":
        return num_layers + 1
    if parts[1] == "blocks":
        return int(parts[2])
    return 0


def effective_lr(name: str, step: int, plan: TrainPlan, num_layers: int) -> float:
    """lr_at × decaimiento por capa × multiplicadores de backbone y embedding."""
    lr = lr_at(step, plan) * layer_decay_multiplier(
        parameter_depth(name, num_layers), num_layers, plan.layer_decay_rate
    )
    if name.startswith("backbone."):
        lr *= plan.backbone_multiplier
    if name.startswith("backbone.pos_embed"):
        lr *= plan.pos_embed_multiplier
    return lr


def weight_decay_for(name: str, plan: TrainPlan, force_zero: bool = False) -> float:
    """Decaimiento de pesos del parámetro.

    Args:
        name: Nombre del parámetro
        plan: Plan con el decaimiento base
        force_zero: Valor de ``FreezeMask.force_zero_weight_decay`` del protocolo
    """
    if force_zero or name.endswith(".gates"):
        return 0.0
    return plan.weight_decay
