"""Definición del estado para los grafos de entrenamiento y experimentos."""

import operator
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional, TypedDict

from typing_extensions import Annotated


class TrainNode(str, Enum):
    """Nodos del grafo de preentrenamiento."""

    BEGIN = "begin"
    LOCAL_STEP = "local_step"
    SYNCHRONIZE = "synchronize"
    OPTIMIZER_STEP = "optimizer_step"


class StepRecord(TypedDict):
    """Pérdida de un dataset en un paso."""

    step: int
    dataset: str
    loss: float
    lr: float


class TrainState(TypedDict, total=False):
    """Estado compartido a través del bucle de rondas sincronizadas."""

    run_id: str
    started_at: str
    step: int
    max_iter: int
    lr: float
    # Pérdidas del paso en curso, por dataset
    losses: Dict[str, float]
    # Historial acumulado (reductor de concatenación)
    history: Annotated[List[StepRecord], operator.add]
    current_node: TrainNode
    status: str
    error: Optional[str]


class ExperimentState(TypedDict, total=False):
    """Estado del grafo preentrenamiento → evaluación → resumen."""

    run_id: str
    seed: int
    checkpoint_path: Optional[str]
    final_losses: Dict[str, float]
    reports: Annotated[List[Any], operator.add]
    summary: Dict[str, Any]
    error: Optional[str]


def get_initial_state(run_id: str, max_iter: int) -> TrainState:
    """Crea el estado inicial para el grafo de preentrenamiento."""
    return {
        "run_id": run_id,
        "started_at": datetime.now().isoformat(),
        "step": 0,
        "max_iter": max_iter,
        "lr": 0.0,
        "losses": {},
        "history": [],
        "current_node": TrainNode.BEGIN,
        "status": "running",
        "error": None,
    }


def get_initial_experiment_state(run_id: str, seed: int) -> ExperimentState:
    """Crea el estado inicial para el grafo de experimento."""
    return {
        "run_id": run_id,
        "seed": seed,
        "checkpoint_path": None,
        "final_losses": {},
        "reports": [],
        "summary": {},
        "error": None,
    }
