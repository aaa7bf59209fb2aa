"""Grafo del preentrenamiento multi-trabajador.

Cada ronda recorre local_step → synchronize → optimizer_step; una arista
condicional decide si se inicia otra ronda o se termina. El entrenador viaja
en ``config["configurable"]["trainer"]`` para que el estado del grafo solo
contenga valores serializables.
"""

import logging
import os
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from langchain_core.runnables import RunnableConfig
from langgraph.graph import END, START, StateGraph

from src.config.settings import PATHS, SYSTEM
from src.models.errors import DivergenceError
from src.models.experiment import ExperimentConfig
from src.models.train_state import StepRecord, TrainNode, TrainState, get_initial_state
from src.services.checkpoint_repository import save_checkpoint
from src.services.data_synth import SyntheticDataset
from src.services.metrics_log import MetricsLog
from src.services.run_analytics import (
    track_divergence,
    track_run_finished,
    track_run_started,
    track_step_summary,
)
from src.services.trainer import Trainer

logger = logging.getLogger(__name__)


def _trainer(config: RunnableConfig) -> Trainer:
    return config["configurable"]["trainer"]


def begin_node(state: TrainState, config: RunnableConfig) -> Dict[str, Any]:
    """Registra el inicio de la corrida."""
    trainer = _trainer(config)
    track_run_started(state["run_id"], trainer.seed, [w.name for w in trainer.workers], state["max_iter"])
    return {"current_node": TrainNode.BEGIN, "status": "running"}


def local_step_node(state: TrainState, config: RunnableConfig) -> Dict[str, Any]:
    """Pasos locales de todos los trabajadores."""
    trainer = _trainer(config)
    step = state["step"]
    losses = trainer.local_steps(step)
    return {"losses": losses, "lr": trainer.lr(step), "current_node": TrainNode.LOCAL_STEP}


def synchronize_node(state: TrainState, config: RunnableConfig) -> Dict[str, Any]:
    """Barrera: media de gradientes por conjunto de sincronización."""
    _trainer(config).synchronize()
    return {"current_node": TrainNode.SYNCHRONIZE}


def optimizer_step_node(state: TrainState, config: RunnableConfig) -> Dict[str, Any]:
    """Actualización de todas las réplicas y registro de pérdidas."""
    trainer = _trainer(config)
    step = state["step"]
    trainer.optimizer_step(step)

    records = [
        StepRecord(step=step, dataset=name, loss=loss, lr=state["lr"]) for name, loss in state["losses"].items()
    ]
    metrics_log: Optional[MetricsLog] = config["configurable"].get("metrics_log")
    if metrics_log is not None:
        metrics_log.append(step, state["losses"], state["lr"])
    every = max(1, SYSTEM["analytics_every"])
    if step % every == 0 or step == state["max_iter"] - 1:
        track_step_summary(state["run_id"], step, state["losses"], state["lr"])
        logger.info("paso %d/%d lr=%.3e %s", step + 1, state["max_iter"], state["lr"], state["losses"])
    return {"step": step + 1, "history": records, "current_node": TrainNode.OPTIMIZER_STEP}


def decide_next_round(state: TrainState) -> str:
    """Otra ronda mientras queden iteraciones."""
    return TrainNode.LOCAL_STEP.value if state["step"] < state["max_iter"] else END


def create_pretrain_graph():
    """Crea el grafo de preentrenamiento.

    Returns:
        Grafo compilado listo para ser ejecutado
    """
    workflow = StateGraph(TrainState)

    workflow.add_node(TrainNode.BEGIN.value, begin_node)
    workflow.add_node(TrainNode.LOCAL_STEP.value, local_step_node)
    workflow.add_node(TrainNode.SYNCHRONIZE.value, synchronize_node)
    workflow.add_node(TrainNode.OPTIMIZER_STEP.value, optimizer_step_node)

    workflow.add_edge(START, TrainNode.BEGIN.value)
    workflow.add_edge(TrainNode.LOCAL_STEP.value, TrainNode.SYNCHRONIZE.value)
    workflow.add_edge(TrainNode.SYNCHRONIZE.value, TrainNode.OPTIMIZER_STEP.value)

    routes = {TrainNode.LOCAL_STEP.value: TrainNode.LOCAL_STEP.value, END: END}
    workflow.add_conditional_edges(TrainNode.BEGIN.value, decide_next_round, routes)
    workflow.add_conditional_edges(TrainNode.OPTIMIZER_STEP.value, decide_next_round, routes)

    return workflow.compile()


# Instanciar el grafo
graph = create_pretrain_graph()


@dataclass
class PretrainResult:
    """Artefactos de un preentrenamiento."""

    run_id: str
    checkpoint_path: Path
    metrics_path: Path
    final_losses: Dict[str, float]
    steps: int
    trainer: Trainer


def run_pretrain(
    config: ExperimentConfig,
    out_dir: Optional[Union[str, Path]] = None,
    seed: Optional[int] = None,
    max_workers: Optional[int] = None,
    run_id: Optional[str] = None,
    datasets: Optional[Mapping[str, SyntheticDataset]] = None,
) -> PretrainResult:
    """Ejecuta el preentrenamiento completo y guarda checkpoint y métricas.

    Args:
        config: Experimento validado
        out_dir: Directorio de salida (por defecto ``<data_dir>/runs/<run_id>``)
        seed: Semilla global (por defecto la del plan)
        max_workers: Contextos de ejecución concurrentes
        run_id: Identificador de la corrida
        datasets: Datasets ya generados por nombre

    Returns:
        PretrainResult: Rutas de los artefactos y pérdidas finales

    Raises:
        DivergenceError: Tras guardar el último checkpoint válido
    """
    run_id = run_id or uuid.uuid4().hex[:12]
    out = Path(out_dir) if out_dir is not None else Path(PATHS["data_dir"]) / "runs" / run_id
    out.mkdir(parents=True, exist_ok=True)
    trainer = Trainer(config, seed=seed, max_workers=max_workers or SYSTEM["workers"], datasets=datasets)
    metrics_path = out / "metrics.csv"
    checkpoint_path = out / "checkpoint.ckpt"
    if metrics_path.exists():
        os.remove(metrics_path)

    max_iter = config.plan.max_iter
    runnable: RunnableConfig = {
        "configurable": {"trainer": trainer, "metrics_log": MetricsLog(metrics_path), "thread_id": run_id},
        "recursion_limit": 3 * max_iter + 10,
    }
    metadata = {"config": config.model_dump(mode="json")}

    try:
        result = graph.invoke(get_initial_state(run_id, max_iter), runnable)
    except DivergenceError as exc:
        save_checkpoint(checkpoint_path, trainer.last_good_state(), trainer.seed, {**metadata, "steps": exc.step})
        track_divergence(run_id, exc.step, exc.dataset, exc.value)
        logger.error("divergencia: %s; último checkpoint válido en %s", exc, checkpoint_path)
        raise

    save_checkpoint(checkpoint_path, trainer.state_dict(), trainer.seed, {**metadata, "steps": result["step"]})
    final_losses = dict(result.get("losses", {}))
    track_run_finished(run_id, str(checkpoint_path), final_losses)
    return PretrainResult(
        run_id=run_id,
        checkpoint_path=checkpoint_path,
        metrics_path=metrics_path,
        final_losses=final_losses,
        steps=result["step"],
        trainer=trainer,
    )
