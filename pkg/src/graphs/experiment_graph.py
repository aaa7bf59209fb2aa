"""Grafo de experimento: preentrenamiento → evaluaciones → resumen.

Lo usa la ablación para correr variantes emparejadas con la misma semilla.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from langchain_core.runnables import RunnableConfig
from langgraph.graph import END, START, StateGraph

from src.models.enums import Protocol, Scenario, ShareType
from src.models.experiment import ExperimentConfig
from src.models.reports import AblationRow, AblationTable, EvalReport
from src.models.train_state import ExperimentState, get_initial_experiment_state
from src.services.evaluation_service import run_evaluation
from src.services.run_analytics import track_evaluation

from .pretrain_graph import run_pretrain

logger = logging.getLogger(__name__)

Run = Tuple[Scenario, Protocol]


def pretrain_node(state: ExperimentState, config: RunnableConfig) -> Dict[str, Any]:
    """Preentrena el experimento y guarda el checkpoint."""
    options = config["configurable"]
    result = run_pretrain(
        options["experiment"],
        out_dir=options.get("out_dir"),
        seed=state["seed"],
        max_workers=options.get("max_workers"),
        run_id=state["run_id"],
    )
    return {"checkpoint_path": str(result.checkpoint_path), "final_losses": result.final_losses}


def evaluate_node(state: ExperimentState, config: RunnableConfig) -> Dict[str, Any]:
    """Evalúa el checkpoint en cada (escenario, protocolo) pedido."""
    options = config["configurable"]
    reports = []
    for scenario, protocol in options["runs"]:
        report = run_evaluation(state["checkpoint_path"], scenario, protocol, config=options["experiment"],
                                seed=state["seed"])
        track_evaluation(state["run_id"], report.model_dump(mode="json"))
        reports.append(report.model_dump(mode="json"))
    return {"reports": reports}


def summarize_node(state: ExperimentState) -> Dict[str, Any]:
    """Resume pérdidas finales y métricas por escenario y protocolo."""
    metrics: Dict[str, Any] = {}
    for raw in state["reports"]:
        report = EvalReport.model_validate(raw)
        key = f"{report.scenario.value}/{report.protocol.value}"
        metrics[key] = {f"{row.dataset}.{row.metric}": row.value for row in report.metrics}
    return {"summary": {"final_losses": state["final_losses"], "metrics": metrics}}


def create_experiment_graph():
    """Crea el grafo lineal del experimento.

    Returns:
        Grafo compilado listo para ser ejecutado
    """
    workflow = StateGraph(ExperimentState)
    workflow.add_node("pretrain", pretrain_node)
    workflow.add_node("evaluate", evaluate_node)
    workflow.add_node("summarize", summarize_node)
    workflow.add_edge(START, "pretrain")
    workflow.add_edge("pretrain", "evaluate")
    workflow.add_edge("evaluate", "summarize")
    workflow.add_edge("summarize", END)
    return workflow.compile()


graph = create_experiment_graph()


def run_experiment(
    config: ExperimentConfig,
    runs: Sequence[Run],
    seed: int,
    run_id: str,
    out_dir: Optional[Union[str, Path]] = None,
    max_workers: Optional[int] = None,
) -> ExperimentState:
    """Preentrena y evalúa un experimento."""
    runnable: RunnableConfig = {
        "configurable": {
            "experiment": config,
            "runs": list(runs),
            "out_dir": out_dir,
            "max_workers": max_workers,
            "thread_id": run_id,
        }
    }
    return graph.invoke(get_initial_experiment_state(run_id, seed), runnable)


def variant_config(config: ExperimentConfig, share_type: ShareType, pos_embed_shared: bool) -> ExperimentConfig:
    """Copia del experimento con otra variante de compartición."""
    return config.model_copy(
        update={
            "projector": config.projector.model_copy(update={"share_type": ShareType(share_type)}),
            "backbone": config.backbone.model_copy(update={"pos_embed_shared": pos_embed_shared}),
        }
    )


def run_ablation(
    config: ExperimentConfig,
    variants: Sequence[Tuple[ShareType, bool]],
    seed: int,
    scenario: Scenario = Scenario.IN_DATASET,
    protocol: Protocol = Protocol.HEAD_FT,
    out_dir: Optional[Union[str, Path]] = None,
    max_workers: Optional[int] = None,
) -> AblationTable:
    """Corre preentrenamiento y evaluación emparejados para cada variante.

    Args:
        config: Experimento base
        variants: Pares (tipo de compartición, embedding posicional compartido)
        seed: Semilla común a todas las variantes
        scenario: Escenario evaluado
        protocol: Protocolo evaluado
        out_dir: Directorio base; cada variante usa un subdirectorio
        max_workers: Contextos de ejecución concurrentes

    Returns:
        AblationTable: Una fila por variante, en orden
    """
    rows: List[AblationRow] = []
    for share_type, shared in variants:
        share_type = ShareType(share_type)
        tag = f"{share_type.value}-{'shared' if shared else 'separate'}"
        variant_dir = Path(out_dir) / tag if out_dir is not None else None
        state = run_experiment(
            variant_config(config, share_type, shared), [(scenario, protocol)], seed,
            run_id=f"ablation-{tag}-{seed}", out_dir=variant_dir, max_workers=max_workers,
        )
        summary = state["summary"]
        key = f"{Scenario(scenario).value}/{Protocol(protocol).value}"
        rows.append(
            AblationRow(
                share_type=share_type,
                pos_embed_shared=shared,
                final_losses=summary["final_losses"],
                metrics=summary["metrics"].get(key, {}),
            )
        )
        logger.info("variante %s terminada", tag)
    return AblationTable(seed=seed, scenario=scenario, protocol=protocol, rows=rows)
