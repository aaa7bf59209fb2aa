"""Registro de eventos de corridas de entrenamiento y evaluación.

Los eventos se guardan como una lista JSON por ``run_id`` en el directorio de
datos. Un fallo al persistir se registra en el log y nunca interrumpe la
corrida.
"""

import json
import logging
import os
from datetime import datetime
from typing import Any, Dict, Mapping, Optional

from src.config.settings import PATHS

logger = logging.getLogger(__name__)


def analytics_dir() -> str:
    """Directorio de eventos (se lee en cada llamada para respetar el entorno)."""
    return os.path.join(PATHS["data_dir"], "analytics")


def _events_file(run_id: str) -> str:
    return os.path.join(analytics_dir(), f"{run_id}_events.json")


def track_run_event(run_id: str, event_type: str, event_data: Dict[str, Any]) -> bool:
    """Registra un evento de una corrida.

    Args:
        run_id: Identificador único de la corrida
        event_type: Tipo de evento (por ejemplo, "run_started", "divergence")
        event_data: Datos adicionales del evento

    Returns:
        Boolean indicando si la operación fue exitosa
    """
    try:
        event = {
            "run_id": run_id,
            "event_type": event_type,
            "timestamp": datetime.now().isoformat(),
            "data": event_data,
        }

        os.makedirs(analytics_dir(), exist_ok=True)
        events_file = _events_file(run_id)
        events = []
        if os.path.exists(events_file):
            with open(events_file, "r", encoding="utf-8") as f:
                events = json.load(f)
            if not isinstance(events, list):
                events = []

        events.append(event)

        with open(events_file, "w", encoding="utf-8") as f:
            json.dump(events, f, ensure_ascii=False, indent=2)

        return True
    except Exception as e:
        logger.exception("Error al registrar evento de la corrida %s: %s", run_id, e)
        return False


def track_run_started(run_id: str, seed: int, datasets: list, max_iter: int) -> bool:
    """Registra el inicio de un preentrenamiento."""
    return track_run_event(
        run_id=run_id,
        event_type="run_started",
        event_data={"seed": seed, "datasets": list(datasets), "max_iter": max_iter},
    )


def track_step_summary(run_id: str, step: int, losses: Mapping[str, float], lr: float) -> bool:
    """Registra las pérdidas por dataset de un paso."""
    return track_run_event(
        run_id=run_id,
        event_type="step_summary",
        event_data={"step": step, "losses": dict(losses), "lr": lr},
    )


def track_divergence(run_id: str, step: int, dataset: str, value: float) -> bool:
    """Registra una pérdida no finita."""
    return track_run_event(
        run_id=run_id,
        event_type="divergence",
        event_data={"step": step, "dataset": dataset, "value": repr(value)},
    )


def track_run_finished(run_id: str, checkpoint: str, final_losses: Mapping[str, float]) -> bool:
    return track_run_event(
        run_id=run_id,
        event_type="run_finished",
        event_data={"checkpoint": checkpoint, "final_losses": dict(final_losses)},
    )


def track_evaluation(run_id: str, report: Dict[str, Any]) -> bool:
    """Registra un informe de evaluación terminado."""
    return track_run_event(run_id=run_id, event_type="evaluation_finished", event_data=report)


def get_run_events(run_id: str) -> Optional[Dict[str, Any]]:
    """Recupera los eventos de una corrida con un resumen.

    Args:
        run_id: Identificador único de la corrida

    Returns:
        Diccionario con métricas y eventos, o None si no hay datos
    """
    try:
        events_file = _events_file(run_id)
        if not os.path.exists(events_file):
            return None

        with open(events_file, "r", encoding="utf-8") as f:
            events = json.load(f)

        counts: Dict[str, int] = {}
        last_step = None
        for event in events:
            counts[event["event_type"]] = counts.get(event["event_type"], 0) + 1
            if event["event_type"] == "step_summary":
                last_step = event["data"]["step"]

        return {
            "run_id": run_id,
            "total_events": len(events),
            "event_counts": counts,
            "last_step": last_step,
            "diverged": counts.get("divergence", 0) > 0,
            "events": events,
        }
    except Exception as e:
        logger.exception("Error al recuperar eventos de la corrida %s: %s", run_id, e)
        return None
