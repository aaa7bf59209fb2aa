"""Log de métricas de entrenamiento: CSV de solo anexado (step, dataset, loss, lr)."""

import csv
import logging
import os
from pathlib import Path
from typing import Dict, List, Union

logger = logging.getLogger(__name__)

FIELDS = ("step", "dataset", "loss", "lr")


class MetricsLog:
    """Escritor del CSV de pérdidas por dataset y paso."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists() or os.path.getsize(self.path) == 0:
            with open(self.path, "w", newline="", encoding="utf-8") as f:
                csv.writer(f).writerow(FIELDS)

    def append(self, step: int, losses: Dict[str, float], lr: float) -> None:
        """Anexa una fila por dataset, en orden de nombre."""
        with open(self.path, "a", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            for dataset in sorted(losses):
                writer.writerow((step, dataset, repr(float(losses[dataset])), repr(float(lr))))


def read_metrics(path: Union[str, Path]) -> List[Dict[str, Union[int, str, float]]]:
    """Lee el CSV como una lista de filas tipadas."""
    with open(path, "r", newline="", encoding="utf-8") as f:
        return [
            {"step": int(row["step"]), "dataset": row["dataset"], "loss": float(row["loss"]), "lr": float(row["lr"])}
            for row in csv.DictReader(f)
        ]
