"""Modelos de reportes: verificación de gradientes, evaluación, ablación y suites."""

from datetime import datetime
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from .enums import Protocol, Scenario, ShareType


class GradCheckEntry(BaseModel):
    """Resultado de la verificación de un parámetro."""

    name: str
    checked: int = Field(..., description="Elementos comparados")
    max_abs_error: float
    rel_error: float
    analytic_max: float = Field(..., description="Máximo |gradiente| en modo inverso")
    frozen: bool = False


class GradCheckReport(BaseModel):
    """Reporte de una verificación de gradientes completa."""

    entries: List[GradCheckEntry] = Field(default_factory=list)
    tolerance: float = 1e-3

    @property
    def max_rel_error(self) -> float:
        return max((entry.rel_error for entry in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def entry(self, name: str) -> GradCheckEntry:
        for item in self.entries:
            if item.name == name:
                return item
        raise KeyError(name)


class DatasetMetric(BaseModel):
    """Una métrica de un dataset evaluado."""

    dataset: str
    family: str
    metric: str
    value: Optional[float] = Field(None, description="None cuando la métrica no aplica")


class EvalReport(BaseModel):
    """Reporte de una corrida de evaluación (escenario × protocolo)."""

    scenario: Scenario
    protocol: Protocol
    seed: int
    backbone_frozen: bool
    metrics: List[DatasetMetric] = Field(default_factory=list)
    wall_time: float = 0.0
    timestamp: str = Field(default_factory=lambda: datetime.now().isoformat())

    @property
    def datasets(self) -> List[str]:
        seen: List[str] = []
        for row in self.metrics:
            if row.dataset not in seen:
                seen.append(row.dataset)
        return seen

    def values(self) -> Dict[str, Dict[str, Optional[float]]]:
        """Métricas agrupadas por dataset."""
        grouped: Dict[str, Dict[str, Optional[float]]] = {}
        for row in self.metrics:
            grouped.setdefault(row.dataset, {})[row.metric] = row.value
        return grouped


class AblationRow(BaseModel):
    """Una variante de la ablación de compartición."""

    share_type: ShareType
    pos_embed_shared: bool
    final_losses: Dict[str, float] = Field(default_factory=dict)
    metrics: Dict[str, Optional[float]] = Field(default_factory=dict)


class AblationTable(BaseModel):
    """Tabla comparativa de variantes con semilla común."""

    seed: int
    scenario: Scenario
    protocol: Protocol
    rows: List[AblationRow] = Field(default_factory=list)


class RegistryRow(BaseModel):
    """Fila de auditoría del registro de compartición."""

    name: str
    scope: str
    sync_set: List[str]
    trainable: bool


class SuiteResult(BaseModel):
    """Resultado de una suite de propiedades."""

    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0


class VerifyReport(BaseModel):
    """Reporte de todas las suites de verificación."""

    suites: List[SuiteResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(suite.passed for suite in self.suites)

    @property
    def first_failure(self) -> Optional[SuiteResult]:
        return next((suite for suite in self.suites if not suite.passed), None)
