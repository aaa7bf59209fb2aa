# src/models/__init__.py
"""Modelos de datos para el motor PATH."""

# Exportar conjuntos de cajas
from .boxes import BoxSet

# Exportar enumeraciones
from .enums import (
    NormMode,
    OptimizerKind,
    Protocol,
    Scenario,
    ScopeKind,
    ShareType,
    Split,
    TaskFamily,
)

# Exportar errores
from .errors import (
    CheckpointError,
    ConfigError,
    DegenerateBatchError,
    DimensionError,
    DivergenceError,
    GeometryError,
    GradCheckError,
    ModelStateError,
    ParameterLookupError,
    PathEngineError,
    ScopeError,
    SyncProtocolError,
)

# Exportar el documento de experimento
from .experiment import (
    BackboneConfig,
    DatasetSpec,
    EvaluationConfig,
    ExperimentConfig,
    HeadConfig,
    OptimizerConfig,
    ProjectorConfig,
    TrainPlan,
)

# Exportar reportes
from .reports import (
    AblationRow,
    AblationTable,
    DatasetMetric,
    EvalReport,
    GradCheckEntry,
    GradCheckReport,
    RegistryRow,
    SuiteResult,
    VerifyReport,
)

# Exportar estado de los grafos
from .train_state import (
    ExperimentState,
    StepRecord,
    TrainNode,
    TrainState,
    get_initial_experiment_state,
    get_initial_state,
)

# Exportar validadores
from .validators import parse_image_size, parse_pos_embed, parse_share_type, validate_dataset_name

__all__ = [
    # Enums
    "NormMode",
    "OptimizerKind",
    "Protocol",
    "Scenario",
    "ScopeKind",
    "ShareType",
    "Split",
    "TaskFamily",
    # Errores
    "PathEngineError",
    "DimensionError",
    "GeometryError",
    "ConfigError",
    "DegenerateBatchError",
    "ModelStateError",
    "ParameterLookupError",
    "ScopeError",
    "SyncProtocolError",
    "CheckpointError",
    "DivergenceError",
    "GradCheckError",
    # Experimento
    "BackboneConfig",
    "ProjectorConfig",
    "HeadConfig",
    "DatasetSpec",
    "OptimizerConfig",
    "TrainPlan",
    "EvaluationConfig",
    "ExperimentConfig",
    "BoxSet",
    # Reportes
    "GradCheckEntry",
    "GradCheckReport",
    "DatasetMetric",
    "EvalReport",
    "AblationRow",
    "AblationTable",
    "RegistryRow",
    "SuiteResult",
    "VerifyReport",
    # Estado de los grafos
    "TrainNode",
    "StepRecord",
    "TrainState",
    "ExperimentState",
    "get_initial_state",
    "get_initial_experiment_state",
    # Validadores
    "parse_share_type",
    "parse_pos_embed",
    "parse_image_size",
    "validate_dataset_name",
]
