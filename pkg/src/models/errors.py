"""Jerarquía de excepciones del motor PATH."""

from typing import Optional


class PathEngineError(Exception):
    """Error base de todo el motor."""


class DimensionError(PathEngineError, ValueError):
    """Extensiones de tensores incompatibles con la operación."""


class GeometryError(DimensionError):
    """Geometría de imagen incompatible con el tamaño de parche."""


class ConfigError(PathEngineError, ValueError):
    """Configuración inválida o incoherente."""


class DegenerateBatchError(PathEngineError, ValueError):
    """Lote de un solo elemento en modo entrenamiento para BatchNorm."""


class ModelStateError(PathEngineError, RuntimeError):
    """El modelo no está en un estado utilizable (por ejemplo, sin inicializar)."""


class ParameterLookupError(PathEngineError, KeyError):
    """Parámetro desconocido para el registro."""


class ScopeError(PathEngineError, ValueError):
    """Parámetro sin ámbito de compartición o ámbito reasignado."""


class SyncProtocolError(PathEngineError, RuntimeError):
    """Falta el gradiente de un trabajador para un parámetro compartido."""


class CheckpointError(PathEngineError, ValueError):
    """Checkpoint corrupto o con formato no soportado."""


class DivergenceError(PathEngineError, RuntimeError):
    """Pérdida no finita durante el entrenamiento."""

    def __init__(self, step: int, dataset: str, value: float):
        """Inicializa el error con la ubicación de la divergencia.

        Args:
            step: Iteración en la que apareció la pérdida no finita
            dataset: Dataset cuyo trabajador divergió
            value: Valor observado de la pérdida
        """
        super().__init__(f"pérdida no finita ({value}) en el paso {step}, dataset '{dataset}'")
        self.step = step
        self.dataset = dataset
        self.value = value


class GradCheckError(PathEngineError, ArithmeticError):
    """La verificación de gradientes encontró valores no finitos."""

    def __init__(self, message: str, parameter: Optional[str] = None, index: Optional[tuple] = None):
        """Inicializa el error con la ubicación del fallo.

        Args:
            message: Descripción del fallo
            parameter: Nombre del parámetro afectado, si aplica
            index: Índice del elemento afectado, si aplica
        """
        location = f" en {parameter}{list(index) if index is not None else ''}" if parameter else ""
        super().__init__(f"{message}{location}")
        self.parameter = parameter
        self.index = index
