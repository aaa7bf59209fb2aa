"""Contenedor de parámetros con nombres jerárquicos.

Cada parámetro se inicializa con un generador derivado de ``(seed, nombre)``,
de modo que su valor inicial no depende del orden de construcción ni de qué
otros módulos existan en el modelo.
"""

import zlib
from typing import Callable, Dict, Iterator, List, Sequence, Tuple

import numpy as np

from src.models.enums import NormMode
from src.models.errors import CheckpointError, ModelStateError
from src.numerics.ops import BatchNormState
from src.numerics.tensor import Parameter

Initializer = Callable[[np.random.Generator, Tuple[int, ...]], np.ndarray]


def normal(std: float = 0.02) -> Initializer:
    return lambda rng, shape: rng.normal(0.0, std, size=shape)


def uniform(low: float, high: float) -> Initializer:
    return lambda rng, shape: rng.uniform(low, high, size=shape)


def fan_in(fan: int, gain: float = 1.0) -> Initializer:
    """Normal con desviación ``gain / sqrt(fan)``."""
    return normal(gain / np.sqrt(max(fan, 1)))


def zeros(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    return np.zeros(shape)


def ones(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    return np.ones(shape)


def param_rng(seed: int, name: str) -> np.random.Generator:
    """Generador determinista para un parámetro concreto."""
    return np.random.default_rng([seed, zlib.crc32(name.encode("utf-8"))])


class Module:
    """Base de todas las capas: parámetros, submódulos y estado de BatchNorm."""

    def __init__(self, prefix: str, seed: int = 0, lazy: bool = False):
        """Inicializa el módulo.

        Args:
            prefix: Ruta del módulo; prefija los nombres de sus parámetros
            seed: Semilla global de inicialización
            lazy: Si es True los parámetros quedan sin inicializar hasta
                ``initialize()`` o ``load_state_dict()``
        """
        self.prefix = prefix
        self.seed = seed
        self.lazy = lazy
        self.mode = NormMode.TRAIN
        self._parameters: Dict[str, Parameter] = {}
        self._modules: Dict[str, "Module"] = {}
        self._norm_states: Dict[str, BatchNormState] = {}
        self._initializers: Dict[str, Initializer] = {}
        self._initialized = not lazy

    def path(self, local: str) -> str:
        return f"{self.prefix}.{local}" if self.prefix else local

    # -- registro -------------------------------------------------------------

    def param(self, local: str, shape: Sequence[int], init: Initializer = normal()) -> Parameter:
        """Registra un parámetro ``<prefix>.<local>``."""
        name = self.path(local)
        shape = tuple(int(s) for s in shape)
        if self.lazy:
            data = np.zeros(shape, dtype=np.float32)
        else:
            data = np.asarray(init(param_rng(self.seed, name), shape), dtype=np.float32)
        parameter = Parameter(data, name=name)
        self._parameters[local] = parameter
        self._initializers[local] = init
        return parameter

    def child(self, local: str, module: "Module") -> "Module":
        """Registra un submódulo."""
        self._modules[local] = module
        return module

    def norm_state(self, local: str, channels: int, momentum: float) -> BatchNormState:
        state = BatchNormState.create(channels, momentum=momentum)
        self._norm_states[local] = state
        return state

    # -- recorrido ---------------------------------------------------------------

    def modules(self) -> Iterator["Module"]:
        yield self
        for module in self._modules.values():
            yield from module.modules()

    def named_parameters(self) -> Iterator[Tuple[str, Parameter]]:
        for parameter in self._parameters.values():
            yield parameter.name, parameter
        for module in self._modules.values():
            yield from module.named_parameters()

    def parameters(self) -> List[Parameter]:
        return [parameter for _, parameter in self.named_parameters()]

    def named_norm_states(self) -> Iterator[Tuple[str, BatchNormState]]:
        for local, state in self._norm_states.items():
            yield self.path(local), state
        for module in self._modules.values():
            yield from module.named_norm_states()

    def num_parameters(self) -> int:
        return sum(parameter.size for parameter in self.parameters())

    # -- modos ----------------------------------------------------------------

    def train(self, flag: bool = True) -> "Module":
        for module in self.modules():
            module.mode = NormMode.TRAIN if flag else NormMode.EVAL
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for parameter in self.parameters():
            parameter.grad = None

    @property
    def initialized(self) -> bool:
        return all(module._initialized for module in self.modules())

    def require_initialized(self) -> None:
        if not self.initialized:
            raise ModelStateError(f"el módulo '{self.prefix or 'raíz'}' no está inicializado")

    def initialize(self) -> None:
        """Inicializa los parámetros de módulos perezosos."""
        for module in self.modules():
            if module._initialized:
                continue
            for local, parameter in module._parameters.items():
                init = module._initializers[local]
                parameter.data = np.asarray(
                    init(param_rng(module.seed, parameter.name), parameter.shape), dtype=np.float32
                )
            module._initialized = True

    # -- estado ------------------------------------------------------------------

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Parámetros y estadísticas móviles, por nombre."""
        entries: Dict[str, np.ndarray] = {}
        for name, parameter in self.named_parameters():
            entries[name] = parameter.data
        for name, state in self.named_norm_states():
            entries[f"{name}.running_mean"] = state.running_mean
            entries[f"{name}.running_var"] = state.running_var
        return entries

    def load_state_dict(self, entries: Dict[str, np.ndarray], strict: bool = True) -> List[str]:
        """Copia valores por nombre.

        Args:
            entries: Valores por nombre
            strict: Si es True toda entrada del módulo debe estar presente

        Returns:
            Nombres del módulo que no estaban en ``entries``
        """
        missing: List[str] = []
        for name, parameter in self.named_parameters():
            if name not in entries:
                missing.append(name)
                continue
            value = np.asarray(entries[name], dtype=np.float32)
            if value.shape != parameter.shape:
                raise CheckpointError(f"forma de '{name}': {value.shape} != {parameter.shape}")
            parameter.data = value.copy()
        for name, state in self.named_norm_states():
            for field in ("running_mean", "running_var"):
                key = f"{name}.{field}"
                if key in entries:
                    setattr(state, field, np.asarray(entries[key], dtype=np.float32).copy())
                else:
                    missing.append(key)
        if strict and missing:
            raise CheckpointError(f"faltan entradas en el checkpoint: {missing[:5]}")
        if not missing:
            for module in self.modules():
                module._initialized = True
        return missing

