"""Tensor denso con diferenciación automática en modo inverso.

Cada operación registra sus padres y un cierre ``_backward`` que acumula el
gradiente en ellos. ``Tensor.backward`` recorre el grafo en orden topológico
inverso. Los datos viven en arreglos numpy float32 (float64 dentro de
``precision(np.float64)``, que usa la verificación de gradientes).
"""

import contextlib
import threading
from typing import Any, Callable, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from src.models.errors import DimensionError, ScopeError

_state = threading.local()

ArrayLike = Union[np.ndarray, float, int, Sequence[Any]]


def get_default_dtype() -> np.dtype:
    """Devuelve el dtype usado para datos creados sin dtype flotante propio."""
    return getattr(_state, "dtype", np.dtype(np.float32))


def grad_enabled() -> bool:
    """Indica si las operaciones deben registrar el grafo."""
    return getattr(_state, "grad_enabled", True)


@contextlib.contextmanager
def precision(dtype: Any) -> Iterator[None]:
    """Cambia temporalmente el dtype por defecto del hilo actual."""
    previous = get_default_dtype()
    _state.dtype = np.dtype(dtype)
    try:
        yield
    finally:
        _state.dtype = previous


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Desactiva el registro del grafo en el hilo actual."""
    previous = grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def _as_array(data: Any) -> np.ndarray:
    if isinstance(data, (np.ndarray, np.generic)) and data.dtype in (np.float32, np.float64):
        return np.asarray(data)
    return np.asarray(data, dtype=get_default_dtype())


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Reduce un gradiente difundido a la forma original del operando."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Arreglo denso con búfer de gradiente opcional."""

    __array_ufunc__ = None

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        parents: Sequence["Tensor"] = (),
        backward: Optional[Callable[[np.ndarray], None]] = None,
        op: str = "",
    ):
        """Inicializa el tensor.

        Args:
            data: Valores del tensor
            requires_grad: Si el tensor participa en la retropropagación
            parents: Tensores de los que se deriva este valor
            backward: Cierre que propaga el gradiente hacia ``parents``
            op: Nombre de la operación que produjo el tensor
        """
        self.data = _as_array(data)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: Tuple[Tensor, ...] = tuple(parents)
        self._backward = backward
        self._op = op

    # -- propiedades --------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        """Devuelve los datos subyacentes."""
        return self.data

    def item(self) -> float:
        """Devuelve el valor de un tensor de un elemento."""
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        """Copia sin historial."""
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op or 'leaf'}, requires_grad={self.requires_grad})"

    # -- retropropagación ----------------------------------------------------

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Propaga gradientes desde este tensor hacia todas sus hojas.

        Args:
            grad: Gradiente semilla; por defecto unos (requiere un escalar)
        """
        if grad is None:
            if self.data.size != 1:
                raise DimensionError("backward sin semilla requiere un tensor escalar")
            grad = np.ones_like(self.data)

        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        self.grad = np.asarray(grad, dtype=self.data.dtype).reshape(self.shape).copy()
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- aritmética ------------------------------------------------------------

    def __add__(self, other: Any) -> "Tensor":
        other = as_tensor(other)
        a, b = self, other

        def _backward(g: np.ndarray) -> None:
            accumulate(a, g)
            accumulate(b, g)

        return make(a.data + b.data, (a, b), _backward, "add")

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        a = self

        def _backward(g: np.ndarray) -> None:
            accumulate(a, -g)

        return make(-a.data, (a,), _backward, "neg")

    def __sub__(self, other: Any) -> "Tensor":
        return self + (-as_tensor(other))

    def __rsub__(self, other: Any) -> "Tensor":
        return as_tensor(other) + (-self)

    def __mul__(self, other: Any) -> "Tensor":
        other = as_tensor(other)
        a, b = self, other

        def _backward(g: np.ndarray) -> None:
            if a.requires_grad:
                accumulate(a, g * b.data)
            if b.requires_grad:
                accumulate(b, g * a.data)

        return make(a.data * b.data, (a, b), _backward, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> "Tensor":
        other = as_tensor(other)
        a, b = self, other

        def _backward(g: np.ndarray) -> None:
            if a.requires_grad:
                accumulate(a, g / b.data)
            if b.requires_grad:
                accumulate(b, -g * a.data / (b.data * b.data))

        return make(a.data / b.data, (a, b), _backward, "div")

    def __rtruediv__(self, other: Any) -> "Tensor":
        return as_tensor(other) / self

    def __pow__(self, exponent: float) -> "Tensor":
        a = self
        exponent = float(exponent)

        def _backward(g: np.ndarray) -> None:
            accumulate(a, g * exponent * np.power(a.data, exponent - 1.0))

        return make(np.power(a.data, exponent), (a,), _backward, "pow")

    def __matmul__(self, other: Any) -> "Tensor":
        from src.numerics.ops import matmul

        return matmul(self, other)

    # -- reducciones -------------------------------------------------------

    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        """Suma con acumulación en float64."""
        a = self
        out = np.asarray(np.sum(a.data, axis=axis, dtype=np.float64, keepdims=keepdims)).astype(a.dtype)

        def _backward(g: np.ndarray) -> None:
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            accumulate(a, np.broadcast_to(g, a.shape))

        return make(out, (a,), _backward, "sum")

    def mean(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        """Media con acumulación en float64."""
        if axis is None:
            count = self.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            count = int(np.prod([self.shape[ax] for ax in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- forma -------------------------------------------------------------

    def reshape(self, *shape: Any) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self

        def _backward(g: np.ndarray) -> None:
            accumulate(a, g.reshape(a.shape))

        return make(a.data.reshape(shape), (a,), _backward, "reshape")

    def transpose(self, *axes: int) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        a = self

        def _backward(g: np.ndarray) -> None:
            accumulate(a, g.transpose(inverse))

        return make(a.data.transpose(axes), (a,), _backward, "transpose")

    def swapaxes(self, first: int, second: int) -> "Tensor":
        axes = list(range(self.ndim))
        axes[first], axes[second] = axes[second], axes[first]
        return self.transpose(tuple(axes))

    def __getitem__(self, index: Any) -> "Tensor":
        a = self

        def _backward(g: np.ndarray) -> None:
            full = np.zeros_like(a.data)
            np.add.at(full, index, g)
            accumulate(a, full)

        return make(np.array(a.data[index]), (a,), _backward, "index")

    # -- elementales ---------------------------------------------------------

    def exp(self) -> "Tensor":
        a = self
        out = np.exp(a.data)

        def _backward(g: np.ndarray) -> None:
            accumulate(a, g * out)

        return make(out, (a,), _backward, "exp")

    def log(self) -> "Tensor":
        a = self

        def _backward(g: np.ndarray) -> None:
            accumulate(a, g / a.data)

        return make(np.log(a.data), (a,), _backward, "log")

    def sqrt(self) -> "Tensor":
        return self ** 0.5

    def abs(self) -> "Tensor":
        a = self

        def _backward(g: np.ndarray) -> None:
            accumulate(a, g * np.sign(a.data))

        return make(np.abs(a.data), (a,), _backward, "abs")

    def clip(self, low: Optional[float] = None, high: Optional[float] = None) -> "Tensor":
        """Recorta al intervalo [low, high]; el gradiente pasa dentro del intervalo."""
        a = self
        out = np.clip(a.data, low, high)

        def _backward(g: np.ndarray) -> None:
            mask = np.ones_like(a.data, dtype=bool)
            if low is not None:
                mask &= a.data >= low
            if high is not None:
                mask &= a.data <= high
            accumulate(a, g * mask)

        return make(out, (a,), _backward, "clip")


class Parameter(Tensor):
    """Tensor con nombre, ámbito de compartición y bandera de entrenamiento."""

    def __init__(self, data: ArrayLike, name: str = "", trainable: bool = True):
        """Inicializa el parámetro copiando los datos.

        Args:
            data: Valores iniciales
            name: Ruta única dentro del modelo (se asigna al ensamblar)
            trainable: Si recibe gradientes
        """
        super().__init__(np.array(_as_array(data), copy=True), requires_grad=trainable)
        self.name = name
        self._scope: Any = None

    @property
    def value(self) -> Tensor:
        return self

    @property
    def trainable(self) -> bool:
        return self.requires_grad

    @trainable.setter
    def trainable(self, flag: bool) -> None:
        self.requires_grad = bool(flag)
        if not flag:
            self.grad = None

    @property
    def scope(self) -> Any:
        return self._scope

    def bind_scope(self, scope: Any) -> None:
        """Asigna el ámbito una sola vez; reasignarlo a otro valor es un error."""
        if self._scope is not None and self._scope != scope:
            raise ScopeError(f"el ámbito de '{self.name}' es inmutable ({self._scope} → {scope})")
        self._scope = scope

    def __repr__(self) -> str:
        return f"Parameter(name={self.name!r}, shape={self.shape}, trainable={self.trainable})"


def as_tensor(value: Any) -> Tensor:
    """Envuelve escalares y arreglos como tensores constantes."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    """Suma ``grad`` al búfer de gradiente de ``tensor`` si lo requiere."""
    if not tensor.requires_grad:
        return
    grad = unbroadcast(np.asarray(grad), tensor.shape).astype(tensor.dtype, copy=False)
    if tensor.grad is None:
        tensor.grad = np.array(grad, copy=True)
    else:
        tensor.grad = tensor.grad + grad


def make(
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward: Callable[[np.ndarray], None],
    op: str,
) -> Tensor:
    """Crea el resultado de una operación, registrando el grafo solo si hace falta."""
    if grad_enabled() and any(parent.requires_grad for parent in parents):
        return Tensor(data, True, parents, backward, op)
    return Tensor(data, op=op)
