"""Primitivas diferenciables que usan el backbone, los proyectores y las cabezas."""

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from src.models.enums import NormMode
from src.models.errors import DegenerateBatchError, DimensionError
from src.numerics.tensor import Tensor, accumulate, as_tensor, make

IntPair = Union[int, Tuple[int, int]]


def _pair(value: IntPair) -> Tuple[int, int]:
    if isinstance(value, int):
        return value, value
    return int(value[0]), int(value[1])


# -- álgebra lineal -----------------------------------------------------------


def matmul(a: Any, b: Any) -> Tensor:
    """Producto matricial con difusión de las dimensiones de lote."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul requiere al menos 2 dimensiones: {a.shape} x {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"extensiones internas distintas: {a.shape} x {b.shape}")

    def _backward(g: np.ndarray) -> None:
        if a.requires_grad:
            accumulate(a, np.matmul(g, np.swapaxes(b.data, -1, -2)))
        if b.requires_grad:
            accumulate(b, np.matmul(np.swapaxes(a.data, -1, -2), g))

    return make(np.matmul(a.data, b.data), (a, b), _backward, "matmul")


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Capa afín ``x @ weight + bias`` con ``weight`` de forma (entrada, salida)."""
    out = matmul(x, weight)
    if bias is not None:
        out = out + bias
    return out


def concatenate(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatena tensores a lo largo de ``axis``."""
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def _backward(g: np.ndarray) -> None:
        for tensor, piece in zip(tensors, np.split(g, splits, axis=axis)):
            accumulate(tensor, piece)

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return make(data, tensors, _backward, "concatenate")


def minimum(a: Any, b: Any) -> Tensor:
    """Mínimo elemento a elemento; en empates el gradiente va a ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data <= b.data

    def _backward(g: np.ndarray) -> None:
        accumulate(a, g * take_a)
        accumulate(b, g * ~take_a)

    return make(np.where(take_a, a.data, b.data), (a, b), _backward, "minimum")


def maximum(a: Any, b: Any) -> Tensor:
    """Máximo elemento a elemento; en empates el gradiente va a ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data >= b.data

    def _backward(g: np.ndarray) -> None:
        accumulate(a, g * take_a)
        accumulate(b, g * ~take_a)

    return make(np.where(take_a, a.data, b.data), (a, b), _backward, "maximum")


# -- convoluciones --------------------------------------------------------------


def _windows(padded: np.ndarray, kernel: Tuple[int, int], stride: Tuple[int, int]) -> np.ndarray:
    """Vista (N, C, Ho, Wo, kh, kw) de las ventanas de la convolución."""
    view = sliding_window_view(padded, kernel, axis=(2, 3))
    return view[:, :, :: stride[0], :: stride[1]]


def _correlate(padded: np.ndarray, weight: np.ndarray, stride: Tuple[int, int]) -> np.ndarray:
    windows = _windows(padded, weight.shape[2:], stride)
    out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def _scatter(
    grad: np.ndarray, weight: np.ndarray, padded_shape: Tuple[int, ...], stride: Tuple[int, int]
) -> np.ndarray:
    """Adjunto de ``_correlate`` respecto a la entrada acolchada."""
    out = np.zeros(padded_shape, dtype=np.result_type(grad, weight))
    _, _, ho, wo = grad.shape
    kh, kw = weight.shape[2:]
    sh, sw = stride
    for i in range(kh):
        for j in range(kw):
            contrib = np.tensordot(grad, weight[:, :, i, j], axes=([1], [0]))
            out[:, :, i : i + sh * (ho - 1) + 1 : sh, j : j + sw * (wo - 1) + 1 : sw] += (
                contrib.transpose(0, 3, 1, 2)
            )
    return out


def _crop(array: np.ndarray, padding: Tuple[int, int]) -> np.ndarray:
    ph, pw = padding
    h, w = array.shape[2:]
    return array[:, :, ph : h - ph, pw : w - pw]


def _pad(array: np.ndarray, padding: Tuple[int, int]) -> np.ndarray:
    ph, pw = padding
    if ph == 0 and pw == 0:
        return array
    return np.pad(array, ((0, 0), (0, 0), (ph, ph), (pw, pw)))


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: IntPair = 1,
    padding: IntPair = 0,
) -> Tensor:
    """Convolución 2-D (correlación cruzada) sobre entradas NCHW.

    Args:
        x: Entrada (N, C, H, W)
        weight: Núcleo (O, C, kh, kw)
        bias: Sesgo opcional (O,)
        stride: Paso vertical y horizontal
        padding: Relleno con ceros vertical y horizontal

    Returns:
        Salida (N, O, floor((H+2p-k)/s)+1, floor((W+2p-k)/s)+1)
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(f"conv2d espera NCHW y OCkk: {x.shape}, {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise DimensionError(f"canales distintos: entrada {x.shape[1]}, núcleo {weight.shape[1]}")
    stride, padding = _pair(stride), _pair(padding)
    kh, kw = weight.shape[2:]
    if kh > x.shape[2] + 2 * padding[0] or kw > x.shape[3] + 2 * padding[1]:
        raise DimensionError(f"núcleo {kh}x{kw} mayor que la entrada acolchada {x.shape[2:]}")

    padded = _pad(x.data, padding)
    out = _correlate(padded, weight.data, stride)

    def _backward(g: np.ndarray) -> None:
        if weight.requires_grad:
            windows = _windows(padded, (kh, kw), stride)
            accumulate(weight, np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3])))
        if x.requires_grad:
            accumulate(x, _crop(_scatter(g, weight.data, padded.shape, stride), padding))

    result = make(out, (x, weight), _backward, "conv2d")
    if bias is not None:
        result = result + as_tensor(bias).reshape(1, -1, 1, 1)
    return result


def transposed_conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: IntPair = 2,
    padding: IntPair = 1,
) -> Tensor:
    """Convolución transpuesta, definida como el adjunto exacto de ``conv2d``.

    Con núcleo 4, paso 2 y relleno 1 la salida duplica las extensiones
    espaciales: ``(H-1)*s - 2p + k``.

    Args:
        x: Entrada (N, Cin, H, W)
        weight: Núcleo (Cin, Cout, kh, kw), misma disposición que el núcleo de
            la convolución directa cuyo adjunto se calcula
        bias: Sesgo opcional (Cout,)
        stride: Paso
        padding: Relleno de la convolución directa asociada

    Returns:
        Salida (N, Cout, (H-1)*s-2p+kh, (W-1)*s-2p+kw)
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(f"transposed_conv2d espera NCHW: {x.shape}, {weight.shape}")
    if x.shape[1] != weight.shape[0]:
        raise DimensionError(f"canales distintos: entrada {x.shape[1]}, núcleo {weight.shape[0]}")
    stride, padding = _pair(stride), _pair(padding)
    kh, kw = weight.shape[2:]
    n, _, h, w = x.shape
    out_h = (h - 1) * stride[0] - 2 * padding[0] + kh
    out_w = (w - 1) * stride[1] - 2 * padding[1] + kw
    if out_h < 1 or out_w < 1:
        raise DimensionError(f"salida vacía para la entrada {x.shape}")
    padded_shape = (n, weight.shape[1], out_h + 2 * padding[0], out_w + 2 * padding[1])
    out = _crop(_scatter(x.data, weight.data, padded_shape, stride), padding)

    def _backward(g: np.ndarray) -> None:
        padded_g = _pad(g, padding)
        if x.requires_grad:
            accumulate(x, _correlate(padded_g, weight.data, stride))
        if weight.requires_grad:
            windows = _windows(padded_g, (kh, kw), stride)
            accumulate(weight, np.tensordot(x.data, windows, axes=([0, 2, 3], [0, 2, 3])))

    result = make(np.ascontiguousarray(out), (x, weight), _backward, "transposed_conv2d")
    if bias is not None:
        result = result + as_tensor(bias).reshape(1, -1, 1, 1)
    return result


def upsample_nearest(x: Tensor, scale: int = 2) -> Tensor:
    """Sobremuestreo por vecino más cercano de las dos últimas dimensiones."""
    x = as_tensor(x)
    out = x.data.repeat(scale, axis=-2).repeat(scale, axis=-1)

    def _backward(g: np.ndarray) -> None:
        h, w = x.shape[-2:]
        blocks = g.reshape(g.shape[:-2] + (h, scale, w, scale))
        accumulate(x, blocks.sum(axis=(-3, -1)))

    return make(out, (x,), _backward, "upsample_nearest")


# -- normalización --------------------------------------------------------------


def _broadcast_shape(ndim: int, axis: int, extent: int) -> Tuple[int, ...]:
    shape = [1] * ndim
    shape[axis] = extent
    return tuple(shape)


def layer_norm(
    x: Tensor,
    gamma: Optional[Tensor] = None,
    beta: Optional[Tensor] = None,
    eps: float = 1e-5,
    axis: int = -1,
) -> Tensor:
    """Normalización por capa sobre el eje de canales/características."""
    x = as_tensor(x)
    mean = x.mean(axis=axis, keepdims=True)
    centered = x - mean
    variance = (centered * centered).mean(axis=axis, keepdims=True)
    out = centered * ((variance + eps) ** -0.5)
    extent = x.shape[axis]
    if gamma is not None:
        out = out * as_tensor(gamma).reshape(_broadcast_shape(x.ndim, axis, extent))
    if beta is not None:
        out = out + as_tensor(beta).reshape(_broadcast_shape(x.ndim, axis, extent))
    return out


@dataclass
class BatchNormState:
    """Estadísticas móviles de una capa BatchNorm."""

    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5
    batches_tracked: int = field(default=0)

    @classmethod
    def create(cls, channels: int, momentum: float = 0.1, eps: float = 1e-5) -> "BatchNormState":
        return cls(
            running_mean=np.zeros(channels, dtype=np.float32),
            running_var=np.ones(channels, dtype=np.float32),
            momentum=momentum,
            eps=eps,
        )


def batch_norm(
    x: Tensor,
    state: BatchNormState,
    mode: Union[NormMode, str] = NormMode.TRAIN,
    gamma: Optional[Tensor] = None,
    beta: Optional[Tensor] = None,
) -> Tensor:
    """Normalización por lotes sobre el eje 1 de entradas (N, C) o (N, C, H, W).

    En modo entrenamiento usa las estadísticas del lote y actualiza las
    móviles con ``state.momentum`` (varianza insesgada); en evaluación solo
    usa las móviles.
    """
    x = as_tensor(x)
    mode = NormMode(mode)
    channels = x.shape[1]
    shape = _broadcast_shape(x.ndim, 1, channels)
    axes = tuple(ax for ax in range(x.ndim) if ax != 1)

    if mode is NormMode.TRAIN:
        if x.shape[0] < 2:
            raise DegenerateBatchError("BatchNorm en entrenamiento requiere al menos 2 muestras")
        mean = x.mean(axis=axes, keepdims=True)
        centered = x - mean
        variance = (centered * centered).mean(axis=axes, keepdims=True)
        out = centered * ((variance + state.eps) ** -0.5)

        count = x.size // channels
        batch_mean = mean.data.reshape(channels).astype(np.float64)
        batch_var = variance.data.reshape(channels).astype(np.float64) * count / (count - 1)
        m = state.momentum
        state.running_mean = ((1.0 - m) * state.running_mean + m * batch_mean).astype(np.float32)
        state.running_var = ((1.0 - m) * state.running_var + m * batch_var).astype(np.float32)
        state.batches_tracked += 1
    else:
        mean = state.running_mean.reshape(shape).astype(x.dtype)
        inv_std = (1.0 / np.sqrt(state.running_var.astype(np.float64) + state.eps)).astype(x.dtype)
        out = (x - mean) * inv_std.reshape(shape)

    if gamma is not None:
        out = out * as_tensor(gamma).reshape(shape)
    if beta is not None:
        out = out + as_tensor(beta).reshape(shape)
    return out


# -- activaciones -----------------------------------------------------------------


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)

    def _backward(g: np.ndarray) -> None:
        accumulate(x, g * (x.data > 0))

    return make(np.maximum(x.data, 0), (x,), _backward, "relu")


def gelu(x: Tensor) -> Tensor:
    """GELU exacta, ``x * Phi(x)``."""
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data / np.sqrt(2.0)))

    def _backward(g: np.ndarray) -> None:
        pdf = np.exp(-0.5 * x.data * x.data) / np.sqrt(2.0 * np.pi)
        accumulate(x, g * (cdf + x.data * pdf))

    return make((x.data * cdf).astype(x.dtype), (x,), _backward, "gelu")


def sigmoid(x: Any) -> Tensor:
    x = as_tensor(x)
    decay = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1.0 / (1.0 + decay), decay / (1.0 + decay)).astype(x.dtype)

    def _backward(g: np.ndarray) -> None:
        accumulate(x, g * out * (1.0 - out))

    return make(out, (x,), _backward, "sigmoid")


def pointwise(x: Tensor, kind: str) -> Tensor:
    """Aplica la activación ``kind`` (relu | gelu | sigmoid)."""
    activations = {"relu": relu, "gelu": gelu, "sigmoid": sigmoid}
    if kind not in activations:
        raise ValueError(f"activación desconocida: {kind}")
    return activations[kind](x)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = np.exp(x.data - x.data.max(axis=axis, keepdims=True))
    out = shifted / shifted.sum(axis=axis, keepdims=True)

    def _backward(g: np.ndarray) -> None:
        accumulate(x, out * (g - (g * out).sum(axis=axis, keepdims=True)))

    return make(out, (x,), _backward, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def _backward(g: np.ndarray) -> None:
        accumulate(x, g - np.exp(out) * g.sum(axis=axis, keepdims=True))

    return make(out, (x,), _backward, "log_softmax")


# -- interpolación ------------------------------------------------------------------


def interpolation_matrix(source: int, target: int, align_corners: bool, dtype: Any) -> np.ndarray:
    """Matriz (target, source) de interpolación lineal 1-D."""
    index = np.arange(target, dtype=np.float64)
    if align_corners:
        coords = index * (source - 1) / (target - 1) if target > 1 else np.zeros(target)
    else:
        coords = np.clip((index + 0.5) * source / target - 0.5, 0.0, source - 1)
    low = np.clip(np.floor(coords).astype(np.int64), 0, source - 1)
    high = np.minimum(low + 1, source - 1)
    frac = coords - low
    matrix = np.zeros((target, source), dtype=np.float64)
    np.add.at(matrix, (np.arange(target), low), 1.0 - frac)
    np.add.at(matrix, (np.arange(target), high), frac)
    return matrix.astype(dtype)


def bilinear_resize(x: Tensor, target_h: int, target_w: int, align_corners: bool = False) -> Tensor:
    """Redimensiona bilinealmente las dos últimas dimensiones de ``x``."""
    x = as_tensor(x)
    if target_h < 1 or target_w < 1:
        raise DimensionError(f"extensiones de destino inválidas: {target_h}x{target_w}")
    h, w = x.shape[-2:]
    if (h, w) == (target_h, target_w):
        return x
    rows = interpolation_matrix(h, target_h, align_corners, x.dtype)
    cols = interpolation_matrix(w, target_w, align_corners, x.dtype)
    return matmul(matmul(Tensor(rows), x), Tensor(np.ascontiguousarray(cols.T)))


# -- pérdidas -----------------------------------------------------------------------


def cross_entropy(
    logits: Tensor,
    targets: np.ndarray,
    axis: int = 1,
    weights: Optional[np.ndarray] = None,
) -> Tensor:
    """Entropía cruzada media (ponderada) con las clases en ``axis``."""
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    moved = np.moveaxis(logits.data, axis, -1)
    classes = moved.shape[-1]
    flat = moved.reshape(-1, classes)
    labels = targets.reshape(-1)
    if labels.shape[0] != flat.shape[0]:
        raise DimensionError(f"etiquetas {targets.shape} incompatibles con logits {logits.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise DimensionError(f"etiquetas fuera de rango [0, {classes})")
    sample_weights = (
        np.ones(labels.shape[0], dtype=np.float64)
        if weights is None
        else np.asarray(weights, dtype=np.float64).reshape(-1)
    )
    total = sample_weights.sum()

    shifted = flat.astype(np.float64) - flat.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(labels.shape[0])
    loss = -(sample_weights * log_probs[rows, labels]).sum() / total

    def _backward(g: np.ndarray) -> None:
        grad = np.exp(log_probs)
        grad[rows, labels] -= 1.0
        grad *= (sample_weights / total)[:, None] * float(g)
        grad = grad.reshape(moved.shape)
        accumulate(logits, np.moveaxis(grad, -1, axis))

    return make(np.asarray(loss, dtype=logits.dtype), (logits,), _backward, "cross_entropy")


def binary_cross_entropy_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """BCE media calculada de forma estable a partir de logits."""
    logits = as_tensor(logits)
    labels = np.asarray(targets, dtype=np.float64)
    z = logits.data.astype(np.float64)
    losses = np.maximum(z, 0.0) - z * labels + np.log1p(np.exp(-np.abs(z)))
    count = losses.size

    def _backward(g: np.ndarray) -> None:
        probs = 1.0 / (1.0 + np.exp(-z))
        accumulate(logits, (probs - labels) * (float(g) / count))

    return make(np.asarray(losses.mean(), dtype=logits.dtype), (logits,), _backward, "bce")


def mse_loss(prediction: Tensor, target: Any) -> Tensor:
    diff = as_tensor(prediction) - as_tensor(target)
    return (diff * diff).mean()
