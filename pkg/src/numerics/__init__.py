"""Motor numérico: tensores diferenciables, primitivas y verificación de gradientes."""

from .tensor import Parameter, Tensor, as_tensor, get_default_dtype, no_grad, precision

__all__ = [
    "Parameter",
    "Tensor",
    "as_tensor",
    "get_default_dtype",
    "no_grad",
    "precision",
]
