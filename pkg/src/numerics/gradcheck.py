"""Verificación de gradientes por diferencias finitas centrales."""

import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from src.models.errors import GradCheckError
from src.models.reports import GradCheckEntry, GradCheckReport
from src.numerics.tensor import Parameter, Tensor, no_grad, precision

logger = logging.getLogger(__name__)


def _evaluate(fn: Callable[[], Tensor]) -> float:
    with no_grad():
        value = float(np.asarray(fn().data, dtype=np.float64).reshape(-1)[0])
    if not np.isfinite(value):
        raise GradCheckError("la función devolvió un valor no finito")
    return value


def _param_name(param: Tensor, position: int) -> str:
    name = getattr(param, "name", "")
    return name or f"param[{position}]"


def grad_check(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-6,
    tol: float = 1e-3,
    max_entries: int = 24,
    seed: int = 0,
) -> GradCheckReport:
    """Compara gradientes en modo inverso con diferencias finitas centrales.

    La comprobación se ejecuta en float64: los parámetros se convierten
    temporalmente y se restauran bit a bit al terminar. Para cada parámetro se
    comparan como máximo ``max_entries`` elementos elegidos con ``seed``.

    Args:
        fn: Función escalar determinista que lee ``params``
        params: Tensores hoja a verificar
        eps: Paso de la diferencia finita
        tol: Error relativo máximo aceptado
        max_entries: Elementos verificados por parámetro
        seed: Semilla para elegir los elementos

    Returns:
        Reporte con el error relativo por parámetro

    Raises:
        GradCheckError: Si la función o algún gradiente no es finito
    """
    originals: Dict[int, np.ndarray] = {id(p): p.data for p in params}
    rng = np.random.default_rng(seed)
    entries: List[GradCheckEntry] = []

    try:
        with precision(np.float64):
            for param in params:
                param.data = param.data.astype(np.float64)
                param.grad = None

            output = fn()
            if output.size != 1:
                raise GradCheckError(f"la función debe ser escalar, forma {output.shape}")
            if not np.all(np.isfinite(output.data)):
                raise GradCheckError("la función devolvió un valor no finito")
            output.backward()

            for position, param in enumerate(params):
                name = _param_name(param, position)
                frozen = not param.requires_grad
                analytic = (
                    np.zeros_like(param.data)
                    if frozen or param.grad is None
                    else np.asarray(param.grad, dtype=np.float64)
                )
                if not np.all(np.isfinite(analytic)):
                    bad = tuple(int(i) for i in np.argwhere(~np.isfinite(analytic))[0])
                    raise GradCheckError("gradiente no finito", name, bad)

                if frozen:
                    entries.append(
                        GradCheckEntry(
                            name=name, checked=0, max_abs_error=0.0, rel_error=0.0,
                            analytic_max=0.0, frozen=True,
                        )
                    )
                    continue

                flat_count = param.size
                chosen = np.sort(
                    rng.choice(flat_count, size=min(max_entries, flat_count), replace=False)
                )
                numeric = np.zeros(chosen.shape[0], dtype=np.float64)
                flat = param.data.reshape(-1)
                for k, flat_index in enumerate(chosen):
                    saved = flat[flat_index]
                    flat[flat_index] = saved + eps
                    plus = _evaluate(fn)
                    flat[flat_index] = saved - eps
                    minus = _evaluate(fn)
                    flat[flat_index] = saved
                    numeric[k] = (plus - minus) / (2.0 * eps)

                picked = analytic.reshape(-1)[chosen]
                abs_error = float(np.max(np.abs(picked - numeric))) if chosen.size else 0.0
                scale = max(float(np.max(np.abs(picked), initial=0.0)),
                            float(np.max(np.abs(numeric), initial=0.0)), 1e-6)
                entries.append(
                    GradCheckEntry(
                        name=name,
                        checked=int(chosen.size),
                        max_abs_error=abs_error,
                        rel_error=abs_error / scale,
                        analytic_max=float(np.max(np.abs(analytic), initial=0.0)),
                        frozen=False,
                    )
                )
    finally:
        for param in params:
            param.data = originals[id(param)]
            param.grad = None

    report = GradCheckReport(entries=entries, tolerance=tol)
    logger.debug("gradcheck: error relativo máximo %.3e", report.max_rel_error)
    return report


def check_primitive(
    build: Callable[[Sequence[Tensor]], Tensor],
    shapes: Sequence[Sequence[int]],
    seed: int = 0,
    tol: float = 1e-3,
    scale: Optional[float] = None,
) -> GradCheckReport:
    """Verifica una primitiva con entradas aleatorias de las formas dadas.

    La salida de ``build`` se reduce con pesos aleatorios fijos para que el
    gradiente no sea trivialmente uniforme.
    """
    rng = np.random.default_rng(seed)
    inputs = [
        Parameter(rng.standard_normal(tuple(shape)) * (scale or 1.0), name=f"input{i}")
        for i, shape in enumerate(shapes)
    ]
    probe: Dict[str, np.ndarray] = {}

    def _objective() -> Tensor:
        out = build(inputs)
        if "weights" not in probe:
            probe["weights"] = np.random.default_rng(seed + 1).standard_normal(out.shape)
        return (out * probe["weights"]).sum()

    return grad_check(_objective, inputs, tol=tol, seed=seed)
