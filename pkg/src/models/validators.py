"""Funciones de validación y conversión para entradas de línea de comandos."""

import re
from typing import Optional, Tuple, Union

from .enums import ShareType

_NAME_RE = re.compile(r"^[A-Za-z0-9_\-]+$")


def parse_share_type(value: Optional[str]) -> Optional[ShareType]:
    """Convierte A|S|T (o all|specific|task) a ShareType."""
    if value is None:
        return None
    cleaned = value.strip().upper()
    aliases = {"ALL": "A", "SPECIFIC": "S", "TASK": "T"}
    cleaned = aliases.get(cleaned, cleaned)
    try:
        return ShareType(cleaned)
    except ValueError:
        return None


def parse_pos_embed(value: Optional[Union[str, bool]]) -> Optional[bool]:
    """Convierte shared|separate a booleano."""
    if value is None:
        return None
    if isinstance(value, bool):
        return value
    cleaned = value.strip().lower()
    if cleaned in ("shared", "true", "1"):
        return True
    if cleaned in ("separate", "false", "0"):
        return False
    return None


def parse_image_size(value: Optional[Union[str, Tuple[int, int]]]) -> Optional[Tuple[int, int]]:
    """Convierte "48x32" (alto x ancho) a tupla."""
    if value is None:
        return None
    if isinstance(value, tuple):
        return value
    match = re.match(r"^\s*(\d+)\s*[xX×]\s*(\d+)\s*$", value)
    if not match:
        return None
    return int(match.group(1)), int(match.group(2))


def validate_dataset_name(name: Optional[str]) -> bool:
    """Los nombres forman rutas de parámetros: sin puntos ni espacios."""
    if not name:
        return False
    return bool(_NAME_RE.match(name))
