"""Configuración centralizada para el motor PATH.

Este módulo contiene las configuraciones de entorno y los valores por defecto
a escala de escritorio utilizados en la aplicación.
"""

import logging
import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv

# Cargar variables de entorno
load_dotenv()

ROOT_DIR = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

# Configuración del sistema
SYSTEM = {
    "environment": os.getenv("ENVIRONMENT", "development"),
    "log_level": os.getenv("LOG_LEVEL", "INFO"),
    "workers": int(os.getenv("PATH_ENGINE_WORKERS", "1")),
    "analytics_every": int(os.getenv("PATH_ENGINE_ANALYTICS_EVERY", "50")),
}

# Rutas de artefactos
PATHS = {
    "data_dir": os.getenv("PATH_ENGINE_DATA_DIR", os.path.join(ROOT_DIR, "data")),
    "desk_config": os.path.join(ROOT_DIR, "configs", "desk.json"),
}

# Geometría y constantes a escala de escritorio
DESK_DEFAULTS = {
    "patch_size": 4,
    "embed_dim": 32,
    "depth": 4,
    "heads": 4,
    "canonical_image": 32,
    "image_size": 32,
    "reid_image": (48, 32),
    "gate_temperature": 0.1,
    "partial_ft_blocks": 2,
    "batchnorm_momentum": 0.1,
}

# Formato de checkpoint
CHECKPOINT = {
    "magic": b"PATHCKPT",
    "format_version": 1,
}


def get_settings() -> Dict[str, Any]:
    """Obtiene las configuraciones consolidadas en un solo diccionario.

    Returns:
        Diccionario con todas las configuraciones
    """
    return {
        "system": SYSTEM,
        "paths": PATHS,
        "desk_defaults": DESK_DEFAULTS,
        "checkpoint": CHECKPOINT,
    }


def resolve_seed(explicit: Optional[int] = None, default: Optional[int] = 0) -> Optional[int]:
    """Resuelve la semilla global: argumento explícito, luego PATH_ENGINE_SEED.

    Args:
        explicit: Semilla dada por línea de comandos, si existe
        default: Valor usado cuando no hay ninguna otra fuente (puede ser None)

    Returns:
        Semilla entera, o ``default``
    """
    if explicit is not None:
        return int(explicit)
    env_seed = os.getenv("PATH_ENGINE_SEED")
    if env_seed:
        return int(env_seed)
    return default


def configure_logging(level: Optional[str] = None) -> None:
    """Configura el logger raíz una única vez según LOG_LEVEL."""
    logging.basicConfig(
        level=(level or SYSTEM["log_level"]).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def validate_env() -> bool:
    """Valida que las variables de entorno tengan valores utilizables.

    Returns:
        True si la configuración es válida, False en caso contrario
    """
    invalid = []
    env_seed = os.getenv("PATH_ENGINE_SEED")
    if env_seed and not env_seed.lstrip("-").isdigit():
        invalid.append("PATH_ENGINE_SEED")
    if SYSTEM["workers"] < 1:
        invalid.append("PATH_ENGINE_WORKERS")

    if invalid:
        logging.getLogger(__name__).error(
            "Variables de entorno inválidas: %s", ", ".join(invalid)
        )
        return False

    return True
