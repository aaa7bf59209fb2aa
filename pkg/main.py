"""Punto de entrada del motor PATH.

Valida el entorno y delega en la línea de comandos:

    python main.py pretrain --config configs/desk.json --seed 0
    python main.py evaluate --checkpoint data/runs/<id>/checkpoint.ckpt --protocol head --scenario in
    python main.py verify
"""

import sys

from dotenv import load_dotenv

from src.cli import EXIT_USAGE, main
from src.config.settings import validate_env

# Cargar variables de entorno
load_dotenv()


if __name__ == "__main__":
    # Validar configuración
    if not validate_env():
        print("ERROR: variables de entorno inválidas. Por favor verifica el archivo .env.", file=sys.stderr)
        sys.exit(EXIT_USAGE)
    sys.exit(main())
