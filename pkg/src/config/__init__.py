"""Configuración del motor PATH: entorno, rutas y logging."""
