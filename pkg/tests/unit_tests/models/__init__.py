# tests/unit_tests/models/__init__.py
"""Tests unitarios para los modelos de datos."""
