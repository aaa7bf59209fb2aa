"""Servicios del motor PATH: entrenamiento, datos, evaluación y persistencia."""
