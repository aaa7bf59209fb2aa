"""Fixtures compartidas: experimentos mínimos y directorio de datos aislado."""

import numpy as np
import pytest

from src.config.settings import PATHS
from src.models.enums import ShareType
from src.models.experiment import ExperimentConfig
from src.services.verification import tiny_experiment


@pytest.fixture(autouse=True)
def isolated_data_dir(tmp_path, monkeypatch):
    """Eventos, checkpoints y métricas van a un directorio temporal."""
    monkeypatch.setitem(PATHS, "data_dir", str(tmp_path / "data"))
    return tmp_path / "data"


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config() -> ExperimentConfig:
    """Cinco datasets en dos tareas (3 + 2), backbone de dos bloques."""
    return tiny_experiment(share_type=ShareType.TASK, max_iter=3)


@pytest.fixture
def tiny_backbone(tiny_config: ExperimentConfig):
    return tiny_config.backbone


@pytest.fixture
def tiny_config_file(tmp_path, tiny_config: ExperimentConfig):
    path = tmp_path / "tiny.json"
    tiny_config.dump(path)
    return path
