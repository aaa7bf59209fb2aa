import numpy as np
import pytest

from src.models.enums import OptimizerKind
from src.models.experiment import OptimizerConfig
from src.numerics.tensor import Parameter
from src.services.optimizers import SGD, Adafactor, build_optimizer


def _params(**values):
    return {name: Parameter(np.asarray(value, dtype=np.float32), name=name) for name, value in values.items()}


class TestSGD:
    def test_plain_step(self) -> None:
        params = _params(w=[0.0])
        SGD(OptimizerConfig(kind=OptimizerKind.SGD)).step(params, {"w": np.array([1.0])}, {"w": 0.1})
        assert params["w"].data[0] == pytest.approx(-0.1)

    def test_coupled_weight_decay(self) -> None:
        params = _params(w=[1.0])
        optimizer = SGD(OptimizerConfig(kind=OptimizerKind.SGD))
        optimizer.step(params, {"w": np.array([0.0])}, {"w": 0.1}, {"w": 0.5})
        assert params["w"].data[0] == pytest.approx(0.95)
        assert optimizer.state["w"]["weight_decay"] == 0.5

    def test_momentum(self) -> None:
        params = _params(w=[0.0])
        optimizer = SGD(OptimizerConfig(kind=OptimizerKind.SGD, momentum=0.5))
        for _ in range(2):
            optimizer.step(params, {"w": np.array([1.0])}, {"w": 1.0})
        assert params["w"].data[0] == pytest.approx(-2.5)

    def test_frozen_parameter_is_untouched(self) -> None:
        params = _params(w=[0.25, 0.5])
        params["w"].trainable = False
        before = params["w"].data.tobytes()
        SGD(OptimizerConfig(kind=OptimizerKind.SGD)).step(params, {"w": np.ones(2)}, {"w": 1.0})
        assert params["w"].data.tobytes() == before

    def test_keeps_dtype(self) -> None:
        params = _params(w=[0.0])
        SGD(OptimizerConfig(kind=OptimizerKind.SGD)).step(params, {"w": np.array([1.0])}, {"w": 0.1})
        assert params["w"].data.dtype == np.float32


class TestAdafactor:
    def test_first_matrix_step(self) -> None:
        params = _params(w=np.zeros((2, 3)))
        Adafactor(OptimizerConfig()).step(params, {"w": np.ones((2, 3))}, {"w": 1.0})
        assert np.allclose(params["w"].data, -0.05)

    def test_decoupled_weight_decay(self) -> None:
        params = _params(w=[1.0])
        Adafactor(OptimizerConfig()).step(params, {"w": np.zeros(1)}, {"w": 0.1}, {"w": 0.5})
        assert params["w"].data[0] == pytest.approx(0.95)

    def test_update_is_clipped(self) -> None:
        params = _params(w=np.zeros(4))
        optimizer = Adafactor(OptimizerConfig(beta1=0.0))
        optimizer.step(params, {"w": np.array([1e6, -1e6, 1e-6, 0.0])}, {"w": 1.0})
        rms = np.sqrt(np.mean(np.square(params["w"].data.astype(np.float64))))
        assert rms <= 0.5 + 1e-6

    def test_factored_state(self) -> None:
        params = _params(w=np.zeros((3, 4)), b=np.zeros(4))
        optimizer = Adafactor(OptimizerConfig())
        optimizer.step(params, {"w": np.ones((3, 4)), "b": np.ones(4)}, {"w": 0.1, "b": 0.1})
        assert optimizer.state["w"]["exp_avg_sq_row"].shape == (3,)
        assert optimizer.state["w"]["exp_avg_sq_col"].shape == (4,)
        assert optimizer.state["b"]["exp_avg_sq"].shape == (4,)
        assert optimizer.state["w"]["step"] == 1

    def test_deterministic(self, rng) -> None:
        grads = {"w": rng.standard_normal((3, 2))}
        results = []
        for _ in range(2):
            params = _params(w=np.ones((3, 2)))
            optimizer = Adafactor(OptimizerConfig())
            for _ in range(3):
                optimizer.step(params, grads, {"w": 0.01})
            results.append(params["w"].data.tobytes())
        assert results[0] == results[1]


class TestBuildOptimizer:
    def test_kinds(self) -> None:
        assert isinstance(build_optimizer(OptimizerConfig(kind=OptimizerKind.SGD)), SGD)
        assert isinstance(build_optimizer(OptimizerConfig()), Adafactor)
