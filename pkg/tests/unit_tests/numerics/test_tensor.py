import numpy as np
import pytest

from src.models.errors import DimensionError, ScopeError
from src.numerics.tensor import Parameter, Tensor, get_default_dtype, no_grad, precision


class TestTensorArithmetic:
    def test_default_dtype_is_float32(self) -> None:
        assert Tensor([1.0, 2.0]).dtype == np.float32

    def test_precision_context(self) -> None:
        with precision(np.float64):
            assert get_default_dtype() == np.float64
            assert Tensor([1.0]).dtype == np.float64
        assert get_default_dtype() == np.float32

    def test_broadcast_add_gradient(self) -> None:
        a = Parameter(np.ones((2, 3)))
        b = Parameter(np.ones(3))
        (a + b).sum().backward()
        assert np.array_equal(a.grad, np.ones((2, 3)))
        assert np.array_equal(b.grad, np.full(3, 2.0))

    def test_mul_gradient(self) -> None:
        a = Parameter(np.array([1.0, 2.0, 3.0]))
        b = Parameter(np.array([4.0, 5.0, 6.0]))
        (a * b).sum().backward()
        assert np.array_equal(a.grad, b.data)
        assert np.array_equal(b.grad, a.data)

    def test_matmul_gradient(self) -> None:
        a = Parameter(np.arange(6, dtype=np.float32).reshape(2, 3))
        b = Parameter(np.ones((3, 2), dtype=np.float32))
        (a @ b).sum().backward()
        assert np.allclose(a.grad, np.ones((2, 2)) @ b.data.T)
        assert np.allclose(b.grad, a.data.T @ np.ones((2, 2)))

    def test_reused_node_accumulates(self) -> None:
        x = Parameter(np.array([3.0]))
        (x * x + x).sum().backward()
        assert np.allclose(x.grad, [7.0])

    def test_backward_requires_scalar(self) -> None:
        with pytest.raises(DimensionError):
            Parameter(np.ones(3)).backward()

    def test_indexing_gradient(self) -> None:
        x = Parameter(np.arange(4, dtype=np.float32))
        x[1:3].sum().backward()
        assert np.array_equal(x.grad, [0.0, 1.0, 1.0, 0.0])


class TestNoGrad:
    def test_no_graph_recorded(self) -> None:
        x = Parameter(np.ones(2))
        with no_grad():
            y = x * 2.0
        assert not y.requires_grad

    def test_frozen_parameter_receives_no_gradient(self) -> None:
        x = Parameter(np.ones(2), trainable=False)
        w = Parameter(np.ones(2))
        (x * w).sum().backward()
        assert x.grad is None
        assert w.grad is not None


class TestParameter:
    def test_data_is_copied(self) -> None:
        source = np.ones(3, dtype=np.float32)
        parameter = Parameter(source, name="p")
        source[0] = 5.0
        assert parameter.data[0] == 1.0

    def test_freezing_clears_gradient(self) -> None:
        parameter = Parameter(np.ones(2))
        parameter.grad = np.ones(2)
        parameter.trainable = False
        assert parameter.grad is None
        assert not parameter.requires_grad

    def test_scope_is_immutable(self) -> None:
        parameter = Parameter(np.ones(1), name="backbone.x")
        parameter.bind_scope("GLOBAL")
        parameter.bind_scope("GLOBAL")
        with pytest.raises(ScopeError):
            parameter.bind_scope("TASK(a)")
