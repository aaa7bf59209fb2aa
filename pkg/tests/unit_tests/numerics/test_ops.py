import numpy as np
import pytest

from src.models.errors import DegenerateBatchError, DimensionError
from src.numerics import ops
from src.numerics.tensor import Parameter, Tensor


class TestConvolutions:
    def test_conv2d_shape(self, rng) -> None:
        x = Tensor(rng.standard_normal((2, 3, 8, 8)))
        w = Tensor(rng.standard_normal((5, 3, 4, 4)))
        assert ops.conv2d(x, w, stride=4).shape == (2, 5, 2, 2)
        assert ops.conv2d(x, w, stride=2, padding=1).shape == (2, 5, 4, 4)

    def test_conv2d_channel_mismatch(self, rng) -> None:
        with pytest.raises(DimensionError):
            ops.conv2d(Tensor(rng.standard_normal((1, 2, 4, 4))), Tensor(rng.standard_normal((1, 3, 3, 3))))

    def test_transposed_conv_doubles_extent(self, rng) -> None:
        x = Tensor(rng.standard_normal((1, 2, 3, 5)))
        w = Tensor(rng.standard_normal((2, 4, 4, 4)))
        assert ops.transposed_conv2d(x, w).shape == (1, 4, 6, 10)

    def test_transposed_conv_is_adjoint(self, rng) -> None:
        x = rng.standard_normal((1, 2, 6, 6))
        y = rng.standard_normal((1, 3, 3, 3))
        w = rng.standard_normal((3, 2, 4, 4))
        forward = ops.conv2d(Tensor(x), Tensor(w), stride=2, padding=1).data
        adjoint = ops.transposed_conv2d(Tensor(y), Tensor(w), stride=2, padding=1).data
        assert np.isclose(np.sum(forward * y), np.sum(x * adjoint), rtol=1e-4, atol=1e-3)

    def test_upsample_nearest(self) -> None:
        x = Tensor(np.arange(4, dtype=np.float32).reshape(1, 1, 2, 2))
        out = ops.upsample_nearest(x, 2).data
        assert out.shape == (1, 1, 4, 4)
        assert np.array_equal(out[0, 0, :2, :2], np.zeros((2, 2)))


class TestNormalization:
    def test_layer_norm_statistics(self, rng) -> None:
        out = ops.layer_norm(Tensor(rng.standard_normal((4, 16)) * 3 + 1)).data
        assert np.allclose(out.mean(axis=-1), 0.0, atol=1e-5)
        assert np.allclose(out.std(axis=-1), 1.0, atol=1e-2)

    def test_batch_norm_rejects_single_sample(self, rng) -> None:
        state = ops.BatchNormState.create(3)
        with pytest.raises(DegenerateBatchError):
            ops.batch_norm(Tensor(rng.standard_normal((1, 3))), state, "train")

    def test_batch_norm_updates_running_stats(self, rng) -> None:
        state = ops.BatchNormState.create(2, momentum=0.5)
        ops.batch_norm(Tensor(rng.standard_normal((8, 2)) + 4.0), state, "train")
        assert state.batches_tracked == 1
        assert np.all(state.running_mean > 1.0)

    def test_batch_norm_eval_accepts_single_sample(self) -> None:
        state = ops.BatchNormState.create(2)
        out = ops.batch_norm(Tensor(np.array([[1.0, -1.0]])), state, "eval")
        assert np.allclose(out.data, [[1.0, -1.0]], atol=1e-4)


class TestActivations:
    def test_softmax_sums_to_one(self, rng) -> None:
        out = ops.softmax(Tensor(rng.standard_normal((3, 5)))).data
        assert np.allclose(out.sum(axis=-1), 1.0)

    def test_sigmoid_is_stable(self) -> None:
        out = ops.sigmoid(Tensor(np.array([-1000.0, 0.0, 1000.0]))).data
        assert np.all(np.isfinite(out))
        assert out[1] == 0.5

    def test_gelu_at_zero(self) -> None:
        assert ops.gelu(Tensor(np.array([0.0]))).item() == 0.0

    def test_unknown_pointwise(self) -> None:
        with pytest.raises(ValueError):
            ops.pointwise(Tensor(np.zeros(1)), "swish")


class TestInterpolation:
    def test_resize_identity(self, rng) -> None:
        x = Tensor(rng.standard_normal((1, 2, 3, 3)))
        assert ops.bilinear_resize(x, 3, 3) is x

    def test_align_corners_keeps_endpoints(self, rng) -> None:
        x = rng.standard_normal((1, 1, 3, 3))
        out = ops.bilinear_resize(Tensor(x), 5, 5, align_corners=True).data
        assert np.allclose(out[0, 0, 0, 0], x[0, 0, 0, 0])
        assert np.allclose(out[0, 0, -1, -1], x[0, 0, -1, -1])

    def test_rejects_empty_target(self, rng) -> None:
        with pytest.raises(DimensionError):
            ops.bilinear_resize(Tensor(rng.standard_normal((1, 1, 2, 2))), 0, 2)


class TestLosses:
    def test_cross_entropy_uniform_logits(self) -> None:
        loss = ops.cross_entropy(Tensor(np.zeros((2, 4))), np.array([0, 3]), axis=1)
        assert np.isclose(loss.item(), np.log(4.0))

    def test_cross_entropy_label_range(self) -> None:
        with pytest.raises(DimensionError):
            ops.cross_entropy(Tensor(np.zeros((2, 4))), np.array([0, 4]))

    def test_weighted_cross_entropy_gradient_sums_to_zero(self, rng) -> None:
        logits = Parameter(rng.standard_normal((3, 4)))
        ops.cross_entropy(logits, np.array([1, 0, 2]), weights=np.array([1.0, 0.1, 0.1])).backward()
        assert np.allclose(logits.grad.sum(axis=1), 0.0, atol=1e-6)

    def test_bce_matches_formula(self) -> None:
        loss = ops.binary_cross_entropy_with_logits(Tensor(np.array([0.0, 0.0])), np.array([0.0, 1.0]))
        assert np.isclose(loss.item(), np.log(2.0))
