import numpy as np
import pytest

from src.models.enums import TaskFamily
from src.models.errors import ConfigError
from src.models.experiment import HeadConfig
from src.networks.heads import HEADS, build_head
from src.services.data_synth import generate
from src.numerics.tensor import Tensor

HEAD_CONFIG = HeadConfig(num_classes=3, num_keypoints=2, num_queries=3, decoder_layers=1)


def _batch(family: TaskFamily, n: int = 4):
    data = generate(family, 5, n, image_size=(8, 8), head=HEAD_CONFIG, patch_size=4)
    return data.batch(list(range(n)))


def _feature(n: int = 4) -> Tensor:
    return Tensor(np.random.default_rng(7).standard_normal((n, 8, 2, 2)))


class TestBuildHead:
    @pytest.mark.parametrize("family", list(TaskFamily))
    def test_loss_is_finite(self, family: TaskFamily) -> None:
        head = build_head(family, "t", "d", 8, HEAD_CONFIG, seed=3)
        images, labels = _batch(family)
        loss = head.loss(head(_feature(), images.shape[2:]), labels)
        assert loss.size == 1
        assert np.isfinite(loss.item())

    def test_names_are_dataset_scoped(self) -> None:
        head = build_head(TaskFamily.PARSING, "parsing", "lip", 8, HEAD_CONFIG)
        assert all(name.startswith("head.parsing.lip.") for name, _ in head.named_parameters())

    def test_unknown_family(self) -> None:
        with pytest.raises(ConfigError):
            build_head("segmentation", "t", "d", 8, HEAD_CONFIG)

    @pytest.mark.parametrize("family", [TaskFamily.POSE, TaskFamily.PARSING])
    def test_dense_decoders_use_layer_norm(self, family: TaskFamily) -> None:
        head = HEADS[family]("t", "d", 8, HEAD_CONFIG)
        assert list(head.named_norm_states()) == []


class TestPredictions:
    def test_reid_embedding(self) -> None:
        head = build_head(TaskFamily.REID, "t", "d", 8, HEAD_CONFIG)
        assert head.predict(head(_feature(), (8, 8)))["embedding"].shape == (4, 8)

    def test_parsing_mask_at_image_resolution(self) -> None:
        head = build_head(TaskFamily.PARSING, "t", "d", 8, HEAD_CONFIG)
        mask = head.predict(head(_feature(), (8, 8)))["mask"]
        assert mask.shape == (4, 8, 8)
        assert mask.max() < HEAD_CONFIG.num_classes

    def test_pose_heatmaps_quadruple_grid(self) -> None:
        head = build_head(TaskFamily.POSE, "t", "d", 8, HEAD_CONFIG)
        assert head.predict(head(_feature(), (8, 8)))["heatmaps"].shape == (4, 2, 8, 8)

    def test_attribute_zero_weights(self) -> None:
        head = build_head(TaskFamily.ATTRIBUTE, "t", "d", 8, HEAD_CONFIG)
        for parameter in head.parameters():
            parameter.data[...] = 0.0
        _, labels = _batch(TaskFamily.ATTRIBUTE)
        output = head(_feature(), (8, 8))
        assert np.allclose(head.predict(output)["probabilities"], 0.5)
        assert head.loss(output, labels).item() == pytest.approx(np.log(2.0), rel=1e-5)

    def test_detection_boxes(self) -> None:
        head = build_head(TaskFamily.DETECTION, "t", "d", 8, HEAD_CONFIG)
        prediction = head.predict(head(_feature(), (8, 8)))
        assert prediction["boxes"].shape == (4, 3, 4)
        assert np.all((prediction["boxes"] >= 0.0) & (prediction["boxes"] <= 1.0))
        assert np.all(prediction["classes"] < HEAD_CONFIG.num_classes)

    def test_counting_density(self) -> None:
        head = build_head(TaskFamily.COUNTING, "t", "d", 8, HEAD_CONFIG)
        prediction = head.predict(head(_feature(), (8, 8)))
        assert prediction["density"].shape == (4, 1, 8, 8)
        assert np.all(prediction["density"] >= 0.0)
        assert np.allclose(prediction["count"], prediction["density"].sum(axis=(1, 2, 3)))
