import numpy as np
import pytest

from src.models.boxes import BoxSet
from src.models.enums import Split, TaskFamily
from src.models.errors import ConfigError
from src.models.experiment import HeadConfig
from src.services.data_synth import (
    collate,
    dataset_for,
    export_dataset,
    flip_sample,
    generate,
    load_exported_dataset,
    map_size,
    to_map_coords,
)

HEAD = HeadConfig(num_classes=4, num_keypoints=3, num_queries=4)


class TestGenerate:
    @pytest.mark.parametrize("family", list(TaskFamily))
    def test_deterministic(self, family: TaskFamily) -> None:
        first = generate(family, 3, 4, head=HEAD)
        second = generate(family, 3, 4, head=HEAD)
        assert first.images.tobytes() == second.images.tobytes()
        assert len(first) == 4

    def test_seed_and_split_change_stream(self) -> None:
        base = generate(TaskFamily.PARSING, 3, 2)
        assert not np.array_equal(base.images, generate(TaskFamily.PARSING, 4, 2).images)
        assert not np.array_equal(base.images, generate(TaskFamily.PARSING, 3, 2, split=Split.IN_EVAL).images)

    def test_default_sizes(self) -> None:
        assert generate(TaskFamily.REID, 0, 1).images.shape == (1, 3, 48, 32)
        assert generate(TaskFamily.COUNTING, 0, 1).images.shape == (1, 3, 32, 32)

    def test_pixel_range(self) -> None:
        images = generate(TaskFamily.DETECTION, 1, 6, head=HEAD).images
        assert images.dtype == np.float32
        assert images.min() >= 0.0 and images.max() <= 1.0

    def test_counting_density_sums_to_count(self) -> None:
        data = generate(TaskFamily.COUNTING, 2, 6)
        for label in data.labels:
            assert label["density"].sum() == pytest.approx(label["count"], abs=1e-4)

    def test_detection_boxes_are_valid(self) -> None:
        for label in generate(TaskFamily.DETECTION, 2, 6, head=HEAD).labels:
            assert len(label["boxes"]) <= HEAD.num_queries
            assert all(c < HEAD.num_classes for c in label["boxes"].classes)

    def test_dense_maps_at_four_times_grid(self) -> None:
        data = generate(TaskFamily.POSE, 0, 2, image_size=(16, 24), head=HEAD, patch_size=4)
        assert data.map_size == (16, 24)
        assert data.labels[0]["heatmaps"].shape == (3, 16, 24)

    @pytest.mark.parametrize(
        "kwargs",
        [{"family": "segmentation", "n": 2}, {"family": TaskFamily.POSE, "n": 0},
         {"family": TaskFamily.REID, "n": 2, "head": HeadConfig(num_classes=1000)}],
    )
    def test_rejected(self, kwargs) -> None:
        with pytest.raises(ConfigError):
            generate(seed=0, **kwargs)

    def test_dataset_for_uses_spec(self, tiny_config) -> None:
        spec = tiny_config.dataset("attr_1")
        data = dataset_for(spec, patch_size=4)
        assert len(data) == spec.samples
        assert data.image_size == (16, 16)
        assert data.images.tobytes() == generate(spec.family, spec.seed, spec.samples, image_size=(16, 16),
                                                 head=spec.head).images.tobytes()


class TestFlip:
    def test_parsing_mask_follows_image(self) -> None:
        data = generate(TaskFamily.PARSING, 5, 1)
        image, label = data.sample(0)
        flipped_image, flipped = flip_sample(TaskFamily.PARSING, image, label)
        assert np.array_equal(flipped_image, image[..., ::-1])
        assert np.array_equal(flipped["mask"], label["mask"][:, ::-1])

    @pytest.mark.parametrize("family", [TaskFamily.POSE, TaskFamily.DETECTION, TaskFamily.COUNTING])
    def test_double_flip_is_identity(self, family: TaskFamily) -> None:
        image, label = generate(family, 5, 1, head=HEAD).sample(0)
        twice_image, twice = flip_sample(family, *flip_sample(family, image, label))
        assert np.array_equal(twice_image, image)
        for key, value in label.items():
            if isinstance(value, np.ndarray):
                assert np.allclose(twice[key], value)
            elif isinstance(value, BoxSet):
                assert np.allclose(twice[key].to_array(), value.to_array())
                assert twice[key].classes == value.classes
            else:
                assert twice[key] == value

    def test_pose_keypoint_mirrors(self) -> None:
        image, label = generate(TaskFamily.POSE, 1, 1, image_size=(16, 16), head=HEAD).sample(0)
        _, flipped = flip_sample(TaskFamily.POSE, image, label)
        assert np.allclose(flipped["keypoints"][:, 0], 15 - label["keypoints"][:, 0])


class TestBatching:
    def test_collate_shapes(self) -> None:
        data = generate(TaskFamily.REID, 0, 3)
        _, labels = data.batch([0, 2])
        assert labels["identity"].shape == (2,)
        _, pose = generate(TaskFamily.POSE, 0, 3, head=HEAD).batch([0, 1, 2])
        assert pose["heatmaps"].shape == (3, 3, 32, 32)

    def test_flip_flags(self) -> None:
        data = generate(TaskFamily.ATTRIBUTE, 0, 2)
        images, _ = data.batch([0, 1], flips=[True, False])
        assert np.array_equal(images[0], data.images[0][..., ::-1])
        assert np.array_equal(images[1], data.images[1])

    def test_collate_counting(self) -> None:
        labels = [{"density": np.zeros((1, 2, 2)), "count": 0.0}, {"density": np.ones((1, 2, 2)), "count": 4.0}]
        collated = collate(TaskFamily.COUNTING, labels)
        assert collated["count"].tolist() == [0.0, 4.0]


class TestGeometry:
    def test_map_size(self) -> None:
        assert map_size((48, 32), 4) == (48, 32)
        assert map_size((32, 32), 8) == (16, 16)

    def test_to_map_coords_aligns_centers(self) -> None:
        assert to_map_coords((0.0, 0.0), (8, 8), (8, 8)) == (0.0, 0.0)
        assert to_map_coords((1.5, 1.5), (8, 8), (4, 4)) == (0.5, 0.5)


class TestExport:
    def test_export_and_reload(self, tmp_path) -> None:
        data = generate(TaskFamily.DETECTION, 4, 3, head=HEAD)
        loaded = load_exported_dataset(export_dataset(data, tmp_path / "det"))
        assert loaded.images.tobytes() == data.images.tobytes()
        assert [label["boxes"] for label in loaded.labels] == [label["boxes"] for label in data.labels]
        assert loaded.split is data.split
