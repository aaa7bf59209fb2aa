import numpy as np
import pytest

from src.models.enums import TaskFamily
from src.models.errors import ConfigError
from src.services.curation import (
    HashCode,
    dedup,
    dedup_indices,
    dhash,
    hamming_distance,
    identity_counts,
    identity_filter,
    near_duplicates,
    subset,
    temporal_subsample,
)
from src.services.data_synth import generate


def _ramp(increasing: bool = True) -> np.ndarray:
    row = np.linspace(0.05, 0.95, 9)
    if not increasing:
        row = row[::-1]
    return np.tile(row, (8, 1))


class TestDHash:
    def test_constant_image_has_no_bits(self) -> None:
        assert int(dhash(np.full((8, 9), 0.5))) == 0

    def test_increasing_rows_set_every_bit(self) -> None:
        assert int(dhash(_ramp())) == 2**64 - 1

    def test_decreasing_rows_clear_every_bit(self) -> None:
        assert int(dhash(_ramp(increasing=False))) == 0

    def test_color_images(self) -> None:
        image = generate(TaskFamily.PARSING, 1, 1).images[0]
        assert dhash(image) == dhash(image.copy())
        assert dhash(image).bits().shape == (64,)

    def test_hamming(self) -> None:
        assert hamming_distance(HashCode(0b1011), HashCode(0)) == 3
        assert HashCode(2**64 - 1) - HashCode(0) == 64


class TestDedup:
    def test_indices(self) -> None:
        codes = [HashCode(1), HashCode(2), HashCode(3)]
        assert dedup_indices(codes, [HashCode(2), HashCode(9)]) == [0, 2]

    def test_removes_exact_copies(self) -> None:
        pretrain = generate(TaskFamily.ATTRIBUTE, 1, 4)
        evaluation = generate(TaskFamily.ATTRIBUTE, 2, 2)
        pretrain.images[2] = evaluation.images[0]
        kept = dedup(pretrain, evaluation)
        assert len(kept) < len(pretrain)
        assert dhash(evaluation.images[0]) not in {dhash(image) for image in kept.images}

    def test_near_duplicates(self) -> None:
        pretrain = generate(TaskFamily.PARSING, 1, 3)
        pairs = near_duplicates(pretrain, [pretrain.images[1]], max_distance=0)
        assert (1, 0, 0) in pairs
        with pytest.raises(ConfigError):
            near_duplicates(pretrain, pretrain, max_distance=-1)

    def test_subset(self) -> None:
        data = generate(TaskFamily.REID, 0, 5)
        picked = subset(data, [4, 1])
        assert len(picked) == 2
        assert np.array_equal(picked.images[0], data.images[4])
        assert len(subset(data, [])) == 0


class TestFilters:
    def test_temporal_subsample(self) -> None:
        assert temporal_subsample(list(range(20)), 8) == [0, 8, 16]
        assert temporal_subsample(list(range(3)), 1) == [0, 1, 2]
        with pytest.raises(ConfigError):
            temporal_subsample([1], 0)

    def test_identity_bounds_are_inclusive(self) -> None:
        counts = {"a": 14, "b": 15, "c": 200, "d": 201}
        assert identity_filter(counts) == {"b", "c"}

    def test_identity_counts(self) -> None:
        assert identity_counts(["x", "y", "x"]) == {"x": 2, "y": 1}
