import json

import pytest
from pydantic import ValidationError

from src.models.enums import Protocol, ShareType, TaskFamily
from src.models.errors import ConfigError
from src.models.experiment import (
    BackboneConfig,
    DatasetSpec,
    EvaluationConfig,
    ExperimentConfig,
    OptimizerConfig,
    ProjectorConfig,
    TrainPlan,
)


class TestBackboneConfig:
    def test_desk_defaults(self) -> None:
        config = BackboneConfig()
        assert (config.patch_size, config.embed_dim, config.depth, config.heads) == (4, 32, 4, 4)
        assert config.canonical_grid == 8

    def test_default_taps_are_last_blocks(self) -> None:
        assert BackboneConfig(depth=4).taps == [1, 2, 3, 4]
        assert BackboneConfig(depth=12, embed_dim=12, heads=3).taps == list(range(5, 13))

    def test_explicit_taps(self) -> None:
        assert BackboneConfig(tap_layers=[2, 4]).taps == [2, 4]

    def test_rejects_non_increasing_taps(self) -> None:
        with pytest.raises(ValidationError):
            BackboneConfig(tap_layers=[3, 2])

    def test_rejects_taps_out_of_range(self) -> None:
        with pytest.raises(ValidationError):
            BackboneConfig(tap_layers=[0, 1])

    def test_rejects_indivisible_heads(self) -> None:
        with pytest.raises(ValidationError):
            BackboneConfig(embed_dim=30, heads=4)


class TestProjectorConfig:
    def test_rejects_even_kernel(self) -> None:
        with pytest.raises(ValidationError):
            ProjectorConfig(se_kernel=4)

    def test_rejects_zero_temperature(self) -> None:
        with pytest.raises(ValidationError):
            ProjectorConfig(temperature=0.0)


class TestDatasetSpec:
    def test_loss_weight_is_exact_integer(self) -> None:
        spec = DatasetSpec(name="coco", task="pose", family=TaskFamily.POSE, sample_weight=224,
                           batch_per_replica=2, replicas=8000)
        assert spec.loss_weight == 3584000
        assert isinstance(spec.loss_weight, int)

    def test_fractional_loss_weight(self) -> None:
        spec = DatasetSpec(name="d", task="t", family=TaskFamily.REID, sample_weight=0.5, batch_per_replica=3)
        assert spec.loss_weight == 1.5

    def test_reid_default_image(self) -> None:
        spec = DatasetSpec(name="d", task="t", family=TaskFamily.REID)
        assert spec.resolved_image_size() == (48, 32)

    def test_rejects_dotted_name(self) -> None:
        with pytest.raises(ValidationError):
            DatasetSpec(name="a.b", task="t", family=TaskFamily.POSE)

    def test_rejects_unknown_keys(self) -> None:
        with pytest.raises(ValidationError):
            DatasetSpec(name="a", task="t", family=TaskFamily.POSE, colour="red")


class TestOptimizerAndPlan:
    def test_relative_step_rejected(self) -> None:
        with pytest.raises(ValidationError):
            OptimizerConfig(relative_step=True)

    def test_mismatched_schedule(self) -> None:
        with pytest.raises(ValidationError):
            TrainPlan(lr_mults=[0.5], lr_steps=[])

    def test_steps_must_precede_max_iter(self) -> None:
        with pytest.raises(ValidationError):
            TrainPlan(max_iter=10, lr_mults=[0.5], lr_steps=[10])

    def test_evaluation_rejects_pretrain_protocol(self) -> None:
        with pytest.raises(ValidationError):
            EvaluationConfig(protocols=[Protocol.PRETRAIN])


class TestExperimentConfig:
    def test_tasks_grouping(self, tiny_config: ExperimentConfig) -> None:
        assert list(tiny_config.tasks) == ["attributes", "parsing"]
        assert [s.name for s in tiny_config.tasks["attributes"]] == ["attr_0", "attr_1", "attr_2"]

    def test_duplicate_datasets(self, tiny_config: ExperimentConfig) -> None:
        data = tiny_config.model_dump(mode="json")
        data["datasets"].append(data["datasets"][0])
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate(data)

    def test_task_mixing_families(self, tiny_config: ExperimentConfig) -> None:
        data = tiny_config.model_dump(mode="json")
        data["datasets"][0]["family"] = "pose"
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate(data)

    def test_indivisible_image(self, tiny_config: ExperimentConfig) -> None:
        data = tiny_config.model_dump(mode="json")
        data["datasets"][0]["image_size"] = [18, 16]
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate(data)

    def test_unknown_top_level_key(self, tiny_config: ExperimentConfig) -> None:
        data = tiny_config.model_dump(mode="json")
        data["extra"] = 1
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate(data)

    def test_round_trip(self, tmp_path, tiny_config: ExperimentConfig) -> None:
        path = tmp_path / "config.json"
        tiny_config.dump(path)
        loaded = ExperimentConfig.load(path)
        assert loaded == tiny_config
        loaded.dump(tmp_path / "again.json")
        assert json.loads((tmp_path / "again.json").read_text()) == json.loads(path.read_text())

    @pytest.mark.parametrize("content", [b"{not json", b"\xff\xfe\x00"])
    def test_unreadable_document(self, tmp_path, content: bytes) -> None:
        path = tmp_path / "broken.json"
        path.write_bytes(content)
        with pytest.raises(ConfigError):
            ExperimentConfig.load(path)

    def test_directory_is_not_a_document(self, tmp_path) -> None:
        with pytest.raises(ConfigError):
            ExperimentConfig.load(tmp_path)

    def test_dataset_lookup(self, tiny_config: ExperimentConfig) -> None:
        assert tiny_config.dataset("parse_1").task == "parsing"
        with pytest.raises(KeyError):
            tiny_config.dataset("missing")

    def test_desk_config_loads(self) -> None:
        from src.config.settings import PATHS

        config = ExperimentConfig.load(PATHS["desk_config"])
        assert len(config.datasets) == 5
        assert len(config.tasks) == 3
        assert config.projector.share_type is ShareType.TASK
        assert config.plan.lr_steps == [1000, 1500, 1900]
