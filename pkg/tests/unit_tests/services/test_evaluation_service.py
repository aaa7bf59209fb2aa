import numpy as np
import pytest

from src.models.enums import Protocol, Scenario, TaskFamily
from src.models.errors import ConfigError, DivergenceError
from src.models.experiment import DatasetSpec
from src.networks.path_model import PathModel
from src.numerics.tensor import Tensor
from src.services.checkpoint_repository import Checkpoint, save_checkpoint
from src.services.evaluation_service import (
    finetune,
    format_report,
    measure,
    report_csv,
    run_evaluation,
    scenario_specs,
    scenario_split,
    to_boxsets,
)
from src.services.data_synth import generate
from src.services.optimizers import build_optimizer
from src.services.sharing_registry import discard_projectors


@pytest.fixture
def checkpoint(tiny_config) -> Checkpoint:
    model = PathModel.from_config(tiny_config, seed=0)
    return Checkpoint(seed=0, entries=model.state_dict(), metadata={"config": tiny_config.model_dump(mode="json")})


class TestScenarios:
    def test_in_dataset_uses_pretraining_datasets(self, tiny_config) -> None:
        names = [spec.name for spec in scenario_specs(tiny_config, Scenario.IN_DATASET)]
        assert names == ["attr_0", "attr_1", "attr_2", "parse_0", "parse_1"]

    def test_unseen_task(self, tiny_config) -> None:
        specs = scenario_specs(tiny_config, Scenario.UNSEEN_TASK)
        assert [spec.family for spec in specs] == [TaskFamily.COUNTING]

    def test_unseen_task_must_be_unseen(self, tiny_config) -> None:
        evaluation = tiny_config.evaluation.model_copy(
            update={"unseen": DatasetSpec(name="p", task="parsing", family=TaskFamily.PARSING)}
        )
        with pytest.raises(ConfigError):
            scenario_specs(tiny_config.model_copy(update={"evaluation": evaluation}), Scenario.UNSEEN_TASK)

    def test_split_sizes(self, tiny_config) -> None:
        train, test = scenario_split(tiny_config.dataset("attr_0"), Scenario.IN_DATASET, tiny_config)
        assert len(test) == tiny_config.evaluation.test_samples
        assert len(train) <= tiny_config.evaluation.train_samples

    def test_out_of_dataset_uses_other_images(self, tiny_config) -> None:
        spec = tiny_config.dataset("parse_0")
        _, inside = scenario_split(spec, Scenario.IN_DATASET, tiny_config)
        _, outside = scenario_split(spec, Scenario.OUT_OF_DATASET, tiny_config)
        assert not np.array_equal(inside.images, outside.images)


class TestMeasure:
    def test_detection_outputs_become_boxsets(self) -> None:
        prediction = {
            "boxes": np.array([[[0.1, 0.1, 0.5, 0.5], [0.2, 0.2, 0.3, 0.3]]]),
            "scores": np.array([[0.9, 0.1]]),
            "classes": np.array([[1, 0]]),
        }
        (boxes,) = to_boxsets(prediction)
        assert boxes.classes == [1, 0]
        assert boxes.scores == pytest.approx([0.9, 0.1])

    def test_counting_uses_ground_truth_counts(self) -> None:
        spec = DatasetSpec(name="c", task="counting", family=TaskFamily.COUNTING)
        test = generate(TaskFamily.COUNTING, 0, 3)
        _, labels = test.batch(range(3))
        values = dict(measure(TaskFamily.COUNTING, spec, {"count": labels["count"]}, test))
        assert values == {"MAE": 0.0, "RMSE": 0.0}


class TestRunEvaluation:
    def test_head_ft_reports_every_dataset(self, checkpoint) -> None:
        report = run_evaluation(checkpoint, Scenario.IN_DATASET, Protocol.HEAD_FT)
        assert report.backbone_frozen is True
        assert report.datasets == ["attr_0", "attr_1", "attr_2", "parse_0", "parse_1"]
        values = report.values()
        assert set(values["attr_0"]) == {"mA"}
        assert set(values["parse_0"]) == {"mIoU", "pACC"}
        assert all(0.0 <= row.value <= 1.0 for row in report.metrics)

    def test_deterministic(self, checkpoint) -> None:
        first = run_evaluation(checkpoint, Scenario.IN_DATASET, Protocol.PARTIAL_FT, seed=4)
        second = run_evaluation(checkpoint, Scenario.IN_DATASET, Protocol.PARTIAL_FT, seed=4)
        assert first.values() == second.values()
        assert first.backbone_frozen is False

    def test_unseen_counting(self, checkpoint) -> None:
        report = run_evaluation(checkpoint, Scenario.UNSEEN_TASK, Protocol.FULL_FT)
        (dataset,) = report.datasets
        assert set(report.values()[dataset]) == {"MAE", "RMSE"}

    def test_loads_from_path(self, checkpoint, tmp_path) -> None:
        path = save_checkpoint(tmp_path / "eval.ckpt", checkpoint.entries, checkpoint.seed, checkpoint.metadata)
        report = run_evaluation(path, Scenario.OUT_OF_DATASET, Protocol.HEAD_FT)
        assert report.seed == 0
        assert format_report(report).startswith("[out-of-dataset]")

    def test_requires_config(self, checkpoint) -> None:
        bare = Checkpoint(seed=0, entries=checkpoint.entries)
        with pytest.raises(ConfigError):
            run_evaluation(bare, Scenario.IN_DATASET, Protocol.HEAD_FT)

    def test_protocol_must_be_configured(self, checkpoint, tiny_config) -> None:
        evaluation = tiny_config.evaluation.model_copy(update={"protocols": [Protocol.FULL_FT]})
        config = tiny_config.model_copy(update={"evaluation": evaluation})
        with pytest.raises(ConfigError):
            run_evaluation(checkpoint, Scenario.IN_DATASET, Protocol.HEAD_FT, config=config)

    def test_csv(self, checkpoint) -> None:
        report = run_evaluation(checkpoint, Scenario.IN_DATASET, Protocol.HEAD_FT)
        lines = report_csv(report).splitlines()
        assert lines[0] == "scenario,protocol,seed,dataset,family,metric,value"
        assert len(lines) == 1 + len(report.metrics)


class TestFinetune:
    def _model_and_data(self, tiny_config, checkpoint):
        spec = tiny_config.dataset("attr_0")
        train, _ = scenario_split(spec, Scenario.IN_DATASET, tiny_config)
        return discard_projectors(checkpoint.entries, tiny_config, spec), train

    def test_nan_loss_raises_divergence(self, tiny_config, checkpoint, monkeypatch) -> None:
        model, train = self._model_and_data(tiny_config, checkpoint)
        monkeypatch.setattr(model, "loss", lambda images, labels: Tensor(np.array(np.nan)))
        with pytest.raises(DivergenceError) as info:
            finetune(model, train, tiny_config, Protocol.FULL_FT, seed=0)
        assert info.value.step == 0
        assert info.value.dataset == "attr_0"

    def test_frozen_protocols_use_zero_weight_decay(self, tiny_config, checkpoint) -> None:
        for protocol in (Protocol.HEAD_FT, Protocol.PARTIAL_FT):
            model, train = self._model_and_data(tiny_config, checkpoint)
            optimizer = build_optimizer(tiny_config.plan.optimizer)
            losses = finetune(model, train, tiny_config, protocol, seed=0, optimizer=optimizer)
            assert len(losses) == tiny_config.evaluation.finetune_iters
            assert optimizer.state
            assert all(entry["weight_decay"] == 0.0 for entry in optimizer.state.values())

    def test_full_ft_applies_weight_decay(self, tiny_config, checkpoint) -> None:
        model, train = self._model_and_data(tiny_config, checkpoint)
        optimizer = build_optimizer(tiny_config.plan.optimizer)
        finetune(model, train, tiny_config, Protocol.FULL_FT, seed=0, optimizer=optimizer)
        decays = {name: entry["weight_decay"] for name, entry in optimizer.state.items()}
        assert decays["backbone.patch_embed.weight"] == tiny_config.plan.weight_decay
