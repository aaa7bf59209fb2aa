import pytest

from src.models.enums import Protocol, TaskFamily
from src.models.errors import ConfigError
from src.models.experiment import DatasetSpec, TrainPlan
from src.services.schedule import (
    effective_lr,
    layer_decay_multiplier,
    loss_weight,
    lr_at,
    parameter_depth,
    weight_decay_for,
)
from src.services.sharing_registry import freeze_mask_for
from src.services.verification import full_scale_plan


def _spec(sample_weight, batch: int, replicas: int) -> DatasetSpec:
    return DatasetSpec(name="d", task="t", family=TaskFamily.POSE, sample_weight=sample_weight,
                       batch_per_replica=batch, replicas=replicas)


class TestLossWeight:
    @pytest.mark.parametrize(
        "sample_weight, batch, replicas, expected",
        [(8000, 224, 2, 3584000), (10, 2, 16, 320), (5, 112, 1, 560)],
    )
    def test_table_constants(self, sample_weight, batch, replicas, expected) -> None:
        weight = loss_weight(_spec(sample_weight, batch, replicas))
        assert weight == expected
        assert isinstance(weight, int)


class TestLearningRate:
    def test_warmup_endpoints(self) -> None:
        plan = full_scale_plan()
        assert lr_at(0, plan) == 1e-7
        assert lr_at(1500, plan) == 5e-4
        assert lr_at(750, plan) == pytest.approx(2.5005e-4, rel=1e-12)

    def test_step_multipliers_replace(self) -> None:
        plan = full_scale_plan()
        assert lr_at(39999, plan) == 5e-4
        assert lr_at(40000, plan) == 2.5e-4
        assert lr_at(60000, plan) == pytest.approx(1e-4)
        assert lr_at(79999, plan) == pytest.approx(5e-5)

    def test_continuous_at_warmup_end(self) -> None:
        plan = full_scale_plan()
        assert lr_at(1499, plan) == pytest.approx(lr_at(1500, plan), rel=1e-3)

    def test_no_warmup(self) -> None:
        assert lr_at(0, TrainPlan(max_iter=5, warmup_steps=0)) == 5e-4

    def test_negative_step(self) -> None:
        with pytest.raises(ConfigError):
            lr_at(-1, full_scale_plan())


class TestLayerDecay:
    def test_multipliers(self) -> None:
        assert layer_decay_multiplier(13, 12, 0.75) == 1.0
        assert layer_decay_multiplier(12, 12, 0.75) == 0.75
        assert layer_decay_multiplier(0, 12, 0.75) == pytest.approx(0.02376, abs=1e-5)

    @pytest.mark.parametrize("depth", [-1, 14])
    def test_out_of_range(self, depth: int) -> None:
        with pytest.raises(ConfigError):
            layer_decay_multiplier(depth, 12, 0.75)

    def test_parameter_depth(self) -> None:
        assert parameter_depth("backbone.patch_embed.weight", 4) == 0
        assert parameter_depth("backbone.pos_embed.reid", 4) == 0
        assert parameter_depth("backbone.blocks.3.mlp.fc1.weight", 4) == 3
        assert parameter_depth("projector.reid.gates", 4) == 5
        assert parameter_depth("head.reid.market.fc.weight", 4) == 5

    def test_effective_lr(self) -> None:
        plan = TrainPlan(max_iter=10, warmup_steps=0, warmup_lr=1.0, layer_decay_rate=0.5,
                         backbone_multiplier=0.1, pos_embed_multiplier=0.5)
        assert effective_lr("head.t.d.fc.weight", 0, plan, 2) == 1.0
        assert effective_lr("backbone.blocks.2.mlp.fc1.weight", 0, plan, 2) == pytest.approx(0.05)
        assert effective_lr("backbone.pos_embed", 0, plan, 2) == pytest.approx(0.125 * 0.1 * 0.5)

    def test_warmup_scaled_by_decay(self) -> None:
        plan = full_scale_plan()
        assert effective_lr("backbone.patch_embed.weight", 0, plan, 12) == pytest.approx(1e-7 * 0.75**13)


class TestWeightDecay:
    def test_rules(self) -> None:
        plan = TrainPlan(weight_decay=0.05)
        assert weight_decay_for("backbone.blocks.1.mlp.fc1.weight", plan) == 0.05
        assert weight_decay_for("projector.t.gates", plan) == 0.0
        assert weight_decay_for("head.t.d.fc.weight", plan, force_zero=True) == 0.0

    @pytest.mark.parametrize(
        "protocol, expected",
        [(Protocol.PRETRAIN, 0.05), (Protocol.FULL_FT, 0.05), (Protocol.HEAD_FT, 0.0), (Protocol.PARTIAL_FT, 0.0)],
    )
    def test_follows_freeze_mask(self, protocol: Protocol, expected: float) -> None:
        plan = TrainPlan(weight_decay=0.05)
        names = ["backbone.blocks.2.mlp.fc1.weight", "head.t.d.fc.weight"]
        mask = freeze_mask_for(names, protocol, depth=2, k=1)
        assert weight_decay_for(names[1], plan, mask.force_zero_weight_decay) == expected
