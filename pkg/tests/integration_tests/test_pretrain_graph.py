import numpy as np
import pytest

from src.graphs.pretrain_graph import run_pretrain
from src.models.enums import ShareType
from src.models.errors import DivergenceError
from src.networks.path_model import PathModel
from src.numerics.tensor import Tensor
from src.services.checkpoint_repository import Checkpoint, diff_checkpoints, load_checkpoint
from src.services.metrics_log import read_metrics
from src.services.run_analytics import get_run_events
from src.services.trainer import Trainer
from src.services.verification import tiny_experiment


def _as_checkpoint(entries) -> Checkpoint:
    return Checkpoint(seed=0, entries={name: np.asarray(v, dtype=np.float32) for name, v in entries.items()})


class TestPretrainGraph:
    def test_zero_iterations_saves_initialization(self, tmp_path) -> None:
        config = tiny_experiment(max_iter=0)
        result = run_pretrain(config, out_dir=tmp_path, seed=2, run_id="zero")
        assert result.steps == 0
        saved = load_checkpoint(result.checkpoint_path)
        initial = PathModel.from_config(config, seed=2).state_dict()
        assert diff_checkpoints(saved, _as_checkpoint(initial)) == []
        assert read_metrics(result.metrics_path) == []

    def test_artifacts_and_events(self, tmp_path, tiny_config) -> None:
        result = run_pretrain(tiny_config, out_dir=tmp_path, seed=1, run_id="tiny")
        rows = read_metrics(result.metrics_path)
        assert len(rows) == 3 * 5
        assert sorted(result.final_losses) == ["attr_0", "attr_1", "attr_2", "parse_0", "parse_1"]
        checkpoint = load_checkpoint(result.checkpoint_path)
        assert checkpoint.seed == 1
        assert checkpoint.metadata["steps"] == 3
        assert checkpoint.metadata["config"]["projector"]["share_type"] == "T"
        summary = get_run_events("tiny")
        assert summary["event_counts"]["run_started"] == 1
        assert summary["event_counts"]["run_finished"] == 1
        assert summary["last_step"] == 2
        assert result.trainer.sharing_violations() == []

    def test_same_seed_gives_identical_checkpoints(self, tmp_path) -> None:
        config = tiny_experiment(ShareType.SPECIFIC, max_iter=2)
        first = run_pretrain(config, out_dir=tmp_path / "a", seed=4, max_workers=1)
        second = run_pretrain(config, out_dir=tmp_path / "b", seed=4, max_workers=3)
        assert first.checkpoint_path.read_bytes() == second.checkpoint_path.read_bytes()

    def test_default_output_directory(self, isolated_data_dir) -> None:
        result = run_pretrain(tiny_experiment(max_iter=1), run_id="default-dir")
        assert result.checkpoint_path == isolated_data_dir / "runs" / "default-dir" / "checkpoint.ckpt"

    def test_divergence_keeps_last_checkpoint(self, tmp_path, tiny_config, monkeypatch) -> None:
        monkeypatch.setattr(PathModel, "loss", lambda self, *args, **kwargs: Tensor(np.array(np.nan)))
        with pytest.raises(DivergenceError):
            run_pretrain(tiny_config, out_dir=tmp_path, run_id="nan")
        assert (tmp_path / "checkpoint.ckpt").exists()
        assert get_run_events("nan")["diverged"] is True

    def test_divergence_saves_state_before_failing_round(self, tmp_path, tiny_config, monkeypatch) -> None:
        original_loss, original_steps = PathModel.loss, Trainer.local_steps
        round_start = {}

        def local_steps(self, step):
            round_start[step] = self.state_dict()
            return original_steps(self, step)

        def loss(self, dataset, images, labels):
            if dataset == "parse_1" and len(round_start) > 1:
                return Tensor(np.array(np.nan))
            return original_loss(self, dataset, images, labels)

        monkeypatch.setattr(Trainer, "local_steps", local_steps)
        monkeypatch.setattr(PathModel, "loss", loss)
        with pytest.raises(DivergenceError) as info:
            run_pretrain(tiny_config, out_dir=tmp_path, run_id="late-nan")
        assert info.value.step == 1
        saved = load_checkpoint(tmp_path / "checkpoint.ckpt")
        assert saved.metadata["steps"] == 1
        assert diff_checkpoints(saved, _as_checkpoint(round_start[1])) == []
