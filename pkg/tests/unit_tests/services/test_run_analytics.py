import json
import os

from src.services import run_analytics
from src.services.run_analytics import (
    get_run_events,
    track_divergence,
    track_evaluation,
    track_run_event,
    track_run_finished,
    track_run_started,
    track_step_summary,
)


class TestTrackRunEvent:
    def test_appends_events(self, isolated_data_dir) -> None:
        assert track_run_event("run-1", "custom", {"value": 1})
        assert track_run_event("run-1", "custom", {"value": 2})
        with open(isolated_data_dir / "analytics" / "run-1_events.json", encoding="utf-8") as f:
            events = json.load(f)
        assert [event["data"]["value"] for event in events] == [1, 2]
        assert all(event["run_id"] == "run-1" for event in events)

    def test_directory_follows_data_dir(self, isolated_data_dir) -> None:
        assert run_analytics.analytics_dir() == os.path.join(str(isolated_data_dir), "analytics")

    def test_failure_returns_false(self, isolated_data_dir) -> None:
        os.makedirs(isolated_data_dir, exist_ok=True)
        (isolated_data_dir / "analytics").write_text("no es un directorio", encoding="utf-8")
        assert track_run_event("run-2", "custom", {}) is False

    def test_corrupt_file_is_replaced(self, isolated_data_dir) -> None:
        os.makedirs(isolated_data_dir / "analytics")
        (isolated_data_dir / "analytics" / "run-3_events.json").write_text("{}", encoding="utf-8")
        assert track_run_event("run-3", "custom", {})
        assert get_run_events("run-3")["total_events"] == 1


class TestRunSummary:
    def test_summary_counts_events(self) -> None:
        track_run_started("run-4", seed=1, datasets=["attr_0"], max_iter=2)
        track_step_summary("run-4", 0, {"attr_0": 1.5}, lr=0.01)
        track_step_summary("run-4", 1, {"attr_0": 1.2}, lr=0.01)
        track_run_finished("run-4", "run-4.ckpt", {"attr_0": 1.2})
        track_evaluation("run-4", {"scenario": "in"})
        summary = get_run_events("run-4")
        assert summary["total_events"] == 5
        assert summary["event_counts"]["step_summary"] == 2
        assert summary["last_step"] == 1
        assert summary["diverged"] is False

    def test_divergence_is_flagged(self) -> None:
        track_divergence("run-5", 3, "parse_0", float("nan"))
        summary = get_run_events("run-5")
        assert summary["diverged"] is True
        assert summary["events"][0]["data"]["value"] == "nan"

    def test_unknown_run(self) -> None:
        assert get_run_events("missing") is None
