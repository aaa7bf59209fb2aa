from src.models.enums import Protocol, Scenario
from src.models.reports import (
    DatasetMetric,
    EvalReport,
    GradCheckEntry,
    GradCheckReport,
    SuiteResult,
    VerifyReport,
)
from src.models.train_state import TrainNode, get_initial_experiment_state, get_initial_state


class TestGradCheckReport:
    def test_passed_uses_worst_entry(self) -> None:
        report = GradCheckReport(
            entries=[
                GradCheckEntry(name="a", checked=3, max_abs_error=1e-9, rel_error=1e-6, analytic_max=1.0),
                GradCheckEntry(name="b", checked=3, max_abs_error=1e-2, rel_error=2e-3, analytic_max=1.0),
            ],
            tolerance=1e-3,
        )
        assert report.max_rel_error == 2e-3
        assert not report.passed
        assert report.entry("a").checked == 3

    def test_empty_report_passes(self) -> None:
        assert GradCheckReport().passed


class TestEvalReport:
    def test_values_grouped_by_dataset(self) -> None:
        report = EvalReport(
            scenario=Scenario.IN_DATASET,
            protocol=Protocol.HEAD_FT,
            seed=0,
            backbone_frozen=True,
            metrics=[
                DatasetMetric(dataset="a", family="parsing", metric="mIoU", value=0.5),
                DatasetMetric(dataset="a", family="parsing", metric="pACC", value=0.9),
                DatasetMetric(dataset="b", family="detection", metric="AP50", value=None),
            ],
        )
        assert report.datasets == ["a", "b"]
        assert report.values()["a"] == {"mIoU": 0.5, "pACC": 0.9}
        assert report.values()["b"]["AP50"] is None


class TestVerifyReport:
    def test_first_failure(self) -> None:
        report = VerifyReport(
            suites=[SuiteResult(name="x", passed=True), SuiteResult(name="y", passed=False, detail="boom")]
        )
        assert not report.passed
        assert report.first_failure.name == "y"


class TestGraphState:
    def test_initial_train_state(self) -> None:
        state = get_initial_state("run-1", 10)
        assert state["step"] == 0
        assert state["max_iter"] == 10
        assert state["history"] == []
        assert state["current_node"] is TrainNode.BEGIN

    def test_initial_experiment_state(self) -> None:
        state = get_initial_experiment_state("run-2", 7)
        assert state["seed"] == 7
        assert state["checkpoint_path"] is None
        assert state["reports"] == []
