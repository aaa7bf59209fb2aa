from src.services.metrics_log import FIELDS, MetricsLog, read_metrics


class TestMetricsLog:
    def test_header_and_rows(self, tmp_path) -> None:
        log = MetricsLog(tmp_path / "out" / "metrics.csv")
        log.append(0, {"parse_0": 2.5, "attr_0": 0.75}, lr=0.01)
        lines = (tmp_path / "out" / "metrics.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(FIELDS)
        assert lines[1].startswith("0,attr_0,")

    def test_read_typed_rows(self, tmp_path) -> None:
        path = tmp_path / "metrics.csv"
        log = MetricsLog(path)
        log.append(0, {"attr_0": 0.1}, lr=1e-4)
        log.append(1, {"attr_0": 0.2}, lr=2e-4)
        rows = read_metrics(path)
        assert rows == [
            {"step": 0, "dataset": "attr_0", "loss": 0.1, "lr": 1e-4},
            {"step": 1, "dataset": "attr_0", "loss": 0.2, "lr": 2e-4},
        ]

    def test_reopening_appends(self, tmp_path) -> None:
        path = tmp_path / "metrics.csv"
        MetricsLog(path).append(0, {"a": 1.0}, lr=0.5)
        MetricsLog(path).append(1, {"a": 2.0}, lr=0.5)
        assert [row["step"] for row in read_metrics(path)] == [0, 1]
