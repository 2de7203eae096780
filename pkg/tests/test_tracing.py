"""Tests for module :mod:`~reflect_kit._tracing`."""
import json
from pathlib import Path

import pytest
from reflect_kit._tracing import RunMetrics, TaskRecord, Tracer


class TestTracer:
    """Tests for :class:`~reflect_kit._tracing.Tracer`."""

    def test_file(self, tmp_path: Path):
        """Test that events are written as sorted JSON lines."""
        path = tmp_path / "runs" / "trace.jsonl"
        with Tracer(path) as tracer:
            tracer.emit("task_start", task_id="t1", goal="stack b1 on b2")
            tracer.emit("task_end", task_id="t1", reward=1, turns=2)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == (
            '{"event": "task_start", "goal": "stack b1 on b2", '
            '"seq": 0, "task_id": "t1"}'
        )
        assert json.loads(lines[1])["seq"] == 1
        assert tracer.counts == {"task_start": 1, "task_end": 1}

    def test_unknown_event(self):
        """Test that only known event types are traced."""
        with pytest.raises(ValueError, match="unknown event"):
            Tracer().emit("heartbeat")


class TestRunMetrics:
    """Tests for :class:`~reflect_kit._tracing.RunMetrics`."""

    def test_document(self):
        """Test that task records survive the document form."""
        metrics = RunMetrics(
            50.0,
            3.5,
            {"action": 7, "critique": 1},
            tasks=[
                TaskRecord("a", "restack", 1, 2),
                TaskRecord("b", "restack", 0, 5, error="status=503"),
            ],
        )
        document = json.loads(json.dumps(metrics.to_document()))
        assert RunMetrics.from_document(document) == metrics
        assert metrics.total_calls == 8
