"""Tests for module :mod:`~reflect_kit.harness`."""
import hashlib
import json
from dataclasses import replace
from pathlib import Path
from typing import Callable, Optional

import pytest
from reflect_kit._agent_loop import ConfigurationError, RunConfig
from reflect_kit._constitution import Category, load
from reflect_kit._harness import (
    DEFAULT_GRID,
    HarnessConfig,
    ReportError,
    ablate,
    build_reflector,
    calibrate,
    dataset_tasks,
    knockout_label,
    load_config,
    read_metrics,
    read_report_csv,
    report,
    report_files,
    resolve_config,
    run_experiment,
    write_metrics,
)
from reflect_kit._llm_client import (
    LlmClient,
    ScriptedBackend,
    cache,
    scripted,
)
from reflect_kit._prompts import Prompt
from reflect_kit._reflectors import NeuroSymbolicReflector, SymbolicReflector
from reflect_kit._tracing import RunMetrics, Tracer

STUCK = "think: I should look around."


def answer(prompt: Prompt, role: str) -> str:
    """Completion function that stalls and reflects one rule per category.

    :return: Model output for `role`.
    :rtype: str
    """
    if role == "action":
        return STUCK
    if "python list of dictionaries" in prompt.text:
        return "[{'mistake': 'Stalled', 'solution': 'Act on the goal'}]"
    return "['Balls only move with the robot.']"


def factory(
    function: Callable[[Prompt, str], str] = answer,
) -> Callable[[Optional[Tracer]], LlmClient]:
    """Generate an LLM factory answering with `function`.

    :return: Factory taking the run's tracer.
    :rtype: Callable[[Optional[Tracer]], LlmClient]
    """
    return lambda tracer: scripted(function, observer=tracer)


def small_config(tmp_path: Path, **overrides) -> HarnessConfig:
    """Generate a two-task gripper configuration writing to `tmp_path`.

    :return: Configuration.
    :rtype: HarnessConfig
    """
    run = RunConfig(turns_max=10, r_freq=5, s_freq=2)
    values = dict(run=run, env_kind="gripper", n=2, out_dir=str(tmp_path))
    values.update(overrides)
    return HarnessConfig(**values)


def digest(path: Path) -> str:
    """Hash a file's bytes.

    :return: SHA-256 hex digest.
    :rtype: str
    """
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestConfiguration:
    """Tests for :func:`~reflect_kit.harness.load_config`."""

    def test_toml(self, tmp_path: Path):
        """Test that every section of an experiment file is applied."""
        path = tmp_path / "experiment.toml"
        path.write_text(
            "[run]\nmode = 'reflexion'\nr_freq = 5\n"
            "categories = ['abstract', 'error']\n"
            "[env]\nkind = 'blocksworld'\nn = 3\n[env.params]\nblocks = 4\n"
            "[llm]\nmodel = 'local'\ntemperature = 0.2\n"
            "[llm.retry]\nmax_attempts = 2\n"
            "[output]\ncache = 'record'\nseeds = 2\n"
            "[ablation]\ngrid = [[5, 5], [10, 10]]\n",
            encoding="utf-8",
        )
        config = load_config(path)
        assert config.run.mode == "reflexion"
        assert config.run.categories == ("abstract", "error")
        assert config.run.llm.model == "local"
        assert config.run.llm.retry.max_attempts == 2
        assert config.env_kind == "blocksworld"
        assert dict(config.env_params) == {"blocks": 4}
        assert config.grid == ((5, 5), (10, 10))
        assert (config.cache, config.seeds) == ("record", 2)

    def test_overrides_win(self, tmp_path: Path):
        """Test that dotted overrides beat the file, ``None`` does not."""
        path = tmp_path / "experiment.toml"
        path.write_text("[run]\nr_freq = 5\ns_freq = 5\n", encoding="utf-8")
        config = load_config(path, {"run.r_freq": 20, "run.s_freq": None})
        assert (config.run.r_freq, config.run.s_freq) == (20, 5)

    def test_react_defaults_to_no_reflector(self):
        """Test that ReAct runs need no explicit reflector."""
        config = resolve_config({"run": {"mode": "react"}})
        assert config.run.reflector == "none"

    def test_endpoint_from_environment(self, monkeypatch):
        """Test that the endpoint falls back to the environment."""
        monkeypatch.setenv("REFLECT_KIT_ENDPOINT", "http://local:8000/v1")
        assert load_config().run.llm.endpoint == "http://local:8000/v1"

    @pytest.mark.parametrize(
        "document,field",
        [
            pytest.param({"run": {"speed": 1}}, "run.speed", id="run-key"),
            pytest.param({"env": {"size": 1}}, "env.size", id="env-key"),
            pytest.param({"extra": {}}, "extra", id="section"),
            pytest.param({"env": {"kind": "maze"}}, "env.kind", id="kind"),
            pytest.param(
                {"env": {"kind": "gripper", "task_types": ["sort"]}},
                "env.task_types",
                id="task-type",
            ),
            pytest.param({"env": {"n": 0}}, "env.n", id="n"),
            pytest.param(
                {"output": {"cache": "sometimes"}}, "output.cache", id="cache"
            ),
            pytest.param(
                {"ablation": {"grid": [[0, 5]]}}, "ablation.grid", id="grid"
            ),
            pytest.param(
                {"ablation": {"knockouts": [["habits"]]}},
                "ablation.knockouts",
                id="knockouts",
            ),
            pytest.param({"llm": {"top_p": 2.0}}, "llm", id="llm"),
            pytest.param({"run": {"r_freq": 0}}, "r_freq", id="r_freq"),
        ],
    )
    def test_invalid(self, document, field):
        """Test that the first invalid field is named."""
        with pytest.raises(ConfigurationError) as exc_info:
            resolve_config(document)
        assert exc_info.value.field == field

    def test_bad_toml(self, tmp_path: Path):
        """Test that unparseable files are configuration errors."""
        path = tmp_path / "broken.toml"
        path.write_text("[run\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_config(path)


class TestBuildingBlocks:
    """Tests of dataset and reflector construction."""

    def test_dataset_deterministic(self, tmp_path: Path):
        """Test that a seed fixes the dataset."""
        config = small_config(tmp_path, env_kind="gridworld", n=2)
        first = dataset_tasks(config, 4)
        assert first == dataset_tasks(config, 4)
        assert first != dataset_tasks(config, 5)
        assert len(first) == 2 * len(config.all_task_types)

    def test_reflectors(self, tmp_path: Path):
        """Test the reflector named by each configuration."""
        config = small_config(tmp_path)
        llm = scripted([])
        kinds = {
            kind: build_reflector(
                config, llm, replace(config.run, reflector=kind)
            )
            for kind in ("none", "symbolic", "neuro_symbolic")
        }
        assert kinds["none"] is None
        assert isinstance(kinds["symbolic"], SymbolicReflector)
        assert isinstance(kinds["neuro_symbolic"], NeuroSymbolicReflector)
        assert not kinds["neuro_symbolic"].exemplars.is_empty
        assert llm.total_calls == 0


class TestRunExperiment:
    """Tests for :func:`~reflect_kit.harness.run_experiment`."""

    def test_outputs(self, tmp_path: Path):
        """Test the files written by a self-sustaining run."""
        config = small_config(tmp_path)
        result = run_experiment(config, factory())
        (metrics,) = result.metrics
        name = "gripper-self_sustaining"
        assert metrics.label == name
        assert result.mean_sr == metrics.sr == 0.0
        stored = read_metrics(tmp_path / f"{name}.metrics.json")
        assert stored.llm_calls == metrics.llm_calls
        assert len(stored.tasks) == 2
        constitution = load(tmp_path / f"{name}.constitution.json")
        assert constitution.rules_in(Category.ABSTRACT)
        assert not constitution.rules_in(Category.PROGRESS)
        lines = (tmp_path / f"{name}.trace.jsonl").read_text().splitlines()
        events = [json.loads(line)["event"] for line in lines]
        assert events.count("llm_call") == metrics.total_calls
        assert events.count("summarization") == 1

    def test_seeds(self, tmp_path: Path):
        """Test that every derived seed writes its own metrics."""
        config = small_config(tmp_path, seeds=2, n=1)
        result = run_experiment(config, factory())
        assert len(result.metrics) == 2
        assert len(set(m.label for m in result.metrics)) == 2
        assert len(list(tmp_path.glob("*.metrics.json"))) == 2

    def test_replay_identical(self, tmp_path: Path):
        """Test that a replayed run writes a byte-identical trace."""
        cache_path = tmp_path / "cache.jsonl"
        recorded = small_config(tmp_path / "recorded")
        replayed = small_config(tmp_path / "replayed")
        run_experiment(
            recorded,
            lambda tracer: cache(
                ScriptedBackend(answer), cache_path, observer=tracer
            ),
        )
        first = run_experiment(
            replayed,
            lambda tracer: cache(
                None, cache_path, mode="replay", observer=tracer
            ),
        )
        name = "gripper-self_sustaining.trace.jsonl"
        assert digest(tmp_path / "recorded" / name) == digest(
            tmp_path / "replayed" / name
        )
        assert first.metrics[0].total_calls > 0

    def test_cooperative_frozen(self, tmp_path: Path):
        """Test that co-operative runs read but never touch the file."""
        config = small_config(tmp_path, n=1)
        (path,) = calibrate(config, llm_factory=factory())
        before = digest(path)
        run = replace(config.run, mode="cooperative", reflector="none")
        cooperative = replace(config, run=run, constitution=str(path))
        (metrics,) = run_experiment(cooperative, factory()).metrics
        assert digest(path) == before
        assert metrics.llm_calls["reflection"] == 0
        assert metrics.llm_calls["summarization"] == 0

    def test_cooperative_needs_constitution(self, tmp_path: Path):
        """Test that co-operative runs without a file are rejected."""
        run = replace(RunConfig(), mode="cooperative", reflector="none")
        config = small_config(tmp_path, run=run)
        with pytest.raises(ConfigurationError, match="constitution"):
            run_experiment(config, factory())

    def test_calibration_factors(self, tmp_path: Path):
        """Test one meta-advisor file per calibration factor."""
        config = small_config(tmp_path)
        paths = calibrate(config, [1, 2], factory())
        assert [path.name for path in paths] == [
            "gripper-meta-advisor-f1.json",
            "gripper-meta-advisor-f2.json",
        ]
        for path in paths:
            assert not load(path).rules_in(Category.PROGRESS)


class TestAblate:
    """Tests for :func:`~reflect_kit.harness.ablate`."""

    def test_default_grid(self, tmp_path: Path):
        """Test that the default cadence grid yields six rows."""
        config = small_config(tmp_path, n=1)
        result = ablate(config, factory())
        assert [cell for cell, _ in result.grid] == list(DEFAULT_GRID)
        rows = result.grid_table.splitlines()[2:]
        assert len(rows) == 6
        assert rows[0].startswith("| (5, 5) |")
        assert result.knockouts == []

    def test_full_knockout_is_react(self, tmp_path: Path):
        """Test that suppressing every category costs what ReAct costs."""
        config = small_config(
            tmp_path, n=1, knockouts=(("abstract", "error", "progress"),)
        )
        result = ablate(config, factory())
        ((_, knocked_out),) = result.knockouts
        run = replace(config.run, mode="react", reflector="none")
        react = run_experiment(replace(config, run=run), factory())
        assert knocked_out.llm_calls == react.metrics[0].llm_calls
        assert "w/o abstract + error + progress" in result.knockout_table
        assert result.grid == []

    @pytest.mark.parametrize(
        "knockout,label",
        [
            pytest.param((), "all", id="none"),
            pytest.param(("progress",), "w/o progress", id="progress"),
            pytest.param(
                ("progress", "abstract"),
                "w/o abstract + progress",
                id="ordered",
            ),
        ],
    )
    def test_knockout_label(self, knockout, label):
        """Test knockout row names."""
        assert knockout_label(knockout) == label


class TestReport:
    """Tests for :func:`~reflect_kit.harness.report`."""

    def test_csv_round_trip(self, tmp_path: Path):
        """Test that the CSV table parses back into the same rows."""
        runs = []
        for label, sr in (("react", 20.0), ("neural", 55.5)):
            metrics = RunMetrics(sr, 31.25, {"action": 90, "reflection": 12})
            metrics.label = label
            runs.append(metrics)
        table = report(runs)
        path = tmp_path / "table.csv"
        path.write_text(table.csv, encoding="utf-8")
        assert read_report_csv(path) == table.rows
        assert [row.total_calls for row in table.rows] == [102, 102]
        assert table.markdown.count("\n") == 4

    def test_report_files(self, tmp_path: Path):
        """Test reporting over metrics files in the given order."""
        paths = []
        for label in ("b", "a"):
            metrics = RunMetrics(10.0, 5.0, {"action": 5})
            metrics.label = label
            path = tmp_path / f"{label}.metrics.json"
            write_metrics(metrics, path)
            paths.append(path)
        assert [row.label for row in report_files(paths).rows] == ["b", "a"]

    def test_schema_mismatch(self, tmp_path: Path):
        """Test that foreign metrics files are refused."""
        path = tmp_path / "old.metrics.json"
        document = RunMetrics(1.0, 1.0, {}).to_document()
        document["schema_version"] = 0
        path.write_text(json.dumps(document), encoding="utf-8")
        with pytest.raises(ReportError, match="schema version"):
            report_files([path])

    def test_not_json(self, tmp_path: Path):
        """Test that unreadable files are refused."""
        path = tmp_path / "notes.txt"
        path.write_text("SR was fine", encoding="utf-8")
        with pytest.raises(ReportError):
            read_metrics(path)

    def test_bad_header(self, tmp_path: Path):
        """Test that CSV files of another layout are refused."""
        path = tmp_path / "table.csv"
        path.write_text("name,score\nx,1\n", encoding="utf-8")
        with pytest.raises(ReportError, match="header"):
            read_report_csv(path)

    def test_empty(self):
        """Test that there is nothing to report on no runs."""
        with pytest.raises(ValueError):
            report([])
