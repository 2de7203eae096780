"""Tests for module :mod:`~reflect_kit.agent_loop`."""
import re
from typing import Callable, List

import pytest
from reflect_kit._agent_loop import (
    ConfigurationError,
    RunConfig,
    assemble_action_prompt,
    calibrate_meta_advisor,
    critique,
    demonstrations,
    extract_action,
    run_cooperative,
    run_dataset,
    run_react,
    run_reflexion,
    run_task,
)
from reflect_kit._assembly import oracle_plan
from reflect_kit._constitution import (
    Category,
    Constitution,
    ErrorRecord,
    ReflectionBatch,
    Source,
    add_rules,
)
from reflect_kit._environment import (
    TaskSpec,
    generate_tasks,
    make_environment,
)
from reflect_kit._llm_client import (
    ROLES,
    LlmClient,
    LlmTransportError,
    scripted,
)
from reflect_kit._prompts import MEMORY_HEADER, Prompt
from reflect_kit._reflectors import (
    NeuralReflector,
    SymbolicReflector,
    load_rulebook,
)
from reflect_kit._tracing import Tracer
from reflect_kit._trajectory import Trajectory
from reflect_kit._utilities import success_rate

STUCK = "think: I am not sure what to do."
_CUE = re.compile(r"Action (\d+):$")


def stalling_client() -> LlmClient:
    """Generate a client that never makes progress and reflects nothing.

    :return: Client answering thoughts to action prompts and empty lists
        otherwise.
    :rtype: LlmClient
    """
    return scripted(lambda prompt, role: STUCK if role == "action" else "[]")


def plan_follower(task: TaskSpec, marker: str) -> Callable[[Prompt, str], str]:
    """Generate a completion function playing the oracle plan of `task`.

    The plan is only followed while `marker` appears in the prompt.

    :param task: Task whose plan is played.
    :type task: TaskSpec
    :param marker: Text gating the plan.
    :type marker: str
    :return: Completion function.
    :rtype: Callable[[Prompt, str], str]
    """
    plan = oracle_plan(task)

    def complete(prompt: Prompt, role: str) -> str:
        if role != "action":
            return "[]"
        if marker not in prompt.user:
            return STUCK
        turn = int(_CUE.search(prompt.user).group(1))
        return plan[turn - 1] if turn <= len(plan) else STUCK

    return complete


def gripper_tasks(n: int, seed: int = 0) -> List[TaskSpec]:
    """Generate gripper transport tasks.

    :return: Generated tasks.
    :rtype: List[TaskSpec]
    """
    return generate_tasks("gripper", "transport", n, seed)


def seeded_constitution(solution: str) -> Constitution:
    """Generate a constitution holding a single error rule.

    :return: Constitution of the gripper kind.
    :rtype: Constitution
    """
    batch = ReflectionBatch(
        error=[ErrorRecord("Wandered without a plan", solution)]
    )
    return add_rules(
        Constitution("gripper"), batch, (0, 0), Source.META_ADVISOR
    )


class TestRunConfig:
    """Tests for :class:`~reflect_kit.agent_loop.RunConfig`."""

    def test_defaults(self):
        """Test the default cadence and caps."""
        config = RunConfig()
        assert (config.r_freq, config.s_freq) == (10, 10)
        assert (config.turns_max, config.reflexion_trials) == (50, 15)
        assert config.enabled == frozenset(Category)

    @pytest.mark.parametrize(
        "overrides,field",
        [
            pytest.param({"mode": "solo"}, "mode", id="mode"),
            pytest.param({"reflector": "oracle"}, "reflector", id="reflector"),
            pytest.param(
                {"mode": "react", "reflector": "neural"},
                "reflector",
                id="react-with-reflector",
            ),
            pytest.param({"r_freq": 0}, "r_freq", id="r_freq"),
            pytest.param({"s_freq": -1}, "s_freq", id="s_freq"),
            pytest.param({"turns_max": 0}, "turns_max", id="turns_max"),
            pytest.param({"trials": 0}, "trials", id="trials"),
            pytest.param(
                {"symbolic_trigger": "sometimes"},
                "symbolic_trigger",
                id="trigger",
            ),
            pytest.param(
                {"categories": ("abstract", "habits")},
                "categories",
                id="categories",
            ),
        ],
    )
    def test_invalid(self, overrides, field):
        """Test that the offending field is named."""
        with pytest.raises(ConfigurationError) as exc_info:
            RunConfig(**overrides)
        assert exc_info.value.field == field


class TestExtractAction:
    """Tests for :func:`~reflect_kit.agent_loop.extract_action`."""

    @pytest.mark.parametrize(
        "text,expected",
        [
            pytest.param("move rooma roomb", "move rooma roomb", id="plain"),
            pytest.param("> pickup b1", "pickup b1", id="prompt-marker"),
            pytest.param(
                "Action 12: stack b1 b2\nObservation 12: ...",
                "stack b1 b2",
                id="labelled",
            ),
            pytest.param(
                "\n\n  action: go to the red ball",
                "go to the red ball",
                id="blank-lines",
            ),
            pytest.param("   ", "", id="blank"),
        ],
    )
    def test_extract(self, text, expected):
        """Test that the first action line is kept without labels."""
        assert extract_action(text) == expected


class TestAssembleActionPrompt:
    """Tests for :func:`~reflect_kit.agent_loop.assemble_action_prompt`."""

    def test_section_order(self):
        """Test that prompt sections appear in a fixed order."""
        trajectory = Trajectory("You are in rooma.")
        trajectory.append("move rooma roomb", "You move from rooma to roomb.")
        prompt = assemble_action_prompt(
            "Actions: move, pick, drop.",
            "put ball1 in roomb",
            "RULES",
            ["EXAMPLE"],
            trajectory,
            guidance="GUIDANCE",
            memory=["MEMORY"],
        )
        assert prompt.system == "Actions: move, pick, drop.\n\nGUIDANCE"
        positions = [
            prompt.user.index(part)
            for part in (
                "RULES",
                "EXAMPLE",
                MEMORY_HEADER,
                "Your task is to: put ball1 in roomb",
                "Action 1: move rooma roomb",
            )
        ]
        assert positions == sorted(positions)
        assert prompt.user.endswith("Action 2:")

    def test_empty_parts(self):
        """Test that empty parts leave no blank sections."""
        prompt = assemble_action_prompt("", "g", "", (), Trajectory())
        assert prompt.system == ""
        assert prompt.user == "Your task is to: g\n\nAction 1:"


class TestRunTask:
    """Tests for :func:`~reflect_kit.agent_loop.run_task`."""

    def test_turn_cap(self):
        """Test that an unsolved task stops at the turn cap."""
        (task,) = gripper_tasks(1)
        llm = stalling_client()
        outcome = run_task(
            task,
            Constitution("gripper"),
            RunConfig(turns_max=7),
            make_environment("gripper"),
            llm,
        )
        assert outcome.reward == 0
        assert outcome.trajectory.turn == 7
        assert llm.calls["action"] == 7

    def test_constitution_reaches_prompt(self):
        """Test that a seeded error rule changes the agent's behaviour."""
        solution = "Follow the shortest plan to the goal"
        with_rule = seeded_constitution(solution)
        rewards, baseline = [], []
        for task in gripper_tasks(5, seed=3):
            for constitution, sink in (
                (with_rule, rewards),
                (Constitution("gripper"), baseline),
            ):
                outcome = run_task(
                    task,
                    constitution,
                    RunConfig(),
                    make_environment("gripper"),
                    plan_follower(task, solution),
                )
                sink.append(outcome.reward)
        assert success_rate(rewards) == 100.0
        assert success_rate(baseline) == 0.0

    def test_category_excluded_from_prompt(self):
        """Test that disabled categories are never rendered."""
        solution = "Follow the shortest plan to the goal"
        (task,) = gripper_tasks(1, seed=3)
        outcome = run_task(
            task,
            seeded_constitution(solution),
            RunConfig(categories=("abstract", "progress")),
            make_environment("gripper"),
            plan_follower(task, solution),
        )
        assert outcome.reward == 0

    def test_reflection_cadence(self):
        """Test that reflection runs on cadence turns below the cap."""
        (task,) = gripper_tasks(1)
        llm = stalling_client()
        tracer = Tracer()
        run_task(
            task,
            Constitution("gripper"),
            RunConfig(r_freq=10, turns_max=50),
            make_environment("gripper"),
            llm,
            NeuralReflector(llm),
            tracer=tracer,
        )
        turns = [
            event["turn"]
            for event in tracer.events
            if event["event"] == "reflection"
        ]
        assert turns == [10, 20, 30, 40]
        assert llm.calls["reflection"] == 12

    def test_reflect_at_turn_zero(self):
        """Test the optional reflection right after the first step."""
        (task,) = gripper_tasks(1)
        llm = stalling_client()
        run_task(
            task,
            Constitution("gripper"),
            RunConfig(r_freq=10, turns_max=5, reflect_at_turn_zero=True),
            make_environment("gripper"),
            llm,
            NeuralReflector(llm),
        )
        assert llm.calls["reflection"] == 3

    def test_progress_cleared(self):
        """Test that progress rules never outlive their task."""
        (task,) = gripper_tasks(1)
        llm = scripted(
            lambda prompt, role: STUCK
            if role == "action"
            else "['Reached the first room.']"
        )
        outcome = run_task(
            task,
            Constitution("gripper"),
            RunConfig(r_freq=5, turns_max=10),
            make_environment("gripper"),
            llm,
            NeuralReflector(llm),
        )
        assert not outcome.constitution.rules_in(Category.PROGRESS)
        assert outcome.constitution.rules_in(Category.ABSTRACT)

    def test_trace_events(self):
        """Test the event sequence of a short task."""
        (task,) = gripper_tasks(1)
        tracer = Tracer(dump_state=True)
        run_task(
            task,
            Constitution("gripper"),
            RunConfig(turns_max=2),
            make_environment("gripper"),
            stalling_client(),
            tracer=tracer,
        )
        kinds = [event["event"] for event in tracer.events]
        assert kinds == [
            "task_start",
            "turn_start",
            "env_step",
            "turn_start",
            "env_step",
            "task_end",
        ]
        assert "state" in tracer.events[2]


class TestRunDataset:
    """Tests for :func:`~reflect_kit.agent_loop.run_dataset`."""

    def test_call_schedule(self):
        """Test the exact call count of a default neural run."""
        llm = stalling_client()
        outcome = run_dataset(
            gripper_tasks(20),
            RunConfig(r_freq=10, s_freq=10, turns_max=50),
            None,
            llm,
            NeuralReflector(llm),
        )
        assert outcome.metrics.llm_calls == {
            "action": 1000,
            "reflection": 240,
            "summarization": 4,
            "critique": 0,
        }
        assert outcome.metrics.total_calls == 1244
        assert outcome.sr == 0.0

    def test_calls_per_task(self):
        """Test the per-task call budget of the default configuration."""
        llm = stalling_client()
        outcome = run_dataset(
            gripper_tasks(10), RunConfig(), None, llm, NeuralReflector(llm)
        )
        per_task = [sum(task.calls.values()) for task in outcome.metrics.tasks]
        assert max(per_task) <= 80
        assert per_task[0] == 62

    def test_totals_match_tasks(self):
        """Test that run totals are the sums over the task records."""
        llm = stalling_client()
        outcome = run_dataset(
            gripper_tasks(4),
            RunConfig(r_freq=10, s_freq=2, turns_max=50),
            None,
            llm,
            NeuralReflector(llm),
        )
        tasks = outcome.metrics.tasks
        assert [task.calls["summarization"] for task in tasks] == [0, 2, 0, 2]
        assert outcome.metrics.llm_calls == llm.calls
        for role in ROLES:
            assert outcome.metrics.llm_calls[role] == sum(
                task.calls[role] for task in tasks
            )
        assert outcome.metrics.avg_turns == 50.0

    def test_symbolic_no_reflection_calls(self):
        """Test that the symbolic reflector never calls the model."""
        llm = stalling_client()
        reflector = SymbolicReflector(load_rulebook(env_kind="gripper"))
        outcome = run_dataset(
            gripper_tasks(3), RunConfig(turns_max=20), None, llm, reflector
        )
        assert outcome.metrics.llm_calls["reflection"] == 0
        assert outcome.metrics.llm_calls["action"] == 60

    def test_constitution_sizes(self):
        """Test that rule counts are recorded after every task."""
        llm = scripted(
            lambda prompt, role: STUCK
            if role == "action"
            else "['Balls stay where they are dropped.']"
        )
        outcome = run_dataset(
            gripper_tasks(3),
            RunConfig(r_freq=5, turns_max=6, s_freq=100),
            None,
            llm,
            NeuralReflector(llm, [Category.ABSTRACT]),
        )
        sizes = outcome.metrics.constitution_sizes
        assert [size["abstract"] for size in sizes] == [1, 1, 1]

    def test_parse_failures_counted(self):
        """Test that unparseable reflections are counted, not raised."""
        llm = scripted(
            lambda prompt, role: STUCK if role == "action" else "no idea"
        )
        with pytest.warns(Warning):
            outcome = run_dataset(
                gripper_tasks(1),
                RunConfig(r_freq=5, turns_max=10, s_freq=100),
                None,
                llm,
                NeuralReflector(llm),
            )
        assert outcome.metrics.parse_warning_count == 3
        assert outcome.metrics.tasks[0].parse_failures == 3

    def test_summarization_failures_counted(self):
        """Test that failed summaries are charged to the task they follow."""
        llm = scripted(
            lambda prompt, role: {
                "action": STUCK,
                "summarization": "no idea",
            }.get(role, "[]")
        )
        with pytest.warns(Warning):
            outcome = run_dataset(
                gripper_tasks(2),
                RunConfig(s_freq=2, turns_max=10),
                None,
                llm,
                NeuralReflector(llm),
            )
        first, second = outcome.metrics.tasks
        assert first.summarization_failures == 0
        assert second.summarization_failures == 2
        assert outcome.metrics.summarization_failures == 2

    def test_transport_failure_isolated(self):
        """Test that a failing endpoint costs the task, not the run."""
        failures = iter([True])

        def complete(prompt: Prompt, role: str) -> str:
            if next(failures, False):
                raise LlmTransportError(503, role)
            return STUCK

        outcome = run_dataset(
            gripper_tasks(2), RunConfig(turns_max=3), None, scripted(complete)
        )
        first, second = outcome.metrics.tasks
        assert first.error is not None and "503" in first.error
        assert second.error is None
        assert second.turns == 3

    def test_retried_trials(self):
        """Test that failing tasks are retried up to the trial cap."""
        llm = stalling_client()
        outcome = run_dataset(
            gripper_tasks(1), RunConfig(turns_max=4, trials=3), None, llm
        )
        assert outcome.metrics.tasks[0].trials == 3
        assert llm.calls["action"] == 12

    @pytest.mark.parametrize(
        "tasks,llm",
        [
            pytest.param([], stalling_client(), id="no-tasks"),
            pytest.param(gripper_tasks(1), None, id="no-llm"),
        ],
    )
    def test_invalid(self, tasks, llm):
        """Test that runs without tasks or model are rejected."""
        with pytest.raises(ValueError):
            run_dataset(tasks, RunConfig(), None, llm)


class TestBaselines:
    """Tests of the ReAct, co-operative and Reflexion loops."""

    def test_react(self):
        """Test that ReAct only issues action calls."""
        llm = stalling_client()
        config = RunConfig(mode="react", reflector="none")
        evaluation = run_react(gripper_tasks(2), config, None, llm)
        assert evaluation.metrics.llm_calls["action"] == 100
        assert evaluation.metrics.total_calls == 100

    def test_cooperative_frozen(self):
        """Test that the frozen constitution is used but never changed."""
        solution = "Follow the shortest plan to the goal"
        frozen = seeded_constitution(solution)
        tasks = gripper_tasks(3, seed=3)
        for task in tasks:
            llm = scripted(plan_follower(task, solution))
            evaluation = run_cooperative(
                [task], frozen, RunConfig(mode="cooperative"), None, llm
            )
            assert evaluation.sr == 100.0
            assert llm.calls["reflection"] == 0
            assert llm.calls["summarization"] == 0
        assert frozen.version == seeded_constitution(solution).version

    def test_cooperative_rejects_progress(self):
        """Test that frozen constitutions may not hold progress rules."""
        frozen = add_rules(
            Constitution("gripper"),
            ReflectionBatch(progress=["Picked up ball1."]),
            (0, 1),
            Source.NEURAL,
        )
        with pytest.raises(ValueError, match="progress"):
            run_cooperative(
                gripper_tasks(1), frozen, RunConfig(), None, stalling_client()
            )

    def test_reflexion_call_budget(self):
        """Test the call count of a task failing every trial."""
        llm = stalling_client()
        evaluation = run_reflexion(
            gripper_tasks(1),
            RunConfig(mode="reflexion", reflexion_trials=15, turns_max=50),
            None,
            llm,
            NeuralReflector(llm),
        )
        (record,) = evaluation.metrics.tasks
        assert sum(record.calls.values()) == 764
        assert record.calls["critique"] == 14
        assert record.trials == 15

    def test_reflexion_memory(self):
        """Test that critiques of earlier trials reach the action prompt."""
        prompts: List[Prompt] = []

        def complete(prompt: Prompt, role: str) -> str:
            prompts.append(prompt)
            if role == "critique":
                return "[{'mistake': 'Stalled', 'solution': 'Move'}]"
            return STUCK

        run_reflexion(
            gripper_tasks(1),
            RunConfig(mode="reflexion", reflexion_trials=2, turns_max=2),
            None,
            scripted(complete),
        )
        assert MEMORY_HEADER not in prompts[0].user
        assert "Trial 1: mistake: Stalled; solution: Move" in prompts[-1].user

    def test_symbolic_critique(self):
        """Test that symbolic critiques need no model call."""
        (task,) = gripper_tasks(1)
        llm = stalling_client()
        env = make_environment("gripper")
        observation, _ = env.reset(task)
        trajectory = Trajectory(observation)
        for _ in range(3):
            result = env.step("drop ball9 roomz left")
            trajectory.append("drop ball9 roomz left", result.observation)
        reflector = SymbolicReflector(load_rulebook(env_kind="gripper"))
        reflector.start_task(task)
        text = critique(task, trajectory, llm, reflector)
        assert llm.total_calls == 0
        assert "mistake:" in text


class TestCalibration:
    """Tests of meta-advisor calibration and worked examples."""

    def test_calibrate(self):
        """Test that calibration keeps only long-term rules."""

        def complete(prompt: Prompt, role: str) -> str:
            if role == "action":
                return STUCK
            return "['Balls can only be moved by the robot.']"

        llm = scripted(complete)
        constitution = calibrate_meta_advisor(
            "gripper",
            ["transport"],
            2,
            RunConfig(turns_max=10, r_freq=5),
            llm,
            NeuralReflector(llm),
        )
        assert not constitution.rules_in(Category.PROGRESS)
        assert constitution.rules_in(Category.ABSTRACT)
        assert {rule.source for rule in constitution.rules} == {
            Source.META_ADVISOR
        }

    def test_calibration_factor(self):
        """Test that at least one calibration task is required."""
        with pytest.raises(ValueError, match="calibration_factor"):
            calibrate_meta_advisor(
                "gripper",
                ["transport"],
                0,
                RunConfig(),
                stalling_client(),
                NeuralReflector(stalling_client()),
            )

    def test_demonstrations(self):
        """Test that worked examples replay the oracle plan."""
        examples = demonstrations("blocksworld", ["stack"], 2, seed=1)
        assert list(examples) == ["stack"]
        assert len(examples["stack"]) == 2
        for example in examples["stack"]:
            assert example.startswith("Your task is to:")
            assert "Action 1:" in example
