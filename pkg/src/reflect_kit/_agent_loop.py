"""Agent loop: self-sustaining, co-operative, ReAct and Reflexion modes."""
import logging
import re
from dataclasses import asdict, dataclass, field, replace
from typing import (
    Any,
    Callable,
    Dict,
    FrozenSet,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
)

from reflect_kit._constitution import (
    LONG_TERM,
    Category,
    Constitution,
    ReflectionBatch,
    Source,
    add_rules,
    clear_progress,
    render,
    restrict,
    rule_counts,
    summarize,
)
from reflect_kit._environment import (
    TaskSpec,
    TextWorld,
    generate_tasks,
    make_environment,
)
from reflect_kit._llm_client import ROLES, LlmSettings, LlmTransportError
from reflect_kit._parsing import parse_record_output
from reflect_kit._prompts import (
    Prompt,
    build_reflection_prompt,
    family_of,
    few_shot_block,
    goal_block,
    memory_block,
)
from reflect_kit._reflectors import (
    Reflector,
    SymbolicReflector,
    exploration_reflect,
)
from reflect_kit._tracing import RunMetrics, TaskRecord, Tracer
from reflect_kit._trajectory import Trajectory
from reflect_kit._utilities import (
    expand_seeds,
    fold_records,
    is_due,
)

_logger = logging.getLogger(__name__)

MODES = ("self_sustaining", "cooperative", "react", "reflexion")
REFLECTOR_KINDS = ("neural", "symbolic", "neuro_symbolic", "none")
TRIGGERS = ("periodic", "conditional")
_ACTION_PREFIX = re.compile(r"^(?:>\s*|action(?:\s+\d+)?\s*:\s*)", re.I)

Completion = Callable[[Prompt, str], str]
EnvFactory = Callable[[TaskSpec], "TextWorld[Any]"]


class ConfigurationError(ValueError):
    """A run configuration field holds an invalid value."""

    def __init__(self, field_name: str, message: str) -> None:
        self.field = field_name
        super().__init__(f"Invalid `{field_name}`: {message}")


@dataclass(frozen=True)
class RunConfig:
    """Settings of one run.

    Parameters
    ----------
    mode : str, optional
        One of :data:`MODES`.
    reflector : str, optional
        One of :data:`REFLECTOR_KINDS`; ReAct runs need ``"none"``. In
        Reflexion mode it only selects how trial critiques are produced.
    r_freq : int, optional
        Reflection cadence in turns.
    s_freq : int, optional
        Summarization cadence in tasks.
    turns_max : int, optional
        Turn cap per trial.
    reflexion_trials : int, optional
        Trial cap per task in Reflexion mode.
    calibration_factor : int, optional
        Calibration tasks per task type of the meta-advisor.
    reflect_at_turn_zero : bool, optional
        Also reflect right after the first step.
    seed : int, optional
        Run seed, task seeds are derived from it.
    trials : int, optional
        Trials per task in self-sustaining mode.
    symbolic_trigger : str, optional
        ``"periodic"`` follows `r_freq`, ``"conditional"`` reflects when the
        symbolic reflector sees new progress or a new error.
    categories : tuple of str, optional
        Enabled rule categories; the others are never prompted nor
        rendered.
    llm : LlmSettings, optional
        Model settings recorded with the run.
    """

    mode: str = "self_sustaining"
    reflector: str = "neural"
    r_freq: int = 10
    s_freq: int = 10
    turns_max: int = 50
    reflexion_trials: int = 15
    calibration_factor: int = 1
    reflect_at_turn_zero: bool = False
    seed: int = 0
    trials: int = 1
    symbolic_trigger: str = "periodic"
    categories: Tuple[str, ...] = ("abstract", "error", "progress")
    llm: LlmSettings = field(default_factory=LlmSettings)

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigurationError("mode", f"expected one of {MODES}.")
        if self.reflector not in REFLECTOR_KINDS:
            raise ConfigurationError(
                "reflector", f"expected one of {REFLECTOR_KINDS}."
            )
        if self.mode == "react" and self.reflector != "none":
            raise ConfigurationError(
                "reflector", "ReAct runs do not reflect, use `none`."
            )
        for name in (
            "r_freq",
            "s_freq",
            "turns_max",
            "reflexion_trials",
            "calibration_factor",
            "trials",
        ):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                _logger.error("Invalid input: `%s` = %r.", name, value)
                raise ConfigurationError(name, "expected an integer >= 1.")
        if self.symbolic_trigger not in TRIGGERS:
            raise ConfigurationError(
                "symbolic_trigger", f"expected one of {TRIGGERS}."
            )
        known = {category.value for category in Category}
        unknown = set(self.categories) - known
        if unknown:
            raise ConfigurationError(
                "categories", f"unknown categories {sorted(unknown)}."
            )

    @property
    def enabled(self) -> FrozenSet[Category]:
        """Enabled categories."""
        return frozenset(Category(value) for value in self.categories)

    def to_document(self) -> Dict[str, Any]:
        document = asdict(self)
        document["categories"] = list(self.categories)
        return document


class TaskOutcome(NamedTuple):
    """Result of :func:`run_task`."""

    reward: int
    trajectory: Trajectory
    constitution: Constitution
    parse_failures: int = 0


class DatasetOutcome(NamedTuple):
    """Result of :func:`run_dataset`."""

    sr: float
    constitution: Constitution
    metrics: RunMetrics


class Evaluation(NamedTuple):
    """Result of the baseline and co-operative runs."""

    sr: float
    metrics: RunMetrics


def extract_action(text: str) -> str:
    """First action line of a model reply.

    A leading ``>`` or ``Action k:`` label is dropped. Replies without any
    non-blank line are returned stripped.

    Examples
    --------
    >>> extract_action("Action 3: go to fridge 1\\nObservation 3: ...")
    'go to fridge 1'
    >>> extract_action("  > open fridge 1")
    'open fridge 1'
    """
    for line in text.splitlines():
        line = line.strip()
        if line:
            return _ACTION_PREFIX.sub("", line).strip()
    return text.strip()


def assemble_action_prompt(
    env_grammar: str,
    goal: str,
    constitution_block: str,
    few_shots: "Sequence[str]",
    trajectory: Trajectory,
    *,
    guidance: str = "",
    memory: "Sequence[str]" = (),
) -> Prompt:
    """Lay out the prompt asking for the next action.

    Parameters
    ----------
    env_grammar : str
        Environment description and action templates.
    goal : str
        Task goal.
    constitution_block : str
        Rendered constitution, may be empty.
    few_shots : sequence of str
        Worked examples.
    trajectory : Trajectory
        Episode so far.
    guidance : str, optional
        Static guidance appended to the system block.
    memory : sequence of str, optional
        Reflections from earlier trials of the same task.

    Returns
    -------
    Prompt
        System block with grammar and guidance. User block with the
        constitution, the examples, the trial memory, the goal with the
        initial observation and finally the trajectory followed by the
        next-action cue. Empty parts leave no trace.

    Examples
    --------
    >>> prompt = assemble_action_prompt(
    ...     "Act.", "put a ball in roomb", "", (), Trajectory()
    ... )
    >>> print(prompt.text)
    Act.
    <BLANKLINE>
    Your task is to: put a ball in roomb
    <BLANKLINE>
    Action 1:
    """
    system = "\n\n".join(part for part in (env_grammar, guidance) if part)
    history = trajectory.render()
    sections = [
        constitution_block,
        few_shot_block(few_shots),
        memory_block(memory),
        goal_block(goal, trajectory.initial_observation),
        f"{history}\n{trajectory.cue}" if history else trajectory.cue,
    ]
    return Prompt(system, "\n\n".join(part for part in sections if part))


def _reflection_due(
    config: RunConfig,
    reflector: Reflector,
    task: TaskSpec,
    trajectory: Trajectory,
) -> bool:
    if trajectory.turn >= config.turns_max:
        return False
    if (
        config.symbolic_trigger == "conditional"
        and isinstance(reflector, SymbolicReflector)
    ):
        return reflector.triggered(task, trajectory)
    if config.reflect_at_turn_zero and trajectory.turn == 1:
        return True
    return is_due(trajectory.turn, config.r_freq)


def run_task(
    task: TaskSpec,
    constitution: Constitution,
    config: RunConfig,
    env: "TextWorld[Any]",
    llm: Completion,
    reflector: Optional[Reflector] = None,
    *,
    task_index: int = 0,
    few_shots: "Sequence[str]" = (),
    memory: "Sequence[str]" = (),
    include: "Optional[FrozenSet[Category]]" = None,
    tracer: Optional[Tracer] = None,
) -> TaskOutcome:
    """Play one task, reflecting on the way.

    Parameters
    ----------
    task : TaskSpec
        Task to play.
    constitution : Constitution
        Rules at task start; progress rules are dropped first.
    config : RunConfig
        Cadence and turn cap.
    env : TextWorld
        Environment of the task's kind, reset here.
    llm : callable
        Completion callable.
    reflector : Reflector, optional
        Reflection strategy, none for plain acting.
    task_index : int, optional
        Position of the task in its dataset, recorded as rule origin.
    few_shots : sequence of str, optional
        Worked examples placed in every action prompt.
    memory : sequence of str, optional
        Task-local reflections of earlier trials.
    include : frozenset of Category, optional
        Categories rendered into prompts, the configured ones by default.
    tracer : Tracer, optional
        Receives turn, step and reflection events.

    Returns
    -------
    TaskOutcome
        Reward (0 when the turn cap was hit), trajectory, the constitution
        with progress rules cleared and the number of reflection outputs
        that did not parse.

    Raises
    ------
    LlmTransportError
        If the model endpoint keeps failing.
    EnvironmentUsageError
        If the environment is misused.

    Notes
    -----
    The cadence is tested after each step is appended and before the done
    check: reflection runs after step ``t`` when ``t % r_freq == 0`` and
    ``t < turns_max``, so a task solved on a cadence turn still reflects.
    """
    include = config.enabled if include is None else include
    constitution = clear_progress(constitution)
    observation, grammar = env.reset(task)
    trajectory = Trajectory(observation)
    guidance = ""
    if reflector is not None:
        reflector.start_task(task)
        guidance = reflector.guidance(task)
    _logger.info("Starting task %s (%s).", task.task_id, task.task_type)
    if tracer is not None:
        tracer.emit(
            "task_start",
            task_id=task.task_id,
            task_type=task.task_type,
            goal=task.goal_text,
        )
    parse_failures = 0
    while trajectory.turn < config.turns_max and not env.done:
        if tracer is not None:
            tracer.emit(
                "turn_start", task_id=task.task_id, turn=trajectory.turn + 1
            )
        prompt = assemble_action_prompt(
            grammar,
            task.goal_text,
            render(constitution, include),
            few_shots,
            trajectory,
            guidance=guidance,
            memory=memory,
        )
        action = extract_action(llm(prompt, "action"))
        result = env.step(action)
        trajectory.append(action, result.observation)
        if tracer is not None:
            step: Dict[str, Any] = {
                "task_id": task.task_id,
                "turn": trajectory.turn,
                "action": action,
                "observation": result.observation,
                "reward": result.reward,
                "done": result.done,
            }
            if tracer.dump_state:
                step["state"] = env.describe_state()
            tracer.emit("env_step", **step)
        if reflector is None or not _reflection_due(
            config, reflector, task, trajectory
        ):
            continue
        batch = reflector.reflect(
            task, trajectory, render(constitution, include)
        )
        parse_failures += len(batch.failed)
        constitution = add_rules(
            constitution,
            batch,
            (task_index, trajectory.turn),
            reflector.source,
        )
        _logger.info(
            "Reflected at turn %d: %s.", trajectory.turn, batch.counts()
        )
        if tracer is not None:
            tracer.emit(
                "reflection",
                task_id=task.task_id,
                turn=trajectory.turn,
                reflector=reflector.kind,
                counts=batch.counts(),
                failed=list(batch.failed),
                version=constitution.version,
            )
    reward = env.reward if env.done else 0
    constitution = clear_progress(constitution)
    _logger.info(
        "Task %s ended with reward %d after %d turns.",
        task.task_id,
        reward,
        trajectory.turn,
    )
    if tracer is not None:
        tracer.emit(
            "task_end",
            task_id=task.task_id,
            reward=reward,
            turns=trajectory.turn,
        )
    return TaskOutcome(reward, trajectory, constitution, parse_failures)


def _call_counts(llm: Completion) -> Dict[str, int]:
    return dict(getattr(llm, "calls", {}))


def _difference(
    after: Mapping[str, int], before: Mapping[str, int]
) -> Dict[str, int]:
    return {role: after[role] - before.get(role, 0) for role in after}


def _default_factory(task: TaskSpec) -> "TextWorld[Any]":
    return make_environment(task.env_kind)


def _metrics(
    records: "List[TaskRecord]", config: RunConfig, **extra: Any
) -> RunMetrics:
    totals = fold_records(
        records,
        solved=lambda record: record.reward,
        turns=lambda record: record.turns,
        calls=lambda record: record.calls,
        parse_failures=lambda record: record.parse_failures,
        summarization_failures=lambda record: record.summarization_failures,
    )
    calls = totals["calls"] or {}
    return RunMetrics(
        sr=round(100.0 * totals["solved"] / len(records), 1),
        avg_turns=round(totals["turns"] / len(records), 2),
        llm_calls={role: calls.get(role, 0) for role in ROLES},
        parse_warning_count=totals["parse_failures"],
        summarization_failures=totals["summarization_failures"],
        tasks=records,
        config=config.to_document(),
        **extra,
    )


def run_dataset(
    tasks: "Sequence[TaskSpec]",
    config: RunConfig,
    env_factory: Optional[EnvFactory] = None,
    llm: Optional[Completion] = None,
    reflector: Optional[Reflector] = None,
    *,
    constitution: Optional[Constitution] = None,
    few_shots: "Optional[Mapping[str, Sequence[str]]]" = None,
    include: "Optional[FrozenSet[Category]]" = None,
    tracer: Optional[Tracer] = None,
) -> DatasetOutcome:
    """Play tasks in order, threading the constitution through them.

    Parameters
    ----------
    tasks : sequence of TaskSpec
        Tasks to play, at least one.
    config : RunConfig
        Run configuration.
    env_factory : callable, optional
        Maps a task onto an environment of its kind.
    llm : callable
        Completion callable.
    reflector : Reflector, optional
        Reflection strategy; without one nothing is reflected nor
        summarized.
    constitution : Constitution, optional
        Starting rules, empty by default.
    few_shots : mapping, optional
        Worked examples per task type.
    include : frozenset of Category, optional
        Categories rendered into prompts.
    tracer : Tracer, optional
        Receives every event of the run.

    Returns
    -------
    DatasetOutcome
        Success rate, final constitution and metrics.

    Raises
    ------
    ValueError
        If `tasks` is empty or no completion callable is given.

    Notes
    -----
    Long-term categories are summarized after every `s_freq`-th task.
    Tasks are retried up to ``config.trials`` times while they fail. A
    task whose model endpoint gave up is recorded with reward 0 and the
    error text, and the run continues with the constitution it had before
    that task.
    """
    if not tasks:
        _logger.error("Invalid input: no tasks to run.")
        raise ValueError("Cannot run dataset, `tasks` is empty.")
    if llm is None:
        raise ValueError("Cannot run dataset, `llm` is required.")
    env_factory = env_factory or _default_factory
    if constitution is None:
        constitution = Constitution(tasks[0].env_kind)
    summarized = [
        category for category in LONG_TERM if category in config.enabled
    ]
    few_shots = few_shots or {}
    records: List[TaskRecord] = []
    sizes: List[Dict[str, int]] = []
    for index, task in enumerate(tasks, start=1):
        task_calls = _call_counts(llm)
        env = env_factory(task)
        record = TaskRecord(task.task_id, task.task_type, 0, 0)
        for trial in range(1, config.trials + 1):
            try:
                outcome = run_task(
                    task,
                    constitution,
                    config,
                    env,
                    llm,
                    reflector,
                    task_index=index - 1,
                    few_shots=few_shots.get(task.task_type, ()),
                    include=include,
                    tracer=tracer,
                )
            except LlmTransportError as err:
                _logger.exception("Task %s failed.", task.task_id)
                record.error = str(err)
                break
            constitution = outcome.constitution
            record.parse_failures += outcome.parse_failures
            record.reward = outcome.reward
            record.turns = outcome.trajectory.turn
            record.trials = trial
            if outcome.reward:
                break
        records.append(record)
        if (
            reflector is not None
            and summarized
            and is_due(index, config.s_freq)
        ):
            summary = summarize(
                constitution,
                lambda text: llm(Prompt("", text), "summarization"),
                summarized,
                default_source=reflector.source,
            )
            constitution = summary.constitution
            record.summarization_failures = len(summary.failed)
            if tracer is not None:
                tracer.emit(
                    "summarization",
                    after_task=index,
                    failed=[category.value for category in summary.failed],
                    counts=rule_counts(constitution),
                    version=constitution.version,
                )
        record.calls = _difference(_call_counts(llm), task_calls)
        sizes.append(rule_counts(constitution))
    metrics = _metrics(records, config, constitution_sizes=sizes)
    _logger.info("Dataset of %d tasks done, SR %.1f.", len(tasks), metrics.sr)
    return DatasetOutcome(metrics.sr, constitution, metrics)


def run_react(
    tasks: "Sequence[TaskSpec]",
    config: RunConfig,
    env_factory: Optional[EnvFactory] = None,
    llm: Optional[Completion] = None,
    *,
    few_shots: "Optional[Mapping[str, Sequence[str]]]" = None,
    tracer: Optional[Tracer] = None,
) -> Evaluation:
    """Plain action loop: one trial per task, no rules, no reflection."""
    outcome = run_dataset(
        tasks,
        replace(config, trials=1),
        env_factory,
        llm,
        None,
        few_shots=few_shots,
        tracer=tracer,
    )
    return Evaluation(outcome.sr, outcome.metrics)


def run_cooperative(
    tasks: "Sequence[TaskSpec]",
    frozen: Constitution,
    config: RunConfig,
    env_factory: Optional[EnvFactory] = None,
    llm: Optional[Completion] = None,
    *,
    few_shots: "Optional[Mapping[str, Sequence[str]]]" = None,
    tracer: Optional[Tracer] = None,
) -> Evaluation:
    """Act with a frozen meta-advisor constitution in every prompt.

    Raises
    ------
    ValueError
        If `frozen` holds progress rules.
    """
    if frozen.rules_in(Category.PROGRESS):
        _logger.error("Invalid input: frozen constitution has progress.")
        raise ValueError(
            "Cannot run co-operative mode, `frozen` holds progress rules."
        )
    outcome = run_dataset(
        tasks,
        replace(config, trials=1),
        env_factory,
        llm,
        None,
        constitution=frozen,
        few_shots=few_shots,
        include=LONG_TERM & config.enabled,
        tracer=tracer,
    )
    return Evaluation(outcome.sr, outcome.metrics)


def critique(
    task: TaskSpec,
    trajectory: Trajectory,
    llm: Completion,
    reflector: Optional[Reflector] = None,
) -> str:
    """Task-local reflection on a failed trial.

    The symbolic reflector answers without a model call. Otherwise the
    error-reflection prompt is issued on the whole trial with the
    ``critique`` role; parsed records are joined, unparseable output is
    kept verbatim.
    """
    if isinstance(reflector, SymbolicReflector):
        batch = reflector.reflect(task, trajectory, "")
        notes = [record.render() for record in batch.error]
        return " ".join([*notes, *batch.progress])
    exemplars = getattr(reflector, "exemplars", None)
    prompt = build_reflection_prompt(
        "error",
        goal=task.goal_text,
        task_type=task.task_type,
        family=family_of(task.env_kind),
        constitution="",
        trajectory=trajectory.render(),
        exemplars=exemplars.error if exemplars is not None else (),
    )
    output = llm(prompt, "critique")
    parsed = parse_record_output(output)
    if parsed.entries:
        return "; ".join(record.render() for record in parsed.entries)
    return output.strip()


def run_reflexion(
    tasks: "Sequence[TaskSpec]",
    config: RunConfig,
    env_factory: Optional[EnvFactory] = None,
    llm: Optional[Completion] = None,
    reflector: Optional[Reflector] = None,
    *,
    few_shots: "Optional[Mapping[str, Sequence[str]]]" = None,
    tracer: Optional[Tracer] = None,
) -> Evaluation:
    """Retry every task with critiques of its earlier trials.

    Parameters
    ----------
    tasks : sequence of TaskSpec
        Tasks to play.
    config : RunConfig
        ``reflexion_trials`` caps the trials per task.
    env_factory : callable, optional
        Maps a task onto an environment.
    llm : callable
        Completion callable.
    reflector : Reflector, optional
        Selects how critiques are produced, see :func:`critique`.

    Returns
    -------
    Evaluation
        A task counts as solved when any trial solved it. After each failed
        trial but the last one critique call is made, so a task failing
        every trial costs ``trials * turns_max + trials - 1`` calls.
    """
    if not tasks:
        raise ValueError("Cannot run Reflexion, `tasks` is empty.")
    if llm is None:
        raise ValueError("Cannot run Reflexion, `llm` is required.")
    env_factory = env_factory or _default_factory
    few_shots = few_shots or {}
    records: List[TaskRecord] = []
    for index, task in enumerate(tasks):
        task_calls = _call_counts(llm)
        env = env_factory(task)
        memory: List[str] = []
        record = TaskRecord(task.task_id, task.task_type, 0, 0)
        for trial in range(1, config.reflexion_trials + 1):
            try:
                outcome = run_task(
                    task,
                    Constitution(task.env_kind),
                    config,
                    env,
                    llm,
                    None,
                    task_index=index,
                    few_shots=few_shots.get(task.task_type, ()),
                    memory=memory,
                    tracer=tracer,
                )
                record.reward = outcome.reward
                record.turns = outcome.trajectory.turn
                record.trials = trial
                if outcome.reward or trial == config.reflexion_trials:
                    break
                memory.append(
                    critique(task, outcome.trajectory, llm, reflector)
                )
            except LlmTransportError as err:
                _logger.exception("Task %s failed.", task.task_id)
                record.error = str(err)
                break
        record.calls = _difference(_call_counts(llm), task_calls)
        records.append(record)
    metrics = _metrics(records, config)
    return Evaluation(metrics.sr, metrics)


def calibrate_meta_advisor(
    env_kind: str,
    task_types: "Sequence[str]",
    calibration_factor: int,
    config: RunConfig,
    llm: Completion,
    reflector: Reflector,
    *,
    env_factory: Optional[EnvFactory] = None,
    tracer: Optional[Tracer] = None,
    **params: Any,
) -> Constitution:
    """Derive a frozen constitution from calibration tasks.

    Parameters
    ----------
    env_kind : str
        Environment kind.
    task_types : sequence of str
        Task types calibrated on.
    calibration_factor : int
        Calibration tasks per task type.
    config : RunConfig
        Run configuration, played in self-sustaining mode.
    llm : callable
        Completion callable.
    reflector : Reflector
        Reflection strategy of the calibration run.
    **params
        Sizing parameters passed to task generation.

    Returns
    -------
    Constitution
        Abstract and error rules only, tagged as meta-advisor rules. When
        abstract rules are enabled, one exploration prompt over the initial
        observations of all calibration tasks adds task-agnostic rules.

    Raises
    ------
    ValueError
        If `calibration_factor` is smaller than 1 or no task type is given.
    """
    if calibration_factor < 1:
        _logger.error("Invalid input: calibration factor below 1.")
        raise ValueError(
            "Cannot calibrate, `calibration_factor` must be at least 1."
        )
    if not task_types:
        raise ValueError("Cannot calibrate, `task_types` is empty.")
    seeds = expand_seeds(config.seed, len(task_types))
    tasks: List[TaskSpec] = []
    for task_type, seed in zip(task_types, seeds):
        tasks.extend(
            generate_tasks(
                env_kind, task_type, calibration_factor, seed, **params
            )
        )
    _logger.info("Calibrating on %d %s tasks.", len(tasks), env_kind)
    outcome = run_dataset(
        tasks,
        replace(config, mode="self_sustaining"),
        env_factory,
        llm,
        reflector,
        tracer=tracer,
    )
    constitution = outcome.constitution
    if Category.ABSTRACT in config.enabled:
        factory = env_factory or _default_factory
        observations = [factory(task).reset(task)[0] for task in tasks]
        rules = exploration_reflect(family_of(env_kind), observations, llm)
        constitution = add_rules(
            constitution,
            ReflectionBatch(abstract=rules),
            (len(tasks), 0),
            Source.META_ADVISOR,
        )
    return restrict(
        constitution, LONG_TERM & config.enabled, source=Source.META_ADVISOR
    )


def demonstrations(
    env_kind: str,
    task_types: "Sequence[str]",
    k: int,
    seed: int,
    **params: Any,
) -> Dict[str, Tuple[str, ...]]:
    """Oracle-solved worked examples per task type.

    Each example shows the initial observation and the oracle plan as a
    serialized trajectory.
    """
    # Imported here, the oracle pulls in scipy.
    from reflect_kit._assembly import oracle_plan

    examples: Dict[str, Tuple[str, ...]] = {}
    if k < 1:
        return examples
    for task_type, task_seed in zip(
        task_types, expand_seeds(seed, len(task_types))
    ):
        rendered = []
        generated = generate_tasks(
            env_kind, task_type, k, task_seed, **params
        )
        for task in generated:
            env = make_environment(env_kind)
            observation, _ = env.reset(task)
            trajectory = Trajectory(observation)
            for action in oracle_plan(task):
                trajectory.append(action, env.step(action).observation)
            rendered.append(
                f"{goal_block(task.goal_text, observation)}\n"
                f"{trajectory.render()}"
            )
        examples[task_type] = tuple(rendered)
    return examples
