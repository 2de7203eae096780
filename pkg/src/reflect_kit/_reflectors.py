"""Neural, symbolic and neuro-symbolic reflection strategies."""
import json
import logging
import re
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import (
    TYPE_CHECKING,
    Any,
    Callable,
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Set,
    Tuple,
    Union,
)
from warnings import warn

from reflect_kit._constitution import (
    ALL_CATEGORIES,
    CATEGORY_ORDER,
    Category,
    ReflectionBatch,
    Source,
)
from reflect_kit._environment import (
    NOTHING_HAPPENS,
    TaskSpec,
    TextWorld,
    is_think,
    make_environment,
    normalize_action,
)
from reflect_kit._parsing import (
    ErrorRecord,
    ParseResult,
    parse_list_output,
    parse_record_output,
)
from reflect_kit._prompts import (
    Prompt,
    build_exploration_prompt,
    build_reflection_prompt,
    family_of,
)
from reflect_kit._trajectory import Trajectory

if TYPE_CHECKING:  # pragma: no cover
    Completion = Callable[[Prompt, str], str]

_logger = logging.getLogger(__name__)

#: Fields of a task usable in rulebook templates.
TASK_FIELDS = frozenset({"goal", "task_type", "env_kind"})

DEFAULT_INVALID_STREAK = 3
DEFAULT_LOOP_WINDOW = 4

DEFAULT_MESSAGES: Dict[str, Dict[str, str]] = {
    "invalid_action": {
        "mistake": "Repeated the invalid action `{action}`",
        "solution": "Stop repeating it and consult the valid actions",
    },
    "loop": {
        "mistake": "Going in circles with {cycle}",
        "solution": "Break the cycle and try an action you have not tried",
    },
}
_MESSAGE_FIELDS = {"invalid_action": {"action"}, "loop": {"cycle"}}


class RulebookError(ValueError):
    """A rulebook is malformed or lacks an entry for a task type."""
    pass


class ReflectionParseWarning(Warning):
    """A reflection output could not be parsed."""
    pass


@dataclass(frozen=True)
class Tracker:
    """One subgoal: a pattern and what to say around it."""

    pattern: "re.Pattern[str]"
    on_match: str
    next_hint: str


@dataclass(frozen=True)
class ErrorHeuristics:
    """Thresholds and message templates of the symbolic error checks."""

    invalid_streak: int = DEFAULT_INVALID_STREAK
    loop_window: int = DEFAULT_LOOP_WINDOW
    messages: Mapping[str, Mapping[str, str]] = field(
        default_factory=lambda: DEFAULT_MESSAGES
    )


@dataclass(frozen=True)
class TaskRules:
    """Rulebook entry of one task type."""

    trackers: Tuple[Tracker, ...]
    heuristics: ErrorHeuristics = field(default_factory=ErrorHeuristics)
    guidance: str = ""


@dataclass(frozen=True)
class SymbolicRulebook:
    """Trackers and error heuristics per task type."""

    entries: Mapping[str, TaskRules]
    env_kind: str = ""

    def for_task(self, task_type: str) -> TaskRules:
        """Entry of a task type.

        Raises
        ------
        RulebookError
            If the rulebook has no entry for `task_type`.
        """
        try:
            return self.entries[task_type]
        except KeyError as err:
            _logger.error("Rulebook lacks task type `%s`.", task_type)
            raise RulebookError(
                f"Rulebook has no entry for task type `{task_type}`."
            ) from err


def _template_fields(template: str, where: str) -> Set[str]:
    try:
        parsed = list(string.Formatter().parse(template))
    except ValueError as err:
        raise RulebookError(f"{where}: malformed template.") from err
    names = set()
    for _, name, _, _ in parsed:
        if name is None:
            continue
        if not name:
            raise RulebookError(
                f"{where}: positional `{{}}` placeholders are not "
                f"allowed, name or number them."
            )
        names.add(re.split(r"[.\[]", name, maxsplit=1)[0])
    return names


def _tracker(document: Any, where: str) -> Tracker:
    if not isinstance(document, dict):
        raise RulebookError(f"{where}: expected an object.")
    try:
        source, on_match, next_hint = (
            document["pattern"],
            document["on_match"],
            document["next_hint"],
        )
    except KeyError as err:
        raise RulebookError(f"{where}: missing field {err}.") from err
    try:
        pattern = re.compile(source)
    except re.error as err:
        raise RulebookError(f"{where}: pattern does not compile.") from err
    groups = set(pattern.groupindex) | {
        str(number) for number in range(pattern.groups + 1)
    }
    for name in _template_fields(on_match, f"{where}.on_match"):
        if name not in groups | TASK_FIELDS:
            raise RulebookError(
                f"{where}.on_match: unknown placeholder `{name}`."
            )
    for name in _template_fields(next_hint, f"{where}.next_hint"):
        if name not in TASK_FIELDS:
            raise RulebookError(
                f"{where}.next_hint: unknown placeholder `{name}`."
            )
    return Tracker(pattern, on_match, next_hint)


def _is_count(value: Any, minimum: int) -> bool:
    # JSON true/false arrive as bool, a subclass of int.
    return (
        isinstance(value, int)
        and not isinstance(value, bool)
        and value >= minimum
    )


def _heuristics(document: Any, where: str) -> ErrorHeuristics:
    if document is None:
        return ErrorHeuristics()
    if not isinstance(document, dict):
        raise RulebookError(f"{where}: expected an object.")
    invalid_streak = document.get("invalid_streak", DEFAULT_INVALID_STREAK)
    loop_window = document.get("loop_window", DEFAULT_LOOP_WINDOW)
    if not _is_count(invalid_streak, 1):
        raise RulebookError(f"{where}.invalid_streak: expected int >= 1.")
    if not _is_count(loop_window, 2):
        raise RulebookError(f"{where}.loop_window: expected int >= 2.")
    overrides = document.get("messages", {})
    if not isinstance(overrides, dict):
        raise RulebookError(f"{where}.messages: expected an object.")
    messages = {key: dict(value) for key, value in DEFAULT_MESSAGES.items()}
    for key, value in overrides.items():
        if key not in _MESSAGE_FIELDS:
            raise RulebookError(f"{where}.messages: unknown message `{key}`.")
        if not isinstance(value, dict):
            raise RulebookError(f"{where}.messages.{key}: expected an object.")
        for part in ("mistake", "solution"):
            template = value.get(part, messages[key][part])
            if not isinstance(template, str):
                raise RulebookError(
                    f"{where}.messages.{key}.{part}: expected a string."
                )
            names = _template_fields(template, f"{where}.messages.{key}")
            if not names <= _MESSAGE_FIELDS[key]:
                raise RulebookError(
                    f"{where}.messages.{key}: unknown placeholder in "
                    f"`{template}`."
                )
            messages[key][part] = template
    return ErrorHeuristics(invalid_streak, loop_window, messages)


def rulebook_from_document(
    document: Any, env_kind: str = ""
) -> SymbolicRulebook:
    """Validate a rulebook mapping.

    Raises
    ------
    RulebookError
        If a pattern does not compile or a template uses a placeholder that
        neither the pattern nor the task provides.
    """
    if not isinstance(document, dict) or not document:
        raise RulebookError("A rulebook must map task types onto entries.")
    entries = {}
    for task_type, entry in document.items():
        where = f"rulebook[{task_type}]"
        if not isinstance(entry, dict) or not isinstance(
            entry.get("trackers"), list
        ):
            raise RulebookError(f"{where}: needs a `trackers` list.")
        trackers = tuple(
            _tracker(tracker, f"{where}.trackers[{index}]")
            for index, tracker in enumerate(entry["trackers"])
        )
        guidance = entry.get("guidance", "")
        if not isinstance(guidance, str):
            raise RulebookError(f"{where}.guidance: expected a string.")
        entries[task_type] = TaskRules(
            trackers,
            _heuristics(
                entry.get("error_heuristics"), f"{where}.error_heuristics"
            ),
            guidance,
        )
    return SymbolicRulebook(entries, env_kind)


def load_rulebook(
    path: "Union[str, Path, None]" = None, env_kind: Optional[str] = None
) -> SymbolicRulebook:
    """Read and validate a rulebook.

    Parameters
    ----------
    path : str or Path, optional
        JSON rulebook file.
    env_kind : str, optional
        Environment kind whose bundled rulebook is loaded when `path` is not
        given.

    Returns
    -------
    SymbolicRulebook
        Validated rulebook.

    Raises
    ------
    RulebookError
        If neither argument is given, no bundled rulebook exists or the file
        is malformed.

    Examples
    --------
    >>> rulebook = load_rulebook(env_kind="gripper")
    >>> len(rulebook.for_task("transport").trackers)
    3
    """
    if path is None:
        if env_kind is None:
            raise RulebookError(
                "Cannot load rulebook, give a `path` or an `env_kind`."
            )
        bundled = (
            resources.files("reflect_kit") / "rulebooks" / f"{env_kind}.json"
        )
        if not bundled.is_file():
            raise RulebookError(f"No bundled rulebook for `{env_kind}`.")
        text = bundled.read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    try:
        document = json.loads(text)
    except ValueError as err:
        raise RulebookError(
            f"Rulebook {path or env_kind} is not JSON."
        ) from err
    return rulebook_from_document(document, env_kind or "")


# Symbolic reflection.


class SymbolicAnalysis(NamedTuple):
    """Completed-subgoal count together with the resulting batch."""

    completed: int
    batch: ReflectionBatch


def _task_fields(task: TaskSpec) -> Dict[str, str]:
    return {
        "goal": task.goal_text,
        "task_type": task.task_type,
        "env_kind": task.env_kind,
    }


def track_subgoals(
    trackers: "Sequence[Tracker]", observations: "Sequence[str]"
) -> "List[re.Match[str]]":
    """Matches of the completed tracker prefix.

    Each tracker consumes the earliest not yet consumed observation it
    matches; the scan stops at the first tracker without a match.
    """
    matches = []
    position = 0
    for tracker in trackers:
        for index in range(position, len(observations)):
            match = tracker.pattern.search(observations[index])
            if match:
                matches.append(match)
                position = index + 1
                break
        else:
            break
    return matches


def _format(
    template: str,
    match: "Optional[re.Match[str]]",
    fields: Dict[str, str],
) -> str:
    values: Dict[str, Any] = dict(fields)
    positional: List[str] = []
    if match is not None:
        groups = (group or "" for group in match.groups())
        positional = [match.group(0), *groups]
        values.update(
            {name: value or "" for name, value in match.groupdict().items()}
        )
    return template.format(*positional, **values)


def _primitive(cycle: "Sequence[str]") -> bool:
    size = len(cycle)
    for period in range(1, size):
        if size % period == 0 and list(cycle) == list(cycle[:period]) * (
            size // period
        ):
            return False
    return True


def _rotation_key(cycle: "Sequence[str]") -> Tuple[str, ...]:
    return min(
        tuple(cycle[index:]) + tuple(cycle[:index])
        for index in range(len(cycle))
    )


def detect_errors(
    trajectory: Trajectory, heuristics: ErrorHeuristics
) -> Tuple[ErrorRecord, ...]:
    """Error records found by the invalid-streak and loop heuristics.

    ``think:`` steps are ignored. An action answered with the invalid-action
    observation `invalid_streak` times in a row yields one record per
    action. A cycle of 2 to `loop_window` actions holding at least two
    distinct actions that is performed twice in a row yields one record per
    cycle, rotations counting as the same cycle.
    """
    steps = [
        (normalize_action(step.action), step.observation)
        for step in trajectory.steps
        if not is_think(step.action)
    ]
    records: List[ErrorRecord] = []
    invalid = heuristics.messages["invalid_action"]
    reported: Set[str] = set()
    streak = 0
    for index, (action, observation) in enumerate(steps):
        if observation != NOTHING_HAPPENS:
            streak = 0
            continue
        if index and streak and steps[index - 1][0] == action:
            streak += 1
        else:
            streak = 1
        if streak >= heuristics.invalid_streak and action not in reported:
            reported.add(action)
            records.append(
                ErrorRecord(
                    invalid["mistake"].format(action=action),
                    invalid["solution"].format(action=action),
                )
            )
    loop = heuristics.messages["loop"]
    actions = [action for action, _ in steps]
    cycles: Set[Tuple[str, ...]] = set()
    for end in range(len(actions)):
        for size in range(2, heuristics.loop_window + 1):
            start = end + 1 - 2 * size
            if start < 0:
                break
            cycle = actions[start : start + size]
            if cycle != actions[start + size : end + 1]:
                continue
            if len(set(cycle)) < 2 or not _primitive(cycle):
                continue
            key = _rotation_key(cycle)
            if key in cycles:
                continue
            cycles.add(key)
            text = " -> ".join(cycle)
            records.append(
                ErrorRecord(
                    loop["mistake"].format(cycle=text),
                    loop["solution"].format(cycle=text),
                )
            )
    return tuple(records)


def analyze(
    task: TaskSpec, trajectory: Trajectory, rulebook: SymbolicRulebook
) -> SymbolicAnalysis:
    """Run the symbolic reflector and report the completed-subgoal count."""
    rules = rulebook.for_task(task.task_type)
    fields = _task_fields(task)
    matches = track_subgoals(rules.trackers, trajectory.observations)
    progress = []
    if matches:
        tracker = rules.trackers[len(matches) - 1]
        progress.append(_format(tracker.on_match, matches[-1], fields))
    if len(matches) < len(rules.trackers):
        tracker = rules.trackers[len(matches)]
        progress.append(_format(tracker.next_hint, None, fields))
    batch = ReflectionBatch(
        error=detect_errors(trajectory, rules.heuristics),
        progress=tuple(note for note in progress if note.strip()),
    )
    return SymbolicAnalysis(len(matches), batch)


def symbolic_reflect(
    task: TaskSpec, trajectory: Trajectory, rulebook: SymbolicRulebook
) -> ReflectionBatch:
    """Reflect on a trajectory with regular-expression trackers.

    Parameters
    ----------
    task : TaskSpec
        Task being solved; its type selects the rulebook entry and its
        fields fill the templates.
    trajectory : Trajectory
        Episode so far.
    rulebook : SymbolicRulebook
        Trackers and heuristics.

    Returns
    -------
    ReflectionBatch
        Progress notes (what the last completed subgoal achieved, then a
        hint for the first open one) and error records. The abstract list is
        always empty.

    Raises
    ------
    RulebookError
        If the rulebook lacks the task type.

    See Also
    --------
    neural_reflect : Reflect by prompting a model.

    Examples
    --------
    >>> from reflect_kit.environments import make_task
    >>> task = make_task(
    ...     "gripper", "transport", 0, start=["rooma"], goal=["roomb"]
    ... )
    >>> batch = symbolic_reflect(
    ...     task, Trajectory(), load_rulebook(env_kind="gripper")
    ... )
    >>> batch.progress
    ('Pick up a ball that is not at its goal room yet with a free gripper.',)
    """
    return analyze(task, trajectory, rulebook).batch


# Neural reflection.


@dataclass(frozen=True)
class ExemplarSet:
    """Few-shot (trajectory excerpt, reflection output) pairs per category."""

    abstract: Tuple[Tuple[str, str], ...] = ()
    error: Tuple[Tuple[str, str], ...] = ()
    progress: Tuple[Tuple[str, str], ...] = ()

    def for_category(self, category: Category) -> Tuple[Tuple[str, str], ...]:
        return getattr(self, category.value)

    @property
    def is_empty(self) -> bool:
        return not (self.abstract or self.error or self.progress)


def _parse(category: Category, text: str) -> ParseResult:
    if category is Category.ERROR:
        return parse_record_output(text)
    return parse_list_output(text)


def neural_reflect(
    goal: str,
    constitution_rendered: str,
    trajectory: Trajectory,
    llm: "Completion",
    *,
    task_type: str = "",
    family: str = "planning",
    categories: "Iterable[Category]" = ALL_CATEGORIES,
    exemplars: Optional[ExemplarSet] = None,
) -> ReflectionBatch:
    """Reflect on a trajectory by prompting a model once per category.

    Parameters
    ----------
    goal : str
        Task goal.
    constitution_rendered : str
        Current constitution as rendered into prompts.
    trajectory : Trajectory
        Episode so far, must not be empty.
    llm : callable
        Completion callable taking a :class:`Prompt` and a role.
    task_type : str, optional
        Task type named in the abstract instructions.
    family : str, optional
        Example family of the prompts.
    categories : iterable of Category, optional
        Categories to prompt for; the others are never prompted.
    exemplars : ExemplarSet, optional
        Few-shot pairs placed between instructions and trajectory.

    Returns
    -------
    ReflectionBatch
        Parsed entries. Categories whose output did not parse are empty and
        listed in ``failed``.

    Raises
    ------
    ValueError
        If `trajectory` is empty.

    Warns
    -----
    ReflectionParseWarning
        For every category whose output could not be parsed.
    """
    if not trajectory.turn:
        _logger.error("Invalid input: cannot reflect on an empty trajectory.")
        raise ValueError("Cannot reflect, `trajectory` has no steps.")
    selected = frozenset(categories)
    rendered = trajectory.render()
    results: Dict[Category, ParseResult] = {}
    failed = []
    for category in CATEGORY_ORDER:
        if category not in selected:
            continue
        prompt = build_reflection_prompt(
            category.value,
            goal=goal,
            task_type=task_type or "this",
            family=family,
            constitution=constitution_rendered,
            trajectory=rendered,
            exemplars=exemplars.for_category(category) if exemplars else (),
        )
        result = _parse(category, llm(prompt, "reflection"))
        if result.failed:
            warn(
                f"{category.value.capitalize()} reflection did not parse: "
                f"{result.diagnostic.message}",
                ReflectionParseWarning,
                stacklevel=2,
            )
            failed.append(category.value)
        results[category] = result
    empty = ParseResult((), ())
    abstract = results.get(Category.ABSTRACT, empty)
    priorities = tuple(
        (entry, priority)
        for entry, priority in zip(abstract.entries, abstract.priorities)
        if priority is not None
    )
    return ReflectionBatch(
        abstract=abstract.entries,
        error=results.get(Category.ERROR, empty).entries,
        progress=results.get(Category.PROGRESS, empty).entries,
        priorities=priorities,
        failed=tuple(failed),
    )


def neuro_symbolic_reflect(
    goal: str,
    constitution_rendered: str,
    trajectory: Trajectory,
    llm: "Completion",
    exemplars: ExemplarSet,
    **options: Any,
) -> ReflectionBatch:
    """:func:`neural_reflect` guided by symbolically harvested exemplars."""
    return neural_reflect(
        goal,
        constitution_rendered,
        trajectory,
        llm,
        exemplars=exemplars,
        **options,
    )


def exploration_reflect(
    family: str, observations: "Iterable[str]", llm: "Completion"
) -> Tuple[str, ...]:
    """Task-agnostic abstract rules from observations of many tasks.

    Warns
    -----
    ReflectionParseWarning
        If the output could not be parsed.
    """
    result = parse_list_output(
        llm(build_exploration_prompt(family, observations), "reflection")
    )
    if result.failed:
        warn(
            f"Exploration reflection did not parse: "
            f"{result.diagnostic.message}",
            ReflectionParseWarning,
            stacklevel=2,
        )
    return result.entries


# Exemplar harvesting.


def _truncated(action: str) -> str:
    """The action without its last word, never valid in any world."""
    return " ".join(action.split()[:-1])


def _replay(
    environment: "TextWorld[Any]", task: TaskSpec, actions: "Sequence[str]"
) -> List[Trajectory]:
    """Snapshots of the trajectory after every step."""
    observation, _ = environment.reset(task)
    trajectory = Trajectory(observation)
    snapshots = []
    for action in actions:
        if environment.done:
            break
        result = environment.step(action)
        trajectory.append(action, result.observation)
        snapshot = Trajectory(observation)
        for step in trajectory.steps:
            snapshot.append(*step)
        snapshots.append(snapshot)
    return snapshots


def harvest_exemplars(
    calibration_tasks: "Sequence[TaskSpec]",
    rulebook: SymbolicRulebook,
    env: "Optional[TextWorld[Any]]" = None,
    *,
    k: int = 2,
    every: int = 1,
    excerpt: int = 5,
) -> ExemplarSet:
    """Collect few-shot pairs from symbolic reflection on oracle runs.

    Parameters
    ----------
    calibration_tasks : sequence of TaskSpec
        Solvable tasks.
    rulebook : SymbolicRulebook
        Rulebook used to reflect.
    env : TextWorld, optional
        Environment to replay in, one of the task's kind by default.
    k : int, optional
        Cap on pairs per category.
    every : int, optional
        Reflection cadence in turns during replay.
    excerpt : int, optional
        Number of trailing steps shown in each excerpt.

    Returns
    -------
    ExemplarSet
        Progress pairs from oracle replays and error pairs from a perturbed
        replay per task, which first repeats a broken action as often as the
        invalid-streak heuristic requires.
    """
    # Imported here, the oracle imports the environment registry.
    from reflect_kit._assembly import oracle_plan

    pairs: Dict[Category, List[Tuple[str, str]]] = {
        Category.ERROR: [],
        Category.PROGRESS: [],
    }
    if k < 1:
        return ExemplarSet()
    for task in calibration_tasks:
        environment = env or make_environment(task.env_kind)
        plan = oracle_plan(task)
        runs = [plan]
        if plan:
            rules = rulebook.for_task(task.task_type)
            streak = rules.heuristics.invalid_streak
            runs.append([_truncated(plan[0])] * streak + plan)
        for actions in runs:
            for snapshot in _replay(environment, task, actions):
                if snapshot.turn % every:
                    continue
                batch = symbolic_reflect(task, snapshot, rulebook)
                text = snapshot.render(last=excerpt)
                if batch.progress:
                    output = json.dumps(list(batch.progress))
                    _collect(pairs[Category.PROGRESS], (text, output), k)
                if batch.error:
                    output = json.dumps(
                        [record._asdict() for record in batch.error]
                    )
                    _collect(pairs[Category.ERROR], (text, output), k)
    _logger.info(
        "Harvested %d progress and %d error exemplars.",
        len(pairs[Category.PROGRESS]),
        len(pairs[Category.ERROR]),
    )
    return ExemplarSet(
        error=tuple(pairs[Category.ERROR]),
        progress=tuple(pairs[Category.PROGRESS]),
    )


def _collect(
    bucket: List[Tuple[str, str]], pair: Tuple[str, str], k: int
) -> None:
    outputs = {output for _, output in bucket}
    if len(bucket) < k and pair[1] not in outputs:
        bucket.append(pair)


# Stateful reflectors used by the agent loop.


class Reflector:
    """Base class binding a strategy to its collaborators.

    Parameters
    ----------
    categories : iterable of Category, optional
        Categories produced; suppressed ones are never prompted.
    """

    source: Source = Source.NEURAL
    kind = "none"

    def __init__(
        self, categories: "Iterable[Category]" = ALL_CATEGORIES
    ) -> None:
        self.categories: FrozenSet[Category] = frozenset(categories)

    @property
    def calls_per_event(self) -> int:
        """Model calls issued per reflection event."""
        return 0

    def start_task(self, task: TaskSpec) -> None:
        """Reset per-task state."""

    def triggered(self, task: TaskSpec, trajectory: Trajectory) -> bool:
        """Whether a condition-driven reflection should run now."""
        return False

    def guidance(self, task: TaskSpec) -> str:
        """Static guidance appended to the action prompt."""
        return ""

    def reflect(
        self, task: TaskSpec, trajectory: Trajectory, constitution_text: str
    ) -> ReflectionBatch:
        raise NotImplementedError


class NeuralReflector(Reflector):
    """Prompts a model once per enabled category."""

    source = Source.NEURAL
    kind = "neural"

    def __init__(
        self,
        llm: "Completion",
        categories: "Iterable[Category]" = ALL_CATEGORIES,
    ) -> None:
        super().__init__(categories)
        self.llm = llm

    @property
    def calls_per_event(self) -> int:
        return len(self.categories)

    def _exemplars(self) -> Optional[ExemplarSet]:
        return None

    def reflect(
        self, task: TaskSpec, trajectory: Trajectory, constitution_text: str
    ) -> ReflectionBatch:
        return neural_reflect(
            task.goal_text,
            constitution_text,
            trajectory,
            self.llm,
            task_type=task.task_type,
            family=family_of(task.env_kind),
            categories=self.categories,
            exemplars=self._exemplars(),
        )


class NeuroSymbolicReflector(NeuralReflector):
    """Neural reflector whose prompts carry harvested exemplars."""

    source = Source.NEURO_SYMBOLIC
    kind = "neuro_symbolic"

    def __init__(
        self,
        llm: "Completion",
        exemplars: ExemplarSet,
        categories: "Iterable[Category]" = ALL_CATEGORIES,
    ) -> None:
        super().__init__(llm, categories)
        self.exemplars = exemplars

    def _exemplars(self) -> Optional[ExemplarSet]:
        return self.exemplars


class SymbolicReflector(Reflector):
    """Rulebook-driven reflector; never calls a model.

    ``triggered`` fires when the completed-subgoal count grew or a new error
    record appeared since the previous check.
    """

    source = Source.SYMBOLIC
    kind = "symbolic"

    def __init__(
        self,
        rulebook: SymbolicRulebook,
        categories: "Iterable[Category]" = ALL_CATEGORIES,
    ) -> None:
        super().__init__(categories)
        self.rulebook = rulebook
        self._completed = 0
        self._errors: Set[ErrorRecord] = set()

    def start_task(self, task: TaskSpec) -> None:
        self.rulebook.for_task(task.task_type)
        self._completed = 0
        self._errors = set()

    def triggered(self, task: TaskSpec, trajectory: Trajectory) -> bool:
        analysis = analyze(task, trajectory, self.rulebook)
        fired = analysis.completed > self._completed or bool(
            set(analysis.batch.error) - self._errors
        )
        self._completed = analysis.completed
        self._errors |= set(analysis.batch.error)
        return fired

    def guidance(self, task: TaskSpec) -> str:
        return self.rulebook.for_task(task.task_type).guidance

    def reflect(
        self, task: TaskSpec, trajectory: Trajectory, constitution_text: str
    ) -> ReflectionBatch:
        return symbolic_reflect(task, trajectory, self.rulebook).only(
            self.categories
        )
