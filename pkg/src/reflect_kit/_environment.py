"""Shared machinery for the deterministic text-world environments."""
import hashlib
import importlib
import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import (
    Any,
    ClassVar,
    Dict,
    Generic,
    Iterable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
    Union,
)

from numpy.random import Generator, default_rng

_logger = logging.getLogger(__name__)

NOTHING_HAPPENS = "Nothing happens."
THINK_OBSERVATION = "OK."

#: Environment kinds and the classes implementing them.
ENV_KINDS: Dict[str, Tuple[str, str]] = {
    "gridworld": ("reflect_kit._gridworld", "Gridworld"),
    "gripper": ("reflect_kit._gripper", "Gripper"),
    "blocksworld": ("reflect_kit._blocksworld", "Blocksworld"),
}

_S = TypeVar("_S")


class EnvironmentConfigurationError(ValueError):
    """An environment or task is configured incorrectly."""
    pass


class EnvironmentUsageError(RuntimeError):
    """An environment was driven in an invalid order."""
    pass


class TaskGenerationError(ValueError):
    """Tasks cannot be generated with the requested parameters."""
    pass


class UnsolvableTaskError(RuntimeError):
    """No plan reaches the goal of a task."""
    pass


@dataclass(frozen=True)
class TaskSpec:
    """A reproducible task.

    The seed together with the sizing parameters determines the initial
    state and the goal. ``params`` may also pin the layout explicitly, which
    the hand-written tasks in tests do.
    """

    env_kind: str
    task_type: str
    goal_text: str
    seed: int
    params: Mapping[str, Any] = field(default_factory=dict)

    @property
    def task_id(self) -> str:
        """Short stable identifier derived from the task's content."""
        digest = hashlib.sha256(
            json.dumps(task_to_document(self), sort_keys=True).encode()
        ).hexdigest()
        return f"{self.env_kind}-{self.task_type}-{digest[:10]}"


class StepResult(NamedTuple):
    """Outcome of a single environment step."""

    observation: str
    reward: int
    done: bool


def normalize_action(action: str) -> str:
    """Lower-case an action, collapse whitespace and drop a final period.

    Examples
    --------
    >>> normalize_action("  Pick  ball1 roomA   left. ")
    'pick ball1 rooma left'
    """
    text = " ".join(action.split()).lower()
    if text.endswith("."):
        text = text[:-1].rstrip()
    return text


def is_think(action: str) -> bool:
    """Whether an action is a ``think:`` step."""
    return normalize_action(action).startswith("think:")


class TextWorld(ABC, Generic[_S]):
    """Base class of every text world.

    Subclasses describe a world through immutable state values and a pure
    transition function; this class takes care of the episode bookkeeping.
    """

    kind: ClassVar[str] = ""
    task_types: ClassVar[Tuple[str, ...]] = ()
    grammar: ClassVar[str] = ""

    def __init__(self, **options: Any) -> None:
        self.options = dict(options)
        self._task: Optional[TaskSpec] = None
        self._state: Optional[_S] = None
        self._done = False
        self._reward = 0

    # Hooks implemented per world.

    @abstractmethod
    def check_params(self, task_type: str, params: Mapping[str, Any]) -> None:
        """Raise :class:`TaskGenerationError` for unsatisfiable sizing."""

    @abstractmethod
    def setup(self, task: TaskSpec, rng: Generator) -> _S:
        """Prepare the static layout and return the initial state."""

    @abstractmethod
    def goal_text(self) -> str:
        """Natural-language goal of the prepared task."""

    @abstractmethod
    def goal_reached(self, state: _S) -> bool:
        """Goal predicate of the prepared task."""

    @abstractmethod
    def transition(self, state: _S, action: str) -> "Optional[Tuple[_S, str]]":
        """Apply a normalized action, ``None`` if it is not applicable."""

    @abstractmethod
    def candidate_actions(self, state: _S) -> "Iterable[str]":
        """Actions worth trying from `state`, in a fixed order."""

    @abstractmethod
    def describe(self, state: _S) -> str:
        """Observation text describing `state`."""

    def dump(self, state: _S) -> str:
        """Human-readable world-state dump, the description by default."""
        return self.describe(state)

    # Episode bookkeeping.

    def prepare(self, task: TaskSpec) -> _S:
        """Validate `task`, set the world up and return the initial state.

        Raises
        ------
        EnvironmentConfigurationError
            If the task belongs to another environment kind or task type.
        """
        if task.env_kind != self.kind:
            _logger.error(
                "Task kind `%s` is not `%s`.", task.env_kind, self.kind
            )
            raise EnvironmentConfigurationError(
                f"Cannot reset, task kind `{task.env_kind}` does not match "
                f"environment kind `{self.kind}`."
            )
        if task.task_type not in self.task_types:
            raise EnvironmentConfigurationError(
                f"Cannot reset, unknown {self.kind} task type "
                f"`{task.task_type}`."
            )
        try:
            self.check_params(task.task_type, task.params)
        except TaskGenerationError as err:
            raise EnvironmentConfigurationError(str(err)) from err
        return self.setup(task, default_rng(task.seed))

    def reset(self, task: TaskSpec) -> Tuple[str, str]:
        """Start an episode.

        Parameters
        ----------
        task : TaskSpec
            Task to play.

        Returns
        -------
        tuple of str
            The initial observation (state description followed by the goal)
            and the action grammar block.
        """
        self._state = self.prepare(task)
        self._task = task
        self._done = self.goal_reached(self._state)
        self._reward = int(self._done)
        _logger.debug("Reset %s task %s.", self.kind, task.task_id)
        observation = f"{self.describe(self._state)}\n{self.goal_text()}"
        return observation, self.grammar

    def step(self, action: str) -> StepResult:
        """Play one action.

        Raises
        ------
        EnvironmentUsageError
            If no episode was started or the episode already ended.
        """
        if self._state is None:
            raise EnvironmentUsageError("Cannot step, call `reset` first.")
        if self._done:
            _logger.error("Step after the episode ended.")
            raise EnvironmentUsageError(
                "Cannot step, the episode is already done."
            )
        normalized = normalize_action(action)
        if normalized.startswith("think:"):
            return StepResult(THINK_OBSERVATION, 0, False)
        outcome = self.transition(self._state, normalized)
        if outcome is None:
            _logger.debug("Rejected action `%s`.", normalized)
            return StepResult(NOTHING_HAPPENS, 0, False)
        self._state, event = outcome
        if self.goal_reached(self._state):
            self._done = True
            self._reward = 1
        return StepResult(
            f"{event} {self.describe(self._state)}", self._reward, self._done
        )

    @property
    def state(self) -> _S:
        """Current world state."""
        if self._state is None:
            raise EnvironmentUsageError("No episode was started.")
        return self._state

    @property
    def done(self) -> bool:
        """Whether the current episode ended."""
        return self._done

    @property
    def reward(self) -> int:
        """Reward of the current episode so far."""
        return self._reward

    def state_hash(self) -> str:
        """Stable digest of the current world state."""
        return hashlib.sha256(repr(self.state).encode()).hexdigest()

    def describe_state(self) -> str:
        """Human-readable dump of the current world state."""
        return self.dump(self.state)


def make_environment(env_kind: str, **options: Any) -> TextWorld[Any]:
    """Create an environment by kind.

    Parameters
    ----------
    env_kind : str
        One of ``"gridworld"``, ``"gripper"`` or ``"blocksworld"``.
    **options
        Keyword arguments for the environment, e.g. ``window_size``.

    Raises
    ------
    EnvironmentConfigurationError
        If `env_kind` is unknown.
    """
    try:
        module_name, class_name = ENV_KINDS[env_kind]
    except KeyError as err:
        _logger.error("Unknown environment kind `%s`.", env_kind)
        raise EnvironmentConfigurationError(
            f"Unknown environment kind `{env_kind}`, expected one of "
            f"{', '.join(sorted(ENV_KINDS))}."
        ) from err
    module = importlib.import_module(module_name)
    environment_class = getattr(module, class_name)
    return environment_class(**options)


def make_task(
    env_kind: str, task_type: str, seed: int, **params: Any
) -> TaskSpec:
    """Build a single task, filling in its goal text.

    Examples
    --------
    >>> task = make_task(
    ...     "gripper", "transport", 7,
    ...     start=["rooma", "rooma"], goal=["roomb", "roomb"],
    ... )
    >>> print(task.goal_text.replace(". ", ".\\n"))
    The goal is to satisfy the following conditions: ball1 is at roomb.
    ball2 is at roomb.
    """
    environment = make_environment(env_kind)
    draft = TaskSpec(env_kind, task_type, "", seed, dict(params))
    environment.prepare(draft)
    return replace(draft, goal_text=environment.goal_text())


def generate_tasks(
    env_kind: str,
    task_type: str,
    n: int,
    seed: int,
    **params: Any,
) -> List[TaskSpec]:
    """Generate distinct, solvable tasks.

    Parameters
    ----------
    env_kind : str
        Environment kind.
    task_type : str
        Task type of that kind.
    n : int
        Number of tasks.
    seed : int
        Generator seed; task seeds are derived from it with
        :func:`~reflect_kit.utilities.expand_seeds`.
    **params
        Sizing parameters, e.g. ``balls=4`` or ``blocks=5``.

    Returns
    -------
    list of TaskSpec
        `n` tasks with distinct initial states or goals, each verified by
        :func:`~reflect_kit.environments.oracle_plan`. Tasks whose goal
        already holds initially are skipped.

    Raises
    ------
    ValueError
        If `n` is smaller than 1.
    TaskGenerationError
        If the parameters are unsatisfiable or not enough distinct tasks
        exist.
    """
    # Imported here, the oracle depends on this module.
    from reflect_kit._assembly import oracle_plan
    from reflect_kit._utilities import expand_seeds

    if n < 1:
        _logger.error("Invalid input: `n` must be at least 1.")
        raise ValueError(
            "Cannot generate tasks, `n` may not be smaller than 1."
        )
    environment = make_environment(env_kind)
    if task_type not in environment.task_types:
        raise TaskGenerationError(
            f"Cannot generate tasks, unknown {env_kind} task type "
            f"`{task_type}`."
        )
    environment.check_params(task_type, params)
    _logger.info("Generating %d %s %s tasks.", n, env_kind, task_type)
    tasks: List[TaskSpec] = []
    seen = set()
    attempts = 50 * n
    for task_seed in expand_seeds(seed, attempts):
        draft = TaskSpec(env_kind, task_type, "", task_seed, dict(params))
        state = environment.prepare(draft)
        if environment.goal_reached(state):
            continue
        task = replace(draft, goal_text=environment.goal_text())
        key = (environment.describe(state), task.goal_text)
        if key in seen:
            continue
        try:
            oracle_plan(task)
        except UnsolvableTaskError:
            _logger.debug("Skipping unsolvable task seed %d.", task_seed)
            continue
        seen.add(key)
        tasks.append(task)
        if len(tasks) == n:
            return tasks
    _logger.error("Only %d of %d tasks could be generated.", len(tasks), n)
    raise TaskGenerationError(
        f"Cannot generate {n} distinct {env_kind} {task_type} tasks, found "
        f"{len(tasks)} in {attempts} attempts."
    )


def task_to_document(task: TaskSpec) -> Dict[str, Any]:
    """JSON-ready mapping of a task."""
    return {
        "env_kind": task.env_kind,
        "task_type": task.task_type,
        "goal_text": task.goal_text,
        "seed": task.seed,
        "params": dict(task.params),
    }


def task_from_document(document: Mapping[str, Any]) -> TaskSpec:
    """Inverse of :func:`task_to_document`."""
    try:
        return TaskSpec(
            env_kind=str(document["env_kind"]),
            task_type=str(document["task_type"]),
            goal_text=str(document["goal_text"]),
            seed=int(document["seed"]),
            params=dict(document.get("params", {})),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise EnvironmentConfigurationError(
            f"Malformed task entry: {err}."
        ) from err


def save_tasks(tasks: "Sequence[TaskSpec]", path: "Union[str, Path]") -> None:
    """Write tasks as a JSON array."""
    Path(path).write_text(
        json.dumps([task_to_document(task) for task in tasks], indent=2)
        + "\n",
        encoding="utf-8",
    )


def load_tasks(path: "Union[str, Path]") -> List[TaskSpec]:
    """Read tasks written by :func:`save_tasks`.

    Raises
    ------
    EnvironmentConfigurationError
        If the file is not a JSON array of tasks.
    """
    try:
        documents = json.loads(Path(path).read_text(encoding="utf-8"))
    except ValueError as err:
        raise EnvironmentConfigurationError(
            f"Task file {path} is not valid JSON."
        ) from err
    if not isinstance(documents, list):
        raise EnvironmentConfigurationError(
            f"Task file {path} must hold a JSON array."
        )
    return [task_from_document(document) for document in documents]
