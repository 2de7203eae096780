"""Gripper world: a robot with two grippers moving balls between rooms."""
import logging
import re
import string
from dataclasses import dataclass, replace
from typing import Any, Iterator, List, Mapping, Optional, Tuple

from numpy.random import Generator

from reflect_kit._environment import TaskGenerationError, TaskSpec, TextWorld

_logger = logging.getLogger(__name__)

GRIPPERS = ("left", "right")

GRAMMAR = """\
You are a robot with a gripper that can move objects between different \
rooms. Your name is Robby.
There are three actions defined in this domain:
move <room1> <room2>: This action allows the robot to move from one room to \
another.
pick <obj> <room> <gripper>: This action allows the robot to pick up an \
object using the gripper.
drop <obj> <room> <gripper>: This action allows the robot to drop an object \
that it is carrying."""

_MOVE = re.compile(r"^move (?P<source>\S+) (?P<target>\S+)$")
_HANDLE = re.compile(
    r"^(?P<verb>pick|drop) (?P<ball>\S+) (?P<room>\S+) (?P<gripper>\S+)$"
)


@dataclass(frozen=True)
class GripperState:
    """Robot room and, per ball, a room name or the gripper holding it."""

    robot: str
    balls: Tuple[str, ...]


class Gripper(TextWorld[GripperState]):
    """Gripper world with the ``transport`` task type.

    Parameters ``balls`` (default 4) and ``rooms`` (default 2) size the
    world; ``start`` and ``goal`` optionally pin the room of every ball.
    """

    kind = "gripper"
    task_types = ("transport",)
    grammar = GRAMMAR

    def __init__(self, **options: Any) -> None:
        super().__init__(**options)
        self.rooms: Tuple[str, ...] = ()
        self.ball_names: Tuple[str, ...] = ()
        self.targets: Tuple[str, ...] = ()

    def check_params(self, task_type: str, params: Mapping[str, Any]) -> None:
        balls = params.get("balls", len(params.get("start", ())) or 4)
        rooms = params.get("rooms", 2)
        if not 1 <= balls <= 12:
            raise TaskGenerationError(
                f"Cannot build gripper task, `balls` must lie in [1, 12], "
                f"got {balls}."
            )
        if not 2 <= rooms <= 26:
            raise TaskGenerationError(
                f"Cannot build gripper task, `rooms` must lie in [2, 26], "
                f"got {rooms}."
            )
        for key in ("start", "goal"):
            layout = params.get(key)
            if layout is not None and len(layout) != balls:
                raise TaskGenerationError(
                    f"Cannot build gripper task, `{key}` must name a room "
                    f"for each of the {balls} balls."
                )

    def setup(self, task: TaskSpec, rng: Generator) -> GripperState:
        params = task.params
        balls = params.get("balls", len(params.get("start", ())) or 4)
        rooms = params.get("rooms", 2)
        letters = string.ascii_lowercase[:rooms]
        self.rooms = tuple(f"room{letter}" for letter in letters)
        self.ball_names = tuple(
            f"ball{index}" for index in range(1, balls + 1)
        )
        start = params.get("start")
        if start is None:
            drawn = rng.integers(rooms, size=balls)
            start = [self.rooms[index] for index in drawn]
        goal = params.get("goal")
        if goal is None:
            drawn = rng.integers(rooms, size=balls)
            goal = [self.rooms[index] for index in drawn]
        for room in list(start) + list(goal):
            if room not in self.rooms:
                raise TaskGenerationError(f"Unknown room `{room}`.")
        self.targets = tuple(goal)
        return GripperState(self.rooms[0], tuple(start))

    def goal_text(self) -> str:
        conditions = " ".join(
            f"{ball} is at {room}."
            for ball, room in zip(self.ball_names, self.targets)
        )
        return f"The goal is to satisfy the following conditions: {conditions}"

    def goal_reached(self, state: GripperState) -> bool:
        return state.balls == self.targets

    def _held(self, state: GripperState, gripper: str) -> Optional[int]:
        for index, where in enumerate(state.balls):
            if where == gripper:
                return index
        return None

    def transition(
        self, state: GripperState, action: str
    ) -> "Optional[Tuple[GripperState, str]]":
        match = _MOVE.match(action)
        if match:
            source, target = match["source"], match["target"]
            if source != state.robot or target not in self.rooms:
                return None
            if target == source:
                return None
            return (
                replace(state, robot=target),
                f"You move from {source} to {target}.",
            )
        match = _HANDLE.match(action)
        if not match or match["ball"] not in self.ball_names:
            return None
        room, gripper = match["room"], match["gripper"]
        if room != state.robot or gripper not in GRIPPERS:
            return None
        index = self.ball_names.index(match["ball"])
        balls = list(state.balls)
        if match["verb"] == "pick":
            if balls[index] != room or self._held(state, gripper) is not None:
                return None
            balls[index] = gripper
            event = (
                f"You pick up {match['ball']} in {room} with the {gripper} "
                f"gripper."
            )
        else:
            if balls[index] != gripper:
                return None
            balls[index] = room
            event = (
                f"You drop {match['ball']} in {room} from the {gripper} "
                "gripper."
            )
        return replace(state, balls=tuple(balls)), event

    def candidate_actions(self, state: GripperState) -> Iterator[str]:
        for ball, where in zip(self.ball_names, state.balls):
            if where in GRIPPERS:
                yield f"drop {ball} {state.robot} {where}"
        for gripper in GRIPPERS:
            if self._held(state, gripper) is not None:
                continue
            for ball, where in zip(self.ball_names, state.balls):
                if where == state.robot:
                    yield f"pick {ball} {state.robot} {gripper}"
        for room in self.rooms:
            if room != state.robot:
                yield f"move {state.robot} {room}"

    def describe(self, state: GripperState) -> str:
        lines: List[str] = [f"Robby is at {state.robot}."]
        for ball, where in zip(self.ball_names, state.balls):
            if where in GRIPPERS:
                lines.append(f"{ball} is held by the {where} gripper.")
            else:
                lines.append(f"{ball} is at {where}.")
        for gripper in GRIPPERS:
            if self._held(state, gripper) is None:
                lines.append(f"The {gripper} gripper is free.")
        return " ".join(lines)
