"""Two-room gridworld with keys, balls, boxes and a door between rooms."""
import logging
import re
from collections import deque
from dataclasses import dataclass, replace
from typing import (
    Any,
    Dict,
    Iterator,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Set,
    Tuple,
)

from numpy.random import Generator

from reflect_kit._environment import (
    EnvironmentConfigurationError,
    TaskGenerationError,
    TaskSpec,
    TextWorld,
)

_logger = logging.getLogger(__name__)

COLORS = ("red", "green", "blue", "purple", "yellow", "grey")
OBJECT_KINDS = ("ball", "box", "key")
DOOR_STATES = ("open", "closed", "locked")
FACINGS = ("up", "right", "down", "left")
_DELTAS = ((-1, 0), (0, 1), (1, 0), (0, -1))

GRAMMAR = """\
You are placed in a room and you need to accomplish the given goal with \
actions.
You can use the following actions:
- turn right
- turn left
- move forward
- go to <obj> <id>
- pick up <obj> <id>
- go through <door> <id>: <door> must be an open door.
- toggle and go through <door> <id>: <door> can be a closed door or a \
locked door. If you want to open a locked door, you need to carry a key that \
is of the same color as the locked door.
- toggle: there is a closed or locked door right in front of you and you \
can toggle it."""

_LABEL = (
    r"(?P<color>[a-z]+) (?:(?P<state>open|closed|locked) )?"
    r"(?P<kind>ball|box|key|door) (?P<number>\d+)"
)
_GO_TO = re.compile(rf"^go to {_LABEL}$")
_PICK_UP = re.compile(rf"^pick up {_LABEL}$")
_GO_THROUGH = re.compile(rf"^go through {_LABEL}$")
_TOGGLE_THROUGH = re.compile(rf"^toggle and go through {_LABEL}$")

Cell = Tuple[int, int]


class GridObject(NamedTuple):
    """A carriable object; ``number`` tells same-colored objects apart."""

    kind: str
    color: str
    number: int

    @property
    def label(self) -> str:
        return f"{self.color} {self.kind} {self.number}"


@dataclass(frozen=True)
class GridState:
    """Dynamic part of the world; ``positions`` is ``None`` when carried."""

    agent: Cell
    facing: int
    carrying: Optional[int]
    positions: Tuple[Optional[Cell], ...]
    door: str


class Gridworld(TextWorld[GridState]):
    """Gridworld with the ``goto``, ``pickup`` and ``unlock`` task types.

    Two square rooms of ``room_size`` cells (default 3) are separated by a
    wall with one door. ``distractors`` (default 2) extra objects are
    scattered around. ``layout`` pins the complete initial state.

    Parameters
    ----------
    window_size : int, optional
        When given, observations only list what lies inside the square
        window of this size in front of the agent.
    """

    kind = "gridworld"
    task_types = ("goto", "pickup", "unlock")
    grammar = GRAMMAR

    def __init__(self, window_size: Optional[int] = None, **options: Any):
        super().__init__(window_size=window_size, **options)
        if window_size is not None and window_size < 1:
            raise EnvironmentConfigurationError(
                "Cannot create gridworld, `window_size` must be at least 1."
            )
        self.window_size = window_size
        self.size = 0
        self.wall = 0
        self.door_cell: Cell = (0, 0)
        self.door_color = ""
        self.objects: Tuple[GridObject, ...] = ()
        self.task_type = ""
        self.target: Optional[int] = None

    # Setup.

    def check_params(self, task_type: str, params: Mapping[str, Any]) -> None:
        size = params.get("room_size", 3)
        distractors = params.get("distractors", 2)
        if not 2 <= size <= 6:
            raise TaskGenerationError(
                f"Cannot build gridworld task, `room_size` must lie in "
                f"[2, 6], got {size}."
            )
        free = 2 * size * size - 3
        if distractors < 0 or distractors + 1 > free:
            raise TaskGenerationError(
                f"Cannot build gridworld task, {distractors + 1} objects do "
                f"not fit in {free} free cells."
            )

    def setup(self, task: TaskSpec, rng: Generator) -> GridState:
        self.task_type = task.task_type
        layout = task.params.get("layout")
        self.size = task.params.get("room_size", 3)
        self.wall = self.size + 1
        if layout is not None:
            return self._pinned(layout)
        return self._sampled(task, rng)

    def _pinned(self, layout: Mapping[str, Any]) -> GridState:
        try:
            self.door_cell = (int(layout["door_row"]), self.wall)
            self.door_color = str(layout["door_color"])
            self.objects = tuple(
                GridObject(kind, color, 0)
                for kind, color, _, _ in layout["objects"]
            )
            positions = tuple(
                (int(row), int(col)) for _, _, row, col in layout["objects"]
            )
            self.objects = self._numbered(self.objects)
            self.target = layout.get("target")
            state = GridState(
                agent=(int(layout["agent"][0]), int(layout["agent"][1])),
                facing=FACINGS.index(layout.get("facing", "right")),
                carrying=None,
                positions=positions,
                door=str(layout.get("door_state", "closed")),
            )
        except (KeyError, TypeError, ValueError) as err:
            raise EnvironmentConfigurationError(
                f"Malformed gridworld layout: {err}."
            ) from err
        if state.door not in DOOR_STATES:
            raise EnvironmentConfigurationError(
                f"Unknown door state `{state.door}`."
            )
        cells = [state.agent, *positions]
        if len(set(cells)) != len(cells) or not all(
            self._interior(cell) for cell in cells
        ):
            raise EnvironmentConfigurationError(
                "Gridworld layout places things on walls or on each other."
            )
        if self.task_type != "unlock" and self.target is None:
            raise EnvironmentConfigurationError(
                "Gridworld layout needs a `target` object index."
            )
        return state

    def _sampled(self, task: TaskSpec, rng: Generator) -> GridState:
        size = self.size
        door_row = int(rng.integers(1, size + 1))
        self.door_cell = (door_row, self.wall)
        self.door_color = COLORS[int(rng.integers(len(COLORS)))]
        left = [(r, c) for r in range(1, size + 1) for c in range(1, size + 1)]
        right = [
            (r, c)
            for r in range(1, size + 1)
            for c in range(self.wall + 1, self.wall + size + 1)
        ]
        reserved = {(door_row, self.wall - 1), (door_row, self.wall + 1)}
        free_left = [cell for cell in left if cell not in reserved]
        agent = free_left[int(rng.integers(len(free_left)))]
        facing = int(rng.integers(4))
        taken = reserved | {agent}
        objects: List[GridObject] = []
        positions: List[Cell] = []

        def place(kind: str, color: str, cells: List[Cell]) -> None:
            options = [cell for cell in cells if cell not in taken]
            if not options:
                raise TaskGenerationError(
                    "Cannot build gridworld task, no free cell left."
                )
            cell = options[int(rng.integers(len(options)))]
            taken.add(cell)
            objects.append(GridObject(kind, color, 0))
            positions.append(cell)

        door = "closed"
        if task.task_type == "unlock":
            door = "locked"
            place("key", self.door_color, left)
            self.target = None
        else:
            kinds = (
                OBJECT_KINDS if task.task_type == "goto" else ("ball", "box")
            )
            kind = kinds[int(rng.integers(len(kinds)))]
            place(kind, COLORS[int(rng.integers(len(COLORS)))], left + right)
            self.target = 0
        for _ in range(task.params.get("distractors", 2)):
            kind = ("ball", "box")[int(rng.integers(2))]
            place(kind, COLORS[int(rng.integers(len(COLORS)))], left + right)
        self.objects = self._numbered(objects)
        return GridState(agent, facing, None, tuple(positions), door)

    @staticmethod
    def _numbered(
        objects: "Sequence[GridObject]",
    ) -> Tuple[GridObject, ...]:
        counts: Dict[Tuple[str, str], int] = {}
        numbered = []
        for item in objects:
            key = (item.kind, item.color)
            counts[key] = counts.get(key, 0) + 1
            numbered.append(item._replace(number=counts[key]))
        return tuple(numbered)

    # Geometry.

    def _interior(self, cell: Cell) -> bool:
        row, col = cell
        return (
            1 <= row <= self.size
            and 1 <= col <= 2 * self.size + 1
            and col != self.wall
        )

    def _occupant(self, state: GridState, cell: Cell) -> Optional[int]:
        for index, position in enumerate(state.positions):
            if position == cell:
                return index
        return None

    def _passable(self, state: GridState, cell: Cell) -> bool:
        if cell == self.door_cell:
            return state.door == "open"
        return self._interior(cell) and self._occupant(state, cell) is None

    def _front(self, state: GridState) -> Cell:
        delta = _DELTAS[state.facing]
        return (state.agent[0] + delta[0], state.agent[1] + delta[1])

    def _route(
        self, state: GridState, goals: "Set[Cell]"
    ) -> Optional[Cell]:
        """First goal cell reached by breadth-first search from the agent."""
        queue = deque([state.agent])
        seen = {state.agent}
        while queue:
            cell = queue.popleft()
            if cell in goals:
                return cell
            for delta in _DELTAS:
                step = (cell[0] + delta[0], cell[1] + delta[1])
                if step not in seen and self._passable(state, step):
                    seen.add(step)
                    queue.append(step)
        return None

    def _approach(
        self, state: GridState, target: Cell
    ) -> "Optional[Tuple[Cell, int]]":
        """Cell next to `target` the agent can walk to and the facing there."""
        goals = set()
        for delta in _DELTAS:
            cell = (target[0] - delta[0], target[1] - delta[1])
            if cell == state.agent or self._passable(state, cell):
                goals.add(cell)
        cell = self._route(state, goals)
        if cell is None:
            return None
        delta = (target[0] - cell[0], target[1] - cell[1])
        return cell, _DELTAS.index(delta)

    def _sides(self, state: GridState) -> "Optional[Tuple[Cell, Cell, int]]":
        """Near side, far side and crossing direction of the door."""
        row, wall = self.door_cell
        if state.agent == self.door_cell:
            if FACINGS[state.facing] == "right":
                return self.door_cell, (row, wall + 1), 1
            if FACINGS[state.facing] == "left":
                return self.door_cell, (row, wall - 1), 3
            return None
        if state.agent[1] < wall:
            return (row, wall - 1), (row, wall + 1), 1
        return (row, wall + 1), (row, wall - 1), 3

    # Labels.

    def _resolve(
        self, state: GridState, match: "re.Match[str]"
    ) -> "Optional[Tuple[str, Optional[int]]]":
        kind, color = match["kind"], match["color"]
        number = int(match["number"])
        if kind == "door":
            if color != self.door_color or number != 1:
                return None
            if match["state"] and match["state"] != state.door:
                return None
            return "door", None
        if match["state"]:
            return None
        for index, item in enumerate(self.objects):
            if item == GridObject(kind, color, number):
                return "object", index
        return None

    def door_label(self, state: GridState, with_state: bool = False) -> str:
        if with_state:
            return f"{self.door_color} {state.door} door 1"
        return f"{self.door_color} door 1"

    # Dynamics.

    def transition(
        self, state: GridState, action: str
    ) -> "Optional[Tuple[GridState, str]]":
        if action in ("turn left", "turn right"):
            turn = -1 if action == "turn left" else 1
            return (
                replace(state, facing=(state.facing + turn) % 4),
                f"You {action}.",
            )
        if action == "move forward":
            front = self._front(state)
            if not self._passable(state, front):
                return None
            return replace(state, agent=front), "You move forward."
        if action == "toggle":
            return self._toggle(state)
        for pattern, handler in (
            (_GO_TO, self._go_to),
            (_PICK_UP, self._pick_up),
            (_GO_THROUGH, self._go_through),
            (_TOGGLE_THROUGH, self._toggle_through),
        ):
            match = pattern.match(action)
            if match:
                resolved = self._resolve(state, match)
                if resolved is None:
                    return None
                return handler(state, *resolved)
        return None

    def _go_to(
        self, state: GridState, kind: str, index: Optional[int]
    ) -> "Optional[Tuple[GridState, str]]":
        if kind == "door":
            target, label = self.door_cell, self.door_label(state)
        else:
            position = state.positions[index]
            if position is None:
                return None
            target, label = position, self.objects[index].label
        approach = self._approach(state, target)
        if approach is None:
            return None
        cell, facing = approach
        if cell == state.agent and facing == state.facing:
            return None
        return (
            replace(state, agent=cell, facing=facing),
            f"You go to the {label}.",
        )

    def _pick_up(
        self, state: GridState, kind: str, index: Optional[int]
    ) -> "Optional[Tuple[GridState, str]]":
        if kind == "door" or state.carrying is not None:
            return None
        if state.positions[index] != self._front(state):
            return None
        positions = list(state.positions)
        positions[index] = None
        return (
            replace(state, carrying=index, positions=tuple(positions)),
            f"You pick up the {self.objects[index].label}.",
        )

    def _carries_key(self, state: GridState) -> bool:
        if state.carrying is None:
            return False
        item = self.objects[state.carrying]
        return item.kind == "key" and item.color == self.door_color

    def _cross(
        self, state: GridState, door: str
    ) -> "Optional[GridState]":
        sides = self._sides(state)
        if sides is None:
            return None
        near, far, facing = sides
        if near != state.agent and self._route(state, {near}) is None:
            return None
        if not self._interior(far) or self._occupant(state, far) is not None:
            return None
        return replace(state, agent=far, facing=facing, door=door)

    def _go_through(
        self, state: GridState, kind: str, index: Optional[int]
    ) -> "Optional[Tuple[GridState, str]]":
        if kind != "door" or state.door != "open":
            return None
        crossed = self._cross(state, "open")
        if crossed is None:
            return None
        return crossed, f"You go through the {self.door_label(state)}."

    def _toggle_through(
        self, state: GridState, kind: str, index: Optional[int]
    ) -> "Optional[Tuple[GridState, str]]":
        if kind != "door" or state.door == "open":
            return None
        if state.door == "locked" and not self._carries_key(state):
            return None
        verb = "unlock" if state.door == "locked" else "open"
        crossed = self._cross(replace(state, door="open"), "open")
        if crossed is None:
            return None
        return (
            crossed,
            f"You {verb} the {self.door_label(state)} and go through it.",
        )

    def _toggle(
        self, state: GridState
    ) -> "Optional[Tuple[GridState, str]]":
        if self._front(state) != self.door_cell:
            return None
        label = self.door_label(state)
        if state.door == "open":
            if state.agent == self.door_cell:
                return None
            return replace(state, door="closed"), f"You close the {label}."
        if state.door == "locked":
            if not self._carries_key(state):
                return None
            return replace(state, door="open"), f"You unlock the {label}."
        return replace(state, door="open"), f"You open the {label}."

    # Goals.

    def goal_text(self) -> str:
        if self.task_type == "unlock":
            return f"open the {self.door_color} door 1"
        label = self.objects[self.target].label
        if self.task_type == "goto":
            return f"go to the {label}"
        return f"pick up the {label}"

    def goal_reached(self, state: GridState) -> bool:
        if self.task_type == "unlock":
            return state.door == "open"
        if self.task_type == "pickup":
            return state.carrying == self.target
        return state.positions[self.target] == self._front(state)

    def candidate_actions(self, state: GridState) -> Iterator[str]:
        for index, item in enumerate(self.objects):
            if state.positions[index] is not None:
                yield f"pick up {item.label}"
        for index, item in enumerate(self.objects):
            if state.positions[index] is not None:
                yield f"go to {item.label}"
        door = self.door_label(state)
        yield "toggle"
        yield f"toggle and go through {door}"
        yield f"go through {door}"
        yield f"go to {door}"
        yield "move forward"
        yield "turn left"
        yield "turn right"

    # Observations.

    def _visible(self, state: GridState, cell: Cell) -> bool:
        if self.window_size is None:
            return True
        forward_row, forward_col = _DELTAS[state.facing]
        row, col = cell[0] - state.agent[0], cell[1] - state.agent[1]
        forward = row * forward_row + col * forward_col
        lateral = abs(row * forward_col - col * forward_row)
        return (
            0 <= forward < self.window_size
            and lateral <= self.window_size // 2
        )

    def _room(self, cell: Cell) -> str:
        if cell == self.door_cell:
            return "the doorway"
        return "the left room" if cell[1] < self.wall else "the right room"

    def _thing(self, state: GridState, cell: Cell) -> str:
        if cell == self.door_cell:
            return f"a {self.door_label(state, with_state=True)}"
        occupant = self._occupant(state, cell)
        if occupant is not None:
            return f"a {self.objects[occupant].label}"
        if self._interior(cell):
            return "an empty cell"
        return "a wall"

    def describe(self, state: GridState) -> str:
        row, col = state.agent
        parts = [
            f"You are in {self._room(state.agent)} at row {row}, column "
            f"{col}, facing {FACINGS[state.facing]}."
        ]
        if state.carrying is None:
            parts.append("You are carrying nothing.")
        else:
            parts.append(
                f"You are carrying a {self.objects[state.carrying].label}."
            )
        front = self._thing(state, self._front(state))
        parts.append(f"In front of you is {front}.")
        things = [
            (cell, f"a {self.objects[index].label}")
            for index, cell in enumerate(state.positions)
            if cell is not None
        ]
        things.append(
            (self.door_cell, f"a {self.door_label(state, with_state=True)}")
        )
        seen = [
            f"{text} at row {cell[0]}, column {cell[1]}"
            for cell, text in sorted(things)
            if self._visible(state, cell)
        ]
        if seen:
            parts.append(f"You see: {'; '.join(seen)}.")
        else:
            parts.append("You see nothing else.")
        return " ".join(parts)

    def dump(self, state: GridState) -> str:
        """Map of the grid, one text line per row."""
        symbols = {"ball": "b", "box": "x", "key": "k"}
        lines = []
        for row in range(self.size + 2):
            line = []
            for col in range(2 * self.size + 3):
                cell = (row, col)
                occupant = self._occupant(state, cell)
                if cell == state.agent:
                    line.append("^>v<"[state.facing])
                elif cell == self.door_cell:
                    line.append(state.door[0].upper())
                elif occupant is not None:
                    line.append(symbols[self.objects[occupant].kind])
                elif self._interior(cell):
                    line.append(".")
                else:
                    line.append("#")
            lines.append("".join(line))
        return "\n".join(lines)
