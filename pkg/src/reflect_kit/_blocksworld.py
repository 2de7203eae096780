"""Blocksworld: stacks of blocks rearranged by a single arm."""
import re
from dataclasses import dataclass
from typing import (
    Any,
    Dict,
    FrozenSet,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

from numpy.random import Generator

from reflect_kit._environment import TaskGenerationError, TaskSpec, TextWorld

TABLE = "table"
HAND = "hand"

GRAMMAR = """\
The robot has four actions: pickup, putdown, stack, and unstack. The domain \
assumes a world where there are a set of blocks that can be stacked on top \
of each other, an arm that can hold one block at a time, and a table where \
blocks can be placed.
The actions defined in this domain include:
pickup <block>: pick up a clear block
putdown <block>: put down a block on the table
stack <block> <block>: stack a block on top of another block.
unstack <block> <block>: unstack a block from on top of another block"""

_ACTION = re.compile(
    r"^(?P<verb>pickup|putdown|stack|unstack) (?P<block>\S+)"
    r"(?: (?P<other>\S+))?$"
)


@dataclass(frozen=True)
class BlocksState:
    """Per block what it rests on: another block, the table or the hand."""

    on: Tuple[str, ...]


def _arrangement(rng: Generator, blocks: Sequence[str]) -> List[str]:
    """Random forest of stacks as an on-relation aligned with `blocks`."""
    support: Dict[str, str] = {}
    tops: List[str] = []
    for position in rng.permutation(len(blocks)):
        block = blocks[position]
        if tops and rng.random() < 0.5:
            index = int(rng.integers(len(tops)))
            support[block] = tops[index]
            tops[index] = block
        else:
            support[block] = TABLE
            tops.append(block)
    return [support[block] for block in blocks]


class Blocksworld(TextWorld[BlocksState]):
    """Blocksworld with the ``restack`` task type.

    Parameter ``blocks`` (default 4) sizes the world; ``start`` and ``goal``
    optionally pin the arrangements, each a list holding per block the name
    of the block it is on or ``"table"``.
    """

    kind = "blocksworld"
    task_types = ("restack",)
    grammar = GRAMMAR

    def __init__(self, **options: Any) -> None:
        super().__init__(**options)
        self.blocks: Tuple[str, ...] = ()
        self.conditions: Tuple[Tuple[str, str], ...] = ()

    def check_params(self, task_type: str, params: Mapping[str, Any]) -> None:
        count = params.get("blocks", len(params.get("start", ())) or 4)
        if not 2 <= count <= 8:
            raise TaskGenerationError(
                f"Cannot build blocksworld task, `blocks` must lie in [2, 8], "
                f"got {count}."
            )
        for key in ("start", "goal"):
            layout = params.get(key)
            if layout is not None and len(layout) != count:
                raise TaskGenerationError(
                    f"Cannot build blocksworld task, `{key}` must give a "
                    f"support for each of the {count} blocks."
                )

    def setup(self, task: TaskSpec, rng: Generator) -> BlocksState:
        count = task.params.get(
            "blocks", len(task.params.get("start", ())) or 4
        )
        self.blocks = tuple(f"b{index}" for index in range(1, count + 1))
        start = task.params.get("start")
        if start is None:
            start = _arrangement(rng, self.blocks)
        goal = task.params.get("goal")
        if goal is None:
            goal = _arrangement(rng, self.blocks)
            if all(support == TABLE for support in goal):
                goal = [TABLE] + list(self.blocks[:-1])
        self._check_forest(start)
        self._check_forest(goal)
        self.conditions = tuple(
            (block, support)
            for block, support in zip(self.blocks, goal)
            if support != TABLE
        )
        if not self.conditions:
            raise TaskGenerationError(
                "Cannot build blocksworld task, the goal names no stacking."
            )
        return BlocksState(tuple(start))

    def _check_forest(self, supports: Sequence[str]) -> None:
        valid = set(self.blocks) | {TABLE}
        below: Dict[str, int] = {}
        for block, support in zip(self.blocks, supports):
            if support not in valid or support == block:
                raise TaskGenerationError(
                    f"Cannot build blocksworld task, `{block}` cannot rest "
                    f"on `{support}`."
                )
            if support != TABLE:
                below[support] = below.get(support, 0) + 1
        if any(count > 1 for count in below.values()):
            raise TaskGenerationError(
                "Cannot build blocksworld task, two blocks rest on one block."
            )
        mapping = dict(zip(self.blocks, supports))
        for block in self.blocks:
            seen = set()
            while block != TABLE:
                if block in seen:
                    raise TaskGenerationError(
                        "Cannot build blocksworld task, stacks form a cycle."
                    )
                seen.add(block)
                block = mapping[block]

    def goal_text(self) -> str:
        conditions = " ".join(
            f"{block} is on {support}." for block, support in self.conditions
        )
        return f"The goal is to satisfy the following conditions: {conditions}"

    def goal_reached(self, state: BlocksState) -> bool:
        mapping = dict(zip(self.blocks, state.on))
        return all(
            mapping[block] == support for block, support in self.conditions
        )

    def _covered(self, state: BlocksState) -> FrozenSet[str]:
        return frozenset(
            support for support in state.on if support not in (TABLE, HAND)
        )

    def _holding(self, state: BlocksState) -> Optional[str]:
        for block, support in zip(self.blocks, state.on):
            if support == HAND:
                return block
        return None

    def _clear(self, state: BlocksState, block: str) -> bool:
        index = self.blocks.index(block)
        return (
            state.on[index] != HAND and block not in self._covered(state)
        )

    def _with(
        self, state: BlocksState, block: str, support: str
    ) -> BlocksState:
        on = list(state.on)
        on[self.blocks.index(block)] = support
        return BlocksState(tuple(on))

    def transition(
        self, state: BlocksState, action: str
    ) -> "Optional[Tuple[BlocksState, str]]":
        match = _ACTION.match(action)
        if not match or match["block"] not in self.blocks:
            return None
        verb, block, other = match["verb"], match["block"], match["other"]
        held = self._holding(state)
        support = state.on[self.blocks.index(block)]
        if verb in ("pickup", "putdown"):
            if other is not None:
                return None
            if verb == "pickup":
                if held or support != TABLE or not self._clear(state, block):
                    return None
                return self._with(state, block, HAND), f"You pick up {block}."
            if held != block:
                return None
            return (
                self._with(state, block, TABLE),
                f"You put down {block} on the table.",
            )
        if other not in self.blocks or other == block:
            return None
        if verb == "stack":
            if held != block or not self._clear(state, other):
                return None
            return (
                self._with(state, block, other),
                f"You stack {block} on {other}.",
            )
        if held or support != other or not self._clear(state, block):
            return None
        return (
            self._with(state, block, HAND),
            f"You unstack {block} from {other}.",
        )

    def candidate_actions(self, state: BlocksState) -> Iterator[str]:
        held = self._holding(state)
        if held:
            yield f"putdown {held}"
            for block in self.blocks:
                if block != held and self._clear(state, block):
                    yield f"stack {held} {block}"
            return
        for block, support in zip(self.blocks, state.on):
            if not self._clear(state, block):
                continue
            if support == TABLE:
                yield f"pickup {block}"
            else:
                yield f"unstack {block} {support}"

    def describe(self, state: BlocksState) -> str:
        lines = []
        for block, support in zip(self.blocks, state.on):
            if support == TABLE:
                lines.append(f"{block} is on the table.")
            elif support != HAND:
                lines.append(f"{block} is on {support}.")
        clear = [block for block in self.blocks if self._clear(state, block)]
        lines.extend(f"{block} is clear." for block in clear)
        held = self._holding(state)
        lines.append(
            f"You are holding {held}." if held else "The arm is empty."
        )
        return " ".join(lines)

    def dump(self, state: BlocksState) -> str:
        """Stacks drawn bottom to top, one per line."""
        mapping = dict(zip(self.blocks, state.on))
        above = {support: block for block, support in mapping.items()}
        lines = []
        for block in self.blocks:
            if mapping[block] != TABLE:
                continue
            stack = [block]
            while stack[-1] in above:
                stack.append(above[stack[-1]])
            lines.append("table | " + " ".join(stack))
        held = self._holding(state)
        lines.append(f"hand  | {held or '-'}")
        return "\n".join(lines)
