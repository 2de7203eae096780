"""Tests for module :mod:`~reflect_kit._assembly`."""
from typing import Iterator, Tuple

import numpy as np
import pytest
from reflect_kit._assembly import (
    StateGraph,
    array_assembler,
    explore,
    oracle_plan,
)
from reflect_kit._environment import (
    TaskSpec,
    UnsolvableTaskError,
    make_environment,
    make_task,
)
from scipy.sparse import coo_array


def dummy_edge_generator() -> Iterator[Tuple[int, int, float]]:
    """Generate dummy edges along a diagonal.

    :return: Simple dummy edge generator.
    :rtype: Iterator[tuple[int, int, float]]
    """
    indices = range(4)
    values = [0.0, 0.0, 1.0, 0.5]
    for index, value in zip(indices, values):
        yield index, index, value


def gripper_task() -> TaskSpec:
    """Generate a gripper task moving two balls to the other room.

    :return: Pinned gripper task.
    :rtype: TaskSpec
    """
    return make_task(
        "gripper",
        "transport",
        0,
        start=["rooma", "rooma"],
        goal=["roomb", "roomb"],
    )


def gridworld_task() -> TaskSpec:
    """Generate a gridworld task whose target is a single go-to away.

    :return: Pinned gridworld task.
    :rtype: TaskSpec
    """
    return make_task(
        "gridworld",
        "goto",
        0,
        layout={
            "door_row": 2,
            "door_color": "red",
            "objects": [["ball", "red", 1, 1]],
            "agent": [3, 3],
            "facing": "right",
            "target": 0,
        },
    )


class TestArrayAssembler:
    """Tests for :func:`~reflect_kit._assembly.array_assembler`."""

    def test_assembly(self) -> None:
        """Test simple dummy generator."""
        generator = dummy_edge_generator()
        result = array_assembler(4, generator)
        expected = coo_array(
            [
                [0.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 0.5],
            ]
        )
        comparison = result != expected
        assert comparison.size <= 0

    def test_empty(self) -> None:
        """Test that a generator without edges gives an all-zero array."""
        result = array_assembler(3, iter(()))
        assert result.shape == (3, 3)
        assert result.nnz == 0


class TestStateGraph:
    """Tests for :class:`~reflect_kit._assembly.StateGraph`."""

    def test_add(self) -> None:
        """Test that states are indexed once."""
        graph = StateGraph()
        assert graph.add("a") == (0, True)
        assert graph.add("b") == (1, True)
        assert graph.add("a") == (0, False)

    def test_adjacency(self) -> None:
        """Test that labelled edges become unit weights."""
        graph = StateGraph()
        for state in "abc":
            graph.add(state)
        graph.edges[(0, 1)] = "x"
        graph.edges[(1, 2)] = "y"
        dense = graph.adjacency().toarray()
        np.testing.assert_array_equal(
            dense, [[0, 1, 0], [0, 0, 1], [0, 0, 0]]
        )


class TestExplore:
    """Tests for :func:`~reflect_kit._assembly.explore`."""

    def test_budget(self) -> None:
        """Test that exploration gives up past the state budget."""
        task = gripper_task()
        environment = make_environment("gripper")
        start = environment.prepare(task)
        with pytest.raises(UnsolvableTaskError, match="exhausted"):
            explore(environment, start, max_states=3)


class TestOraclePlan:
    """Tests for :func:`~reflect_kit._assembly.oracle_plan`."""

    def test_blocksworld(self) -> None:
        """Test the shortest plan stacking one block."""
        task = make_task(
            "blocksworld",
            "restack",
            0,
            start=["table", "table"],
            goal=["b2", "table"],
        )
        assert oracle_plan(task) == ["pickup b1", "stack b1 b2"]

    def test_gridworld(self) -> None:
        """Test that a visible target is reached with one go-to."""
        assert oracle_plan(gridworld_task()) == ["go to red ball 1"]

    def test_gripper_length(self) -> None:
        """Test the optimal number of steps for two balls."""
        assert len(oracle_plan(gripper_task())) == 5

    @pytest.mark.parametrize(
        "task",
        [
            pytest.param(gripper_task(), id="kind=gripper"),
            pytest.param(gridworld_task(), id="kind=gridworld"),
        ],
    )
    def test_replay(self, task: TaskSpec) -> None:
        """Test that replaying the plan ends with reward 1."""
        environment = make_environment(task.env_kind)
        environment.reset(task)
        result = None
        for action in oracle_plan(task):
            result = environment.step(action)
        assert result is not None
        assert result.reward == 1
        assert result.done

    def test_budget_exceeded(self) -> None:
        """Test that an exhausted budget is reported as unsolvable."""
        with pytest.raises(UnsolvableTaskError):
            oracle_plan(gripper_task(), max_states=2)
