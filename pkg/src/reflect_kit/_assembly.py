"""State-graph assembly and the breadth-first plan oracle."""
import logging
from collections import deque
from typing import Any, Dict, Hashable, Iterator, List, Tuple, TypeVar

from scipy.sparse import coo_array
from scipy.sparse.csgraph import breadth_first_order

from reflect_kit._environment import (
    TaskSpec,
    TextWorld,
    UnsolvableTaskError,
    make_environment,
)

_logger = logging.getLogger(__name__)

_T = TypeVar("_T", int, float)

#: Largest number of states the oracle explores before giving up.
MAX_STATES = 100_000


def array_assembler(
    state_count: int, edge_generator: Iterator[Tuple[int, int, _T]]
) -> coo_array:
    """Assemble an adjacency matrix using an edge generator.

    Assemble a square matrix in SciPy Coordinate (COO) array format from a
    generator yielding ``(row, column, weight)`` triples. Repeated
    coordinates are summed when the array is converted.

    Parameters
    ----------
    state_count : int
        How many states the generator refers to.
    edge_generator : Iterator[Tuple[int, int, _T]]
        Generator object yielding source index, target index and weight.

    Returns
    -------
    coo_array
        Adjacency matrix in SciPy COO array format.

    See Also
    --------
    oracle_plan : Shortest plan for a task.

    Examples
    --------
    Assemble a 3 by 3 matrix using a dummy generator, yielding entries along
    a diagonal:

    >>> def dummy_generator():
    ...     for index in range(3):
    ...         yield index, index, index + 1
    >>> adjacency = array_assembler(3, dummy_generator())
    >>> adjacency.toarray()
    array([[1, 0, 0],
           [0, 2, 0],
           [0, 0, 3]])
    """
    rows, cols, weights = [], [], []
    for row, col, weight in edge_generator:
        rows.append(row)
        cols.append(col)
        weights.append(weight)
    return coo_array((weights, (rows, cols)), shape=(state_count, state_count))


class StateGraph:
    """States reached from a task's initial state and the labelled edges.

    Attributes
    ----------
    states : list
        Reached states; index 0 is the initial state.
    edges : dict
        Maps ``(source, target)`` index pairs onto the first action that
        connects them.
    goals : list of int
        Indices of explored states satisfying the goal.
    """

    def __init__(self) -> None:
        self.states: List[Hashable] = []
        self.index: Dict[Hashable, int] = {}
        self.edges: Dict[Tuple[int, int], str] = {}
        self.goals: List[int] = []

    def add(self, state: Hashable) -> Tuple[int, bool]:
        """Index of `state` and whether it is new."""
        if state in self.index:
            return self.index[state], False
        self.index[state] = len(self.states)
        self.states.append(state)
        return self.index[state], True

    def triples(self) -> Iterator[Tuple[int, int, int]]:
        for source, target in self.edges:
            yield source, target, 1

    def adjacency(self) -> coo_array:
        return array_assembler(len(self.states), self.triples())


def explore(
    environment: "TextWorld[Any]", start: Hashable, max_states: int
) -> StateGraph:
    """Breadth-first exploration until the first goal state is expanded.

    Raises
    ------
    UnsolvableTaskError
        If the search exceeds `max_states` or runs out of states.
    """
    graph = StateGraph()
    graph.add(start)
    queue = deque([0])
    while queue:
        source = queue.popleft()
        state = graph.states[source]
        if environment.goal_reached(state):
            graph.goals.append(source)
            return graph
        for action in environment.candidate_actions(state):
            outcome = environment.transition(state, action)
            if outcome is None:
                continue
            target, is_new = graph.add(outcome[0])
            graph.edges.setdefault((source, target), action)
            if is_new:
                if len(graph.states) > max_states:
                    _logger.error("Oracle exceeded %d states.", max_states)
                    raise UnsolvableTaskError(
                        f"Search exhausted after {max_states} states."
                    )
                queue.append(target)
    raise UnsolvableTaskError("No reachable state satisfies the goal.")


def oracle_plan(task: TaskSpec, max_states: int = MAX_STATES) -> List[str]:
    """Shortest action sequence solving a task.

    Parameters
    ----------
    task : TaskSpec
        Task to solve.
    max_states : int, optional
        Exploration budget.

    Returns
    -------
    list of str
        Actions which, replayed through ``step``, end with reward 1. Empty
        when the goal already holds at reset.

    Raises
    ------
    UnsolvableTaskError
        If no plan exists within the exploration budget.

    Notes
    -----
    States are explored breadth first, the explored edges are assembled into
    a sparse adjacency matrix and the plan is read from the predecessor tree
    of :func:`scipy.sparse.csgraph.breadth_first_order`.

    Examples
    --------
    >>> from reflect_kit.environments import make_task
    >>> task = make_task(
    ...     "blocksworld", "restack", 0,
    ...     start=["table", "table"], goal=["b2", "table"],
    ... )
    >>> oracle_plan(task)
    ['pickup b1', 'stack b1 b2']
    """
    environment = make_environment(task.env_kind)
    start = environment.prepare(task)
    graph = explore(environment, start, max_states)
    goal = graph.goals[0]
    if goal == 0:
        return []
    order, predecessors = breadth_first_order(
        graph.adjacency().tocsr(),
        0,
        directed=True,
        return_predecessors=True,
    )
    _logger.debug(
        "Oracle visited %d of %d states.", len(order), len(graph.states)
    )
    path = [goal]
    while path[-1] != 0:
        previous = int(predecessors[path[-1]])
        if previous < 0:
            raise UnsolvableTaskError("Goal state is not connected.")
        path.append(previous)
    path.reverse()
    return [graph.edges[pair] for pair in zip(path, path[1:])]
