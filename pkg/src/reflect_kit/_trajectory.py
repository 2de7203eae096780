"""Episode history shared by the agent loop and the reflectors."""
from dataclasses import dataclass, field
from typing import List, NamedTuple, Tuple


class Step(NamedTuple):
    """One action and the observation it produced."""

    action: str
    observation: str


@dataclass
class Trajectory:
    """Append-only history of a task episode.

    Examples
    --------
    >>> trajectory = Trajectory("You are in rooma.")
    >>> trajectory.append("think: I need a ball.", "OK.")
    >>> trajectory.turn
    1
    >>> print(trajectory.render())
    Action 1: think: I need a ball.
    Observation 1: OK.
    >>> trajectory.cue
    'Action 2:'
    """

    initial_observation: str = ""
    _steps: List[Step] = field(default_factory=list, repr=False)

    @property
    def steps(self) -> Tuple[Step, ...]:
        return tuple(self._steps)

    @property
    def turn(self) -> int:
        """Number of completed steps."""
        return len(self._steps)

    def __len__(self) -> int:
        return len(self._steps)

    def append(self, action: str, observation: str) -> None:
        self._steps.append(Step(action, observation))

    @property
    def actions(self) -> List[str]:
        return [step.action for step in self._steps]

    @property
    def observations(self) -> List[str]:
        """Initial observation, when known, followed by step observations."""
        observations = [step.observation for step in self._steps]
        if self.initial_observation:
            observations.insert(0, self.initial_observation)
        return observations

    def render(self, last: int = 0) -> str:
        """Serialize steps as alternating action and observation lines.

        Parameters
        ----------
        last : int, optional
            Only render the last `last` steps, all steps when 0. Step numbers
            stay those of the full episode.
        """
        first = max(len(self._steps) - last, 0) if last else 0
        lines = []
        for number, step in enumerate(self._steps[first:], start=first + 1):
            lines.append(f"Action {number}: {step.action}")
            lines.append(f"Observation {number}: {step.observation}")
        return "\n".join(lines)

    @property
    def cue(self) -> str:
        """Prompt line asking for the next action."""
        return f"Action {self.turn + 1}:"
