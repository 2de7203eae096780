"""Prompt texts and the helpers that lay them out."""
import json
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

#: Headers introducing each constitution category inside a prompt.
CATEGORY_HEADERS: Dict[str, str] = {
    "abstract": "Here are some aspects you have learnt so far.",
    "error": (
        "Here are some mistakes you have done so far, and potential "
        "solutions that can be used in next turns."
    ),
    "progress": (
        "Here are some feedback about your progress so far and guidelines "
        "for next steps."
    ),
}

MEMORY_HEADER = "Here are your reflections from previous trials."

_NUMBER_WORDS = ("zero", "one", "two", "three", "four", "five")

#: Environment kinds mapped onto the example family used in reflection
#: prompts.
PROMPT_FAMILIES: Dict[str, str] = {
    "household": "household",
    "gridworld": "gridworld",
    "gripper": "planning",
    "blocksworld": "planning",
}

HOUSEHOLD_GRAMMAR = """\
Interact with a household to solve a task.
You need to generate actions that strictly follow the below templates:
1. goto [location]
2. take [object] from [location] put [object] in/on [location]
3. open [something]
4. close [something]
5. toggle [object][location]
6. clean [object] with [something]
7. heat [object] with [receptacle]
8. cool [object] with [receptacle]"""

_ABSTRACT_EXAMPLES = {
    "household": (
        "Use microwave for heating or Tomatoes can be found in fridge, "
        "among others."
    ),
    "gridworld": (
        "If you are facing a wall, turn around and continue exploration."
    ),
    "planning": "If you have only one arm, you cannot pick up two items",
}

_ERROR_EXAMPLES = {
    "household": (
        "[{'mistake': 'Cabinet was not opened', "
        "'solution': 'Open the cabinet next time'}, ...]"
    ),
    "gridworld": (
        "[{'mistake': 'Going in circles', 'solution': 'Stop turning same "
        "way and going in circles'}, ...]"
    ),
    "planning": (
        "[{'mistake': 'Attempted to pick up a block that is stacked', "
        "'solution': 'Should use unstack'}, ...]"
    ),
}

_PROGRESS_EXAMPLES = {
    "household": (
        "Example: For a task of placing a heated apple in a garbage, one "
        "feedback example could be `You have heated the apple, now you "
        "should pick it up and go to garbagecan`"
    ),
    "gridworld": (
        "Example: For a task of going through a green door, one feedback "
        "example could be `You have located a green key, now pick it up "
        "and locate a green door.`"
    ),
    "planning": (
        "Example: An example could be: You have moved to roomb with ball1 "
        "and ball2, now you should drop ball1 and ball2 in roomb."
    ),
}

_ABSTRACT_TEMPLATE = """\
Generate a constitution specific for solving a {task_type} task and about \
the environment.
The constitution should be solely based on the observation in this \
environment, and should not contain general rules about regular world.
The rules in the constitution should be generalizable, abstract, correct, \
and profound.
Some examples could include: {example}
The constitution should be in a python list format (enclosed in [])"""

_ERROR_TEMPLATE = """\
Generate a constitution specific for solving this task covering the \
potential mistakes performed so far and your suggestions on how to fix it.
The constitution should be solely based on the observation in this \
environment, and should not contain general rules about regular world.
The constitution should be in a python list of dictionaries format without \
any extra text in a single line.
You should thoroughly analyze the current trajectory and only provide \
feedback if a mistake happened so far. Sometimes mistakes can be indicated \
by the observation `Nothing happens`.
DO NOT predict future mistakes, or share advice about future steps.
If there are no mistakes so far, then return an empty list
If efficiency of the trajectory can be improved, you should add that as well.
Here is an example: {example}"""

_PROGRESS_TEMPLATE = """\
Critically examine the trajectory so far to solve the task, and generate \
explicit feedback for solving leftover subtasks.
{example}
The constitution should be in a python list format (enclosed in []) \
without any extra text in a single line."""

_EXPLORATION_TEMPLATE = """\
Explore the environment broadly using the observations below, collected \
while solving tasks of several types.
Generate a constitution about the environment itself that is useful for \
any task type, not only for the tasks you have seen.
The constitution should be solely based on the observation in this \
environment, and should not contain general rules about regular world.
Some examples could include: {example}
The constitution should be in a python list format (enclosed in [])"""

_SUMMARY_PURPOSE = {
    "abstract": (
        "The resulting summary should be usable by any other agent to "
        "quickly solve tasks by using the knowledge built using your "
        "experience."
    ),
    "error": (
        "The resulting summary should be usable by any other agent to "
        "avoid making any mistakes that were made."
    ),
}

_SUMMARY_FORMAT = {
    "abstract": (
        "The summarized constitution should be in a python list format "
        "(enclosed in [])."
    ),
    "error": (
        "The summarized constitution should be in a python list of "
        "dictionaries format (enclosed in []) with the keys 'mistake' and "
        "'solution'."
    ),
}

_SUMMARY_TEMPLATE = """\
Inspect and summarize the constitution you have build over time by \
exploring the environment and solving numerous tasks.
{purpose}
There should not be duplicates in the constitution. You should be clear and \
concise while summarizing.
You can create new rules by summarizing multiple rules together without \
losing information.
Here is the current constitution: {constitution}
{output_format}"""


@dataclass(frozen=True)
class Prompt:
    """A prompt split into a system block and a user block.

    Attributes
    ----------
    system : str
        Environment description and action templates, may be empty.
    user : str
        Everything else: guidance, examples, goal and trajectory.
    """

    system: str
    user: str

    @property
    def text(self) -> str:
        """Both blocks joined by a blank line, empty blocks left out."""
        return "\n\n".join(part for part in (self.system, self.user) if part)

    def __str__(self) -> str:
        return self.text


def family_of(env_kind: str) -> str:
    """Return the example family for an environment kind.

    Unknown kinds fall back to the planning family.
    """
    return PROMPT_FAMILIES.get(env_kind, "planning")


def reflection_instructions(
    category: str, task_type: str, family: str
) -> str:
    """Return the instruction block for one reflection category.

    Parameters
    ----------
    category : str
        One of ``"abstract"``, ``"error"`` or ``"progress"``.
    task_type : str
        Task type named in the abstract instructions.
    family : str
        Example family, see :data:`PROMPT_FAMILIES`.

    Returns
    -------
    str
        Instructions ending with the expected output format.

    Raises
    ------
    ValueError
        If `category` is not a reflection category.
    """
    if category == "abstract":
        return _ABSTRACT_TEMPLATE.format(
            task_type=task_type, example=_ABSTRACT_EXAMPLES[family]
        )
    if category == "error":
        return _ERROR_TEMPLATE.format(example=_ERROR_EXAMPLES[family])
    if category == "progress":
        return _PROGRESS_TEMPLATE.format(example=_PROGRESS_EXAMPLES[family])
    raise ValueError(f"Unknown reflection category `{category}`.")


def exemplar_block(exemplars: "Sequence[Tuple[str, str]]") -> str:
    """Lay out few-shot (trajectory excerpt, output) pairs."""
    if not exemplars:
        return ""
    lines = ["Here are some examples of trajectories and the expected output."]
    for index, (excerpt, output) in enumerate(exemplars, start=1):
        lines.append(f"Example {index}:")
        lines.append(excerpt)
        lines.append(f"Output: {output}")
    return "\n".join(lines)


def build_reflection_prompt(
    category: str,
    *,
    goal: str,
    task_type: str,
    family: str,
    constitution: str,
    trajectory: str,
    exemplars: "Sequence[Tuple[str, str]]" = (),
) -> Prompt:
    """Assemble the prompt for one reflection category.

    The instructions come first, followed by the exemplars (if any), the
    task goal, the rendered constitution (if any) and the trajectory.
    """
    sections = [reflection_instructions(category, task_type, family)]
    block = exemplar_block(exemplars)
    if block:
        sections.append(block)
    sections.append(f"Your task is to: {goal}")
    if constitution:
        sections.append(constitution)
    sections.append(f"Here is the trajectory so far:\n{trajectory}")
    return Prompt("", "\n\n".join(sections))


def build_exploration_prompt(
    family: str, observations: "Iterable[str]"
) -> Prompt:
    """Assemble the task-agnostic exploration prompt."""
    listing = "\n".join(f"- {observation}" for observation in observations)
    text = _EXPLORATION_TEMPLATE.format(example=_ABSTRACT_EXAMPLES[family])
    return Prompt("", f"{text}\n\nObservations:\n{listing}")


def build_summarization_prompt(
    category: str, entries: "Sequence[object]"
) -> str:
    """Return the summarization prompt for one long-term category.

    Parameters
    ----------
    category : str
        ``"abstract"`` or ``"error"``.
    entries : sequence
        Rule texts (abstract) or ``{"mistake", "solution"}`` mappings
        (error). Serialized as one single-line JSON list.

    Returns
    -------
    str
        The prompt text.
    """
    return _SUMMARY_TEMPLATE.format(
        purpose=_SUMMARY_PURPOSE[category],
        constitution=json.dumps(list(entries), ensure_ascii=False),
        output_format=_SUMMARY_FORMAT[category],
    )


def few_shot_block(examples: "Sequence[str]") -> str:
    """Lay out worked examples for the action prompt."""
    if not examples:
        return ""
    count = len(examples)
    if count == 1:
        header = (
            "Here is an example. It is very relevant. Please use the actions "
            "in this example as your guidelines."
        )
    else:
        number = _NUMBER_WORDS[count] if count < len(_NUMBER_WORDS) else count
        header = (
            f"Here are {number} examples. They are very relevant. Please use "
            "the actions in these examples as your guidelines."
        )
    body = "\n\n".join(
        f"Example {index}:\n{example}"
        for index, example in enumerate(examples, start=1)
    )
    return f"{header}\n{body}"


def memory_block(memory: "Sequence[str]") -> str:
    """Lay out task-local reflections from earlier trials."""
    if not memory:
        return ""
    lines = [MEMORY_HEADER]
    lines.extend(
        f"Trial {index}: {text}" for index, text in enumerate(memory, start=1)
    )
    return "\n".join(lines)


def goal_block(goal: str, initial_observation: "Optional[str]" = None) -> str:
    """Return the task line, followed by the initial observation if known."""
    if initial_observation:
        return (
            f"Your task is to: {goal}\n"
            f"Initial observation: {initial_observation}"
        )
    return f"Your task is to: {goal}"
