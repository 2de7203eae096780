"""Deterministic text-world environments.

This module provides the gridworld, gripper and blocksworld environments,
task generation and persistence, and a breadth-first oracle that finds the
shortest plan for any generated task.
"""

from reflect_kit._assembly import array_assembler, oracle_plan
from reflect_kit._blocksworld import Blocksworld, BlocksState
from reflect_kit._environment import (
    ENV_KINDS,
    NOTHING_HAPPENS,
    THINK_OBSERVATION,
    EnvironmentConfigurationError,
    EnvironmentUsageError,
    StepResult,
    TaskGenerationError,
    TaskSpec,
    TextWorld,
    UnsolvableTaskError,
    generate_tasks,
    load_tasks,
    make_environment,
    make_task,
    normalize_action,
    save_tasks,
)
from reflect_kit._gridworld import GridState, Gridworld
from reflect_kit._gripper import Gripper, GripperState

__all__ = [
    "ENV_KINDS",
    "NOTHING_HAPPENS",
    "THINK_OBSERVATION",
    "BlocksState",
    "Blocksworld",
    "EnvironmentConfigurationError",
    "EnvironmentUsageError",
    "GridState",
    "Gridworld",
    "Gripper",
    "GripperState",
    "StepResult",
    "TaskGenerationError",
    "TaskSpec",
    "TextWorld",
    "UnsolvableTaskError",
    "array_assembler",
    "generate_tasks",
    "load_tasks",
    "make_environment",
    "make_task",
    "normalize_action",
    "oracle_plan",
    "save_tasks",
]
