"""Agent loop and its modes.

Self-sustaining runs reflect on their own trajectories and thread a
constitution through a dataset; co-operative runs act with a frozen
constitution calibrated beforehand by a meta-advisor; ReAct and Reflexion
are the baselines.
"""

from reflect_kit._agent_loop import (
    MODES,
    REFLECTOR_KINDS,
    TRIGGERS,
    ConfigurationError,
    DatasetOutcome,
    Evaluation,
    RunConfig,
    TaskOutcome,
    assemble_action_prompt,
    calibrate_meta_advisor,
    critique,
    demonstrations,
    extract_action,
    run_cooperative,
    run_dataset,
    run_reflexion,
    run_react,
    run_task,
)
from reflect_kit._trajectory import Step, Trajectory
from reflect_kit._utilities import success_rate

__all__ = [
    "MODES",
    "REFLECTOR_KINDS",
    "TRIGGERS",
    "ConfigurationError",
    "DatasetOutcome",
    "Evaluation",
    "RunConfig",
    "Step",
    "TaskOutcome",
    "Trajectory",
    "assemble_action_prompt",
    "calibrate_meta_advisor",
    "critique",
    "demonstrations",
    "extract_action",
    "run_cooperative",
    "run_dataset",
    "run_reflexion",
    "run_react",
    "run_task",
    "success_rate",
]
