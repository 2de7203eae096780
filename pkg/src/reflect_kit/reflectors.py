"""Reflection strategies turning trajectories into constitution rules.

The neural reflector prompts a model, the symbolic reflector matches
regular-expression trackers against observations and the neuro-symbolic
reflector prompts a model with exemplars harvested symbolically.
"""

from reflect_kit._reflectors import (
    ErrorHeuristics,
    ExemplarSet,
    NeuralReflector,
    NeuroSymbolicReflector,
    ReflectionParseWarning,
    Reflector,
    RulebookError,
    SymbolicAnalysis,
    SymbolicReflector,
    SymbolicRulebook,
    TaskRules,
    Tracker,
    analyze,
    detect_errors,
    exploration_reflect,
    harvest_exemplars,
    load_rulebook,
    neural_reflect,
    neuro_symbolic_reflect,
    rulebook_from_document,
    symbolic_reflect,
    track_subgoals,
)

__all__ = [
    "ErrorHeuristics",
    "ExemplarSet",
    "NeuralReflector",
    "NeuroSymbolicReflector",
    "ReflectionParseWarning",
    "Reflector",
    "RulebookError",
    "SymbolicAnalysis",
    "SymbolicReflector",
    "SymbolicRulebook",
    "TaskRules",
    "Tracker",
    "analyze",
    "detect_errors",
    "exploration_reflect",
    "harvest_exemplars",
    "load_rulebook",
    "neural_reflect",
    "neuro_symbolic_reflect",
    "rulebook_from_document",
    "symbolic_reflect",
    "track_subgoals",
]
