"""Utilities for seeding runs and processing their outcomes.

Seed expansion derives task seeds from a single run seed so that grids of
runs play identical tasks. Folding turns per-task records into run
totals, e.g. solved tasks, turns or model calls per role.
"""
from reflect_kit._utilities import (
    FoldError,
    expand_seeds,
    fold_records,
    is_due,
    success_rate,
)

__all__ = [
    "FoldError",
    "expand_seeds",
    "fold_records",
    "is_due",
    "success_rate",
]
