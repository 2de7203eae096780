"""Constitution: the categorized rule store consumed by agents.

Constitutions are immutable snapshots. Every operation in this module
returns a new snapshot with a higher version when something changed.
"""

from reflect_kit._constitution import (
    ALL_CATEGORIES,
    CATEGORY_ORDER,
    LONG_TERM,
    Category,
    Constitution,
    ConstitutionError,
    ConstitutionParseError,
    ConstitutionValidationError,
    Origin,
    ReflectionBatch,
    Rule,
    Scope,
    Source,
    SummarizationWarning,
    Summary,
    add_rules,
    clear_progress,
    from_document,
    load,
    render,
    restrict,
    rule_counts,
    save,
    summarize,
    to_document,
)

__all__ = [
    "ALL_CATEGORIES",
    "CATEGORY_ORDER",
    "LONG_TERM",
    "Category",
    "Constitution",
    "ConstitutionError",
    "ConstitutionParseError",
    "ConstitutionValidationError",
    "Origin",
    "ReflectionBatch",
    "Rule",
    "Scope",
    "Source",
    "SummarizationWarning",
    "Summary",
    "add_rules",
    "clear_progress",
    "from_document",
    "load",
    "render",
    "restrict",
    "rule_counts",
    "save",
    "summarize",
    "to_document",
]
