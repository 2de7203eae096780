"""Categorized rule store shared between reflection and action phases."""
import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum, unique
from pathlib import Path
from typing import (
    Any,
    Callable,
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Tuple,
    Union,
)
from warnings import warn

from reflect_kit._parsing import (
    ErrorRecord,
    parse_list_output,
    parse_record_output,
)
from reflect_kit._prompts import CATEGORY_HEADERS, build_summarization_prompt

_logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@unique
class Category(Enum):
    """Kind of knowledge a rule carries."""

    ABSTRACT = "abstract"
    ERROR = "error"
    PROGRESS = "progress"


@unique
class Scope(Enum):
    """Lifetime of a rule: the whole environment or the current task."""

    ENVIRONMENT = "environment"
    TASK = "task"


@unique
class Source(Enum):
    """Reflection strategy that produced a rule."""

    NEURAL = "neural"
    SYMBOLIC = "symbolic"
    NEURO_SYMBOLIC = "neuro-symbolic"
    META_ADVISOR = "meta-advisor"


#: Fixed order in which categories are rendered.
CATEGORY_ORDER: Tuple[Category, ...] = (
    Category.ABSTRACT,
    Category.ERROR,
    Category.PROGRESS,
)
ALL_CATEGORIES: FrozenSet[Category] = frozenset(Category)
LONG_TERM: FrozenSet[Category] = frozenset(
    {Category.ABSTRACT, Category.ERROR}
)


class Origin(NamedTuple):
    """Task index and turn at which a rule was produced."""

    task_index: int
    turn: int


class ConstitutionError(Exception):
    """Something is wrong with a constitution."""
    pass


class ConstitutionValidationError(ConstitutionError, ValueError):
    """A rule or constitution violates one of its invariants."""
    pass


class ConstitutionParseError(ConstitutionError, ValueError):
    """A constitution file could not be read.

    Parameters
    ----------
    field : str
        Dotted path of the offending field, ``"<document>"`` when the file
        itself is not valid JSON.
    message : str
        What is wrong with it.
    """

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"Field `{field}`: {message}")
        self.field = field


class SummarizationWarning(Warning):
    """A summarizer returned output that could not be parsed."""
    pass


def scope_of(category: Category) -> Scope:
    """Return the scope every rule of `category` has."""
    if category is Category.PROGRESS:
        return Scope.TASK
    return Scope.ENVIRONMENT


@dataclass(frozen=True)
class Rule:
    """A single constitution entry.

    Error rules carry the structured `mistake` and `solution`; their
    `text` is the flat rendering used in prompts.
    """

    id: int
    category: Category
    text: str
    scope: Scope
    source: Source
    origin: Origin
    mistake: Optional[str] = None
    solution: Optional[str] = None
    priority: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ConstitutionValidationError(
                f"Rule {self.id} has empty `text`."
            )
        if self.scope is not scope_of(self.category):
            raise ConstitutionValidationError(
                f"Rule {self.id}: a {self.category.value} rule must have "
                f"scope `{scope_of(self.category).value}`."
            )
        if self.category is Category.ERROR:
            if not (self.mistake or "").strip() or not (
                self.solution or ""
            ).strip():
                raise ConstitutionValidationError(
                    f"Rule {self.id}: error rules need `mistake` and "
                    f"`solution`."
                )
            expected = ErrorRecord(self.mistake, self.solution).render()
            if self.text != expected:
                raise ConstitutionValidationError(
                    f"Rule {self.id}: `text` must read `{expected}`."
                )
        if self.priority is not None and self.priority < 1:
            raise ConstitutionValidationError(
                f"Rule {self.id}: `priority` must be at least 1."
            )

    @property
    def record(self) -> ErrorRecord:
        """The structured form of an error rule."""
        return ErrorRecord(self.mistake or "", self.solution or "")


@dataclass(frozen=True)
class ReflectionBatch:
    """Output of one reflection event.

    Attributes
    ----------
    abstract : tuple of str
        Environment-level rules.
    error : tuple of ErrorRecord
        Mistakes and their fixes.
    progress : tuple of str
        Task-level progress notes.
    priorities : tuple of (str, int)
        Priority annotations for abstract entries, when the model gave any.
    failed : tuple of str
        Categories whose model output did not parse. Not part of equality.
    """

    abstract: Tuple[str, ...] = ()
    error: Tuple[ErrorRecord, ...] = ()
    progress: Tuple[str, ...] = ()
    priorities: Tuple[Tuple[str, int], ...] = ()
    failed: Tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "abstract", tuple(self.abstract))
        object.__setattr__(
            self,
            "error",
            tuple(
                ErrorRecord(**record)
                if isinstance(record, Mapping)
                else ErrorRecord(*record)
                for record in self.error
            ),
        )
        object.__setattr__(self, "failed", tuple(self.failed))
        object.__setattr__(self, "progress", tuple(self.progress))
        object.__setattr__(self, "priorities", tuple(self.priorities))
        for text in self.abstract + self.progress:
            if not text.strip():
                raise ValueError("Reflection entries may not be empty.")
        for record in self.error:
            if not record.mistake.strip() or not record.solution.strip():
                raise ValueError(
                    "Error records need a non-empty mistake and solution."
                )

    @property
    def is_empty(self) -> bool:
        """Whether the batch holds no entries at all."""
        return not (self.abstract or self.error or self.progress)

    def counts(self) -> Dict[str, int]:
        """Number of entries per category."""
        return {
            Category.ABSTRACT.value: len(self.abstract),
            Category.ERROR.value: len(self.error),
            Category.PROGRESS.value: len(self.progress),
        }

    def only(self, categories: "Iterable[Category]") -> "ReflectionBatch":
        """Return a copy keeping only the given categories."""
        keep = frozenset(categories)
        return ReflectionBatch(
            self.abstract if Category.ABSTRACT in keep else (),
            self.error if Category.ERROR in keep else (),
            self.progress if Category.PROGRESS in keep else (),
            self.priorities if Category.ABSTRACT in keep else (),
            self.failed,
        )


@dataclass(frozen=True)
class Constitution:
    """Versioned, immutable snapshot of the rule store.

    Every operation returns a new snapshot; ``version`` grows with every
    mutation and never decreases.
    """

    environment_id: str
    version: int = 0
    rules: Tuple[Rule, ...] = ()
    summarization_count: int = 0
    next_id: int = field(default=0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", tuple(self.rules))
        if self.version < 0 or self.summarization_count < 0:
            raise ConstitutionValidationError(
                "`version` and `summarization_count` may not be negative."
            )
        previous = 0
        seen = set()
        for rule in self.rules:
            if rule.id <= previous:
                raise ConstitutionValidationError(
                    f"Rule ids must be unique and strictly increasing, "
                    f"found {rule.id} after {previous}."
                )
            previous = rule.id
            key = (rule.category, rule.text.strip())
            if key in seen:
                raise ConstitutionValidationError(
                    f"Duplicate {rule.category.value} rule `{rule.text}`."
                )
            seen.add(key)
        if self.next_id <= previous:
            object.__setattr__(self, "next_id", previous + 1)

    def rules_in(self, category: Category) -> Tuple[Rule, ...]:
        """Rules of one category in insertion order."""
        return tuple(rule for rule in self.rules if rule.category is category)

    def __len__(self) -> int:
        return len(self.rules)


def _entries(batch: ReflectionBatch) -> "List[Tuple[Category, Any]]":
    entries: "List[Tuple[Category, Any]]" = []
    entries.extend((Category.ABSTRACT, text) for text in batch.abstract)
    entries.extend((Category.ERROR, record) for record in batch.error)
    entries.extend((Category.PROGRESS, text) for text in batch.progress)
    return entries


def _make_rule(
    rule_id: int,
    category: Category,
    entry: "Union[str, ErrorRecord]",
    source: Source,
    origin: Origin,
    priority: Optional[int] = None,
) -> Rule:
    if category is Category.ERROR:
        record = ErrorRecord(entry.mistake.strip(), entry.solution.strip())
        return Rule(
            rule_id,
            category,
            record.render(),
            Scope.ENVIRONMENT,
            source,
            origin,
            mistake=record.mistake,
            solution=record.solution,
        )
    return Rule(
        rule_id,
        category,
        entry.strip(),
        scope_of(category),
        source,
        origin,
        priority=priority,
    )


def _entry_text(category: Category, entry: "Union[str, ErrorRecord]") -> str:
    if category is Category.ERROR:
        return ErrorRecord(
            entry.mistake.strip(), entry.solution.strip()
        ).render()
    return entry.strip()


def add_rules(
    constitution: Constitution,
    batch: ReflectionBatch,
    origin: "Tuple[int, int]",
    source: Source,
) -> Constitution:
    """Append the entries of a reflection batch.

    Parameters
    ----------
    constitution : Constitution
        Snapshot to extend.
    batch : ReflectionBatch
        Entries to add.
    origin : tuple of int
        ``(task_index, turn)`` at which the batch was produced.
    source : Source
        Strategy that produced the batch.

    Returns
    -------
    Constitution
        New snapshot. Entries whose trimmed text already exists in the same
        category are dropped; ``version`` only grows if a rule was added.

    Examples
    --------
    >>> empty = Constitution("gripper")
    >>> batch = ReflectionBatch(abstract=["Use fridge for cooling"])
    >>> grown = add_rules(empty, batch, (0, 10), Source.NEURAL)
    >>> len(grown), grown.version
    (1, 1)
    >>> again = add_rules(grown, batch, (0, 20), Source.NEURAL)
    >>> len(again), again.version
    (1, 1)
    """
    origin = Origin(*origin)
    priorities = dict(batch.priorities)
    known = {(rule.category, rule.text.strip()) for rule in constitution.rules}
    added: "List[Rule]" = []
    next_id = constitution.next_id
    for category, entry in _entries(batch):
        key = (category, _entry_text(category, entry))
        if key in known:
            continue
        known.add(key)
        priority = None
        if category is Category.ABSTRACT:
            priority = priorities.get(entry)
        added.append(
            _make_rule(next_id, category, entry, source, origin, priority)
        )
        next_id += 1
    if not added:
        return constitution
    _logger.debug(
        "Adding %d rules to constitution version %d.",
        len(added),
        constitution.version,
    )
    return replace(
        constitution,
        version=constitution.version + 1,
        rules=constitution.rules + tuple(added),
        next_id=next_id,
    )


def clear_progress(constitution: Constitution) -> Constitution:
    """Drop all task-level progress rules.

    Parameters
    ----------
    constitution : Constitution
        Snapshot to clear.

    Returns
    -------
    Constitution
        Snapshot without progress rules; the same object if there were none.
    """
    kept = tuple(
        rule
        for rule in constitution.rules
        if rule.category is not Category.PROGRESS
    )
    if len(kept) == len(constitution.rules):
        return constitution
    return replace(constitution, version=constitution.version + 1, rules=kept)


def render(
    constitution: Constitution,
    include: "Iterable[Category]" = ALL_CATEGORIES,
) -> str:
    """Render rules as prompt text.

    Parameters
    ----------
    constitution : Constitution
        Snapshot to render.
    include : iterable of Category, optional
        Categories to render, all by default.

    Returns
    -------
    str
        For every included, non-empty category (abstract, error, progress
        order) its header followed by one ``"- <rule>"`` line per rule.
        Sections are separated by a blank line. An empty selection renders
        as an empty string.

    Examples
    --------
    >>> batch = ReflectionBatch(abstract=["Use fridge for cooling"])
    >>> demo = Constitution("demo")
    >>> snapshot = add_rules(demo, batch, (0, 1), Source.NEURAL)
    >>> print(render(snapshot))
    Here are some aspects you have learnt so far.
    - Use fridge for cooling
    >>> render(Constitution("demo"))
    ''
    """
    selected = frozenset(include)
    sections = []
    for category in CATEGORY_ORDER:
        if category not in selected:
            continue
        rules = constitution.rules_in(category)
        if not rules:
            continue
        lines = [CATEGORY_HEADERS[category.value]]
        lines.extend(f"- {rule.text}" for rule in rules)
        sections.append("\n".join(lines))
    return "\n\n".join(sections)


class Summary(NamedTuple):
    """Result of :func:`summarize`."""

    constitution: Constitution
    failed: Tuple[Category, ...]


def _dominant_source(rules: "Iterable[Rule]", default: Source) -> Source:
    counts = Counter(rule.source for rule in rules)
    if not counts:
        return default
    order = list(Source)
    return max(
        counts, key=lambda source: (counts[source], -order.index(source))
    )


def summarize(
    constitution: Constitution,
    summarizer: "Callable[[str], str]",
    categories: "Iterable[Category]" = LONG_TERM,
    default_source: Source = Source.NEURAL,
) -> Summary:
    """Condense long-term categories with a summarizer.

    Parameters
    ----------
    constitution : Constitution
        Snapshot to summarize.
    summarizer : callable
        Maps a summarization prompt onto model output holding a bracketed
        list. It is called once per selected category, empty or not.
    categories : iterable of Category, optional
        Subset of abstract and error, both by default.
    default_source : Source, optional
        Source given to rules of a category that was empty before.

    Returns
    -------
    Summary
        The new snapshot and the categories whose output did not parse.
        Those categories keep their rules unchanged.

    Raises
    ------
    ValueError
        If progress rules are selected for summarization.

    Warns
    -----
    SummarizationWarning
        For every category whose output could not be parsed.

    Notes
    -----
    A category is replaced wholesale by the parsed list; new rules get fresh
    ids, keep the most common source of the rules they replace and the
    latest origin among them. ``version`` and ``summarization_count`` grow
    by one per call, also when a category failed.
    """
    selected = [
        category for category in CATEGORY_ORDER if category in set(categories)
    ]
    if Category.PROGRESS in selected:
        _logger.error("Invalid input: progress rules are never summarized.")
        raise ValueError(
            "Cannot summarize, `categories` may only hold abstract and error."
        )
    _logger.info(
        "Summarizing %s of constitution version %d.",
        ", ".join(category.value for category in selected),
        constitution.version,
    )
    rules = list(constitution.rules)
    next_id = constitution.next_id
    failed: "List[Category]" = []
    for category in selected:
        current = [rule for rule in rules if rule.category is category]
        if category is Category.ERROR:
            payload = [
                {"mistake": rule.mistake, "solution": rule.solution}
                for rule in current
            ]
            parsed = parse_record_output(
                summarizer(build_summarization_prompt("error", payload))
            )
        else:
            payload = [rule.text for rule in current]
            parsed = parse_list_output(
                summarizer(build_summarization_prompt("abstract", payload))
            )
        if parsed.failed:
            warn(
                f"Summary of {category.value} rules did not parse "
                f"({parsed.diagnostic.code}), keeping "
                f"{len(current)} rules.",
                SummarizationWarning,
                stacklevel=2,
            )
            failed.append(category)
            continue
        source = _dominant_source(current, default_source)
        origin = max(
            (rule.origin for rule in current), default=Origin(0, 0)
        )
        priorities = {rule.text: rule.priority for rule in current}
        replacement: "List[Rule]" = []
        seen = set()
        for entry in parsed.entries:
            text = _entry_text(category, entry)
            if text in seen:
                continue
            seen.add(text)
            replacement.append(
                _make_rule(
                    next_id,
                    category,
                    entry,
                    source,
                    origin,
                    priorities.get(text),
                )
            )
            next_id += 1
        rules = [rule for rule in rules if rule.category is not category]
        rules.extend(replacement)
    return Summary(
        replace(
            constitution,
            version=constitution.version + 1,
            rules=tuple(sorted(rules, key=lambda rule: rule.id)),
            summarization_count=constitution.summarization_count + 1,
            next_id=next_id,
        ),
        tuple(failed),
    )


def restrict(
    constitution: Constitution,
    categories: "Iterable[Category]",
    source: Optional[Source] = None,
) -> Constitution:
    """Keep only some categories, optionally re-tagging the source.

    Parameters
    ----------
    constitution : Constitution
        Snapshot to restrict.
    categories : iterable of Category
        Categories to keep.
    source : Source, optional
        New source for every kept rule.

    Returns
    -------
    Constitution
        Restricted snapshot, with a new version if anything changed.
    """
    keep = frozenset(categories)
    rules = tuple(
        rule if source is None else replace(rule, source=source)
        for rule in constitution.rules
        if rule.category in keep
    )
    if rules == constitution.rules:
        return constitution
    return replace(constitution, version=constitution.version + 1, rules=rules)


def rule_counts(constitution: Constitution) -> Dict[str, int]:
    """Number of rules per category, keyed by category value."""
    return {
        category.value: len(constitution.rules_in(category))
        for category in CATEGORY_ORDER
    }


def _rule_document(rule: Rule) -> Dict[str, Any]:
    document: Dict[str, Any] = {
        "id": rule.id,
        "category": rule.category.value,
        "scope": rule.scope.value,
        "source": rule.source.value,
        "text": rule.text,
        "origin": {
            "task_index": rule.origin.task_index,
            "turn": rule.origin.turn,
        },
    }
    if rule.category is Category.ERROR:
        document["mistake"] = rule.mistake
        document["solution"] = rule.solution
    if rule.priority is not None:
        document["priority"] = rule.priority
    return document


def to_document(constitution: Constitution) -> Dict[str, Any]:
    """Return the JSON-ready mapping :func:`save` writes."""
    return {
        "schema_version": SCHEMA_VERSION,
        "environment_id": constitution.environment_id,
        "version": constitution.version,
        "summarization_count": constitution.summarization_count,
        "next_id": constitution.next_id,
        "rules": [_rule_document(rule) for rule in constitution.rules],
    }


def save(constitution: Constitution, path: "Union[str, Path]") -> None:
    """Write a constitution as a JSON document.

    Parameters
    ----------
    constitution : Constitution
        Snapshot to write.
    path : str or Path
        Destination file, overwritten if it exists.
    """
    destination = Path(path)
    destination.write_text(
        json.dumps(to_document(constitution), indent=2, ensure_ascii=False)
        + "\n",
        encoding="utf-8",
    )
    _logger.info(
        "Saved constitution version %d to %s.",
        constitution.version,
        destination,
    )


def _require(
    mapping: Mapping[str, Any], key: str, kind: type, where: str
) -> Any:
    if not isinstance(mapping, dict):
        raise ConstitutionParseError(where, "expected an object.")
    if key not in mapping:
        raise ConstitutionParseError(f"{where}.{key}", "missing.")
    value = mapping[key]
    if kind is int and isinstance(value, bool):
        raise ConstitutionParseError(f"{where}.{key}", "expected int.")
    if not isinstance(value, kind):
        raise ConstitutionParseError(
            f"{where}.{key}", f"expected {kind.__name__}."
        )
    return value


def _enum(kind: type, value: str, where: str) -> Any:
    try:
        return kind(value)
    except ValueError as err:
        raise ConstitutionParseError(
            where, f"unknown value `{value}`."
        ) from err


def _rule_from_document(document: Any, where: str) -> Rule:
    origin = _require(document, "origin", dict, where)
    priority = document.get("priority") if isinstance(document, dict) else None
    if priority is not None and (
        isinstance(priority, bool) or not isinstance(priority, int)
    ):
        raise ConstitutionParseError(f"{where}.priority", "expected int.")
    category = _enum(
        Category,
        _require(document, "category", str, where),
        f"{where}.category",
    )
    mistake = solution = None
    if category is Category.ERROR:
        mistake = _require(document, "mistake", str, where)
        solution = _require(document, "solution", str, where)
    return Rule(
        id=_require(document, "id", int, where),
        category=category,
        text=_require(document, "text", str, where),
        scope=_enum(
            Scope, _require(document, "scope", str, where), f"{where}.scope"
        ),
        source=_enum(
            Source,
            _require(document, "source", str, where),
            f"{where}.source",
        ),
        origin=Origin(
            _require(origin, "task_index", int, f"{where}.origin"),
            _require(origin, "turn", int, f"{where}.origin"),
        ),
        mistake=mistake,
        solution=solution,
        priority=priority,
    )


def from_document(document: Any) -> Constitution:
    """Build a constitution from the mapping produced by :func:`to_document`.

    Raises
    ------
    ConstitutionParseError
        If a field is missing or has the wrong type.
    ConstitutionValidationError
        If the rules violate an invariant, e.g. duplicate texts.
    """
    schema = _require(document, "schema_version", int, "$")
    if schema != SCHEMA_VERSION:
        raise ConstitutionParseError(
            "$.schema_version", f"unsupported version {schema}."
        )
    rules = _require(document, "rules", list, "$")
    next_id = document.get("next_id", 0)
    if isinstance(next_id, bool) or not isinstance(next_id, int):
        raise ConstitutionParseError("$.next_id", "expected int.")
    return Constitution(
        environment_id=_require(document, "environment_id", str, "$"),
        version=_require(document, "version", int, "$"),
        rules=tuple(
            _rule_from_document(rule, f"$.rules[{index}]")
            for index, rule in enumerate(rules)
        ),
        summarization_count=_require(
            document, "summarization_count", int, "$"
        ),
        next_id=next_id,
    )


def load(path: "Union[str, Path]") -> Constitution:
    """Read a constitution written by :func:`save`.

    Parameters
    ----------
    path : str or Path
        File to read.

    Returns
    -------
    Constitution
        Snapshot equal to the one that was saved, field for field.

    Raises
    ------
    ConstitutionParseError
        If the file is not valid JSON or a field is malformed.
    ConstitutionValidationError
        If the stored rules violate an invariant.
    """
    source = Path(path)
    try:
        document = json.loads(source.read_text(encoding="utf-8"))
    except ValueError as err:
        _logger.exception("Constitution file %s is not valid JSON.", source)
        raise ConstitutionParseError(
            "<document>", f"{source} is not valid JSON."
        ) from err
    return from_document(document)
