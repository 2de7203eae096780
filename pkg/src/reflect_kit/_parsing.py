"""Tolerant parsing of list-shaped model output."""
import ast
import json
import logging
import re
from typing import Any, List, NamedTuple, Optional, Tuple

_logger = logging.getLogger(__name__)

_FENCE = re.compile(r"```[A-Za-z0-9_+-]*[ \t]*\n?(.*?)```", re.DOTALL)
_FLAT_RECORD = re.compile(
    r"^\s*mistake:\s*(?P<mistake>.+?)\s*;\s*solution:\s*(?P<solution>.+?)\s*$",
    re.IGNORECASE | re.DOTALL,
)
_RULE_KEYS = ("rule", "text", "reflection")

#: Diagnostic codes that mean no list literal could be recovered at all.
FATAL_CODES = frozenset({"empty", "no_brackets", "unbalanced", "syntax"})


class ErrorRecord(NamedTuple):
    """A mistake observed in a trajectory and the suggested fix."""

    mistake: str
    solution: str

    def render(self) -> str:
        """Render the record as a single prompt line.

        Returns
        -------
        str
            Text of the form ``"mistake: <m>; solution: <s>"``.
        """
        return f"mistake: {self.mistake}; solution: {self.solution}"


class ParseDiagnostic(NamedTuple):
    """Machine-readable reason why (part of) an output did not parse."""

    code: str
    message: str


class ParseResult(NamedTuple):
    """Entries recovered from a model output.

    ``priorities`` runs parallel to ``entries`` and is only ever filled for
    list output whose items carried a priority annotation.
    """

    entries: Tuple[Any, ...]
    priorities: Tuple[Optional[int], ...]
    diagnostic: Optional[ParseDiagnostic] = None

    @property
    def failed(self) -> bool:
        """Whether no list literal could be recovered from the output."""
        return (
            self.diagnostic is not None
            and self.diagnostic.code in FATAL_CODES
        )


def _strip_fences(text: str) -> str:
    match = _FENCE.search(text)
    if match:
        return match.group(1)
    return text


def _matching_bracket(text: str, start: int) -> int:
    """Return the index of the bracket closing ``text[start]`` or -1."""
    depth = 0
    quote = ""
    escaped = False
    for index in range(start, len(text)):
        char = text[index]
        if quote:
            if escaped:
                escaped = False
            elif char == "\\":
                escaped = True
            elif char == quote:
                quote = ""
            continue
        if char in "\"'":
            # Apostrophes inside bare words are not string delimiters.
            previous = text[index - 1] if index > start else " "
            if char == "'" and previous.isalnum():
                continue
            quote = char
        elif char == "[":
            depth += 1
        elif char == "]":
            depth -= 1
            if depth == 0:
                return index
    return -1


def _literal(candidate: str) -> Any:
    try:
        return json.loads(candidate)
    except ValueError:
        pass
    return ast.literal_eval(candidate)


def _locate_list(text: str) -> "Tuple[Optional[List[Any]], ParseDiagnostic]":
    """Find the first bracket-delimited literal that evaluates to a list."""
    if not text.strip():
        return None, ParseDiagnostic("empty", "Model output is empty.")
    body = _strip_fences(text)
    positions = [index for index, char in enumerate(body) if char == "["]
    if not positions:
        return None, ParseDiagnostic(
            "no_brackets", "No bracket-delimited list found in output."
        )
    diagnostic = ParseDiagnostic(
        "unbalanced", "Opening bracket without a matching closing bracket."
    )
    for start in positions:
        end = _matching_bracket(body, start)
        if end < 0:
            continue
        try:
            value = _literal(body[start : end + 1])
        except (
            ValueError,
            SyntaxError,
            TypeError,
            MemoryError,
            RecursionError,
        ) as err:
            _logger.debug("List at %d does not parse: %s", start, err)
            diagnostic = ParseDiagnostic(
                "syntax", f"List literal at offset {start} does not parse."
            )
            continue
        if isinstance(value, list):
            return value, diagnostic
        diagnostic = ParseDiagnostic(
            "not_a_list", f"Literal at offset {start} is not a list."
        )
    if diagnostic.code == "not_a_list":
        diagnostic = ParseDiagnostic("syntax", diagnostic.message)
    return None, diagnostic


def _as_priority(value: Any) -> Optional[int]:
    if isinstance(value, bool):
        return None
    if isinstance(value, int) and value >= 1:
        return value
    if isinstance(value, str) and value.strip().isdigit():
        return int(value.strip()) or None
    return None


def _list_entry(item: Any) -> "Tuple[Optional[str], Optional[int]]":
    if isinstance(item, str):
        return item.strip() or None, None
    if isinstance(item, dict):
        lowered = {str(key).lower(): value for key, value in item.items()}
        for key in _RULE_KEYS:
            value = lowered.get(key)
            if isinstance(value, str) and value.strip():
                return value.strip(), _as_priority(lowered.get("priority"))
    return None, None


def parse_list_output(text: str) -> ParseResult:
    """Parse a model output expected to hold a list of rule strings.

    Parameters
    ----------
    text : str
        Raw model output, possibly wrapped in code fences or prose.

    Returns
    -------
    ParseResult
        Trimmed, non-empty entries and, per entry, the priority annotation
        if the entry was written as ``{"rule": ..., "priority": ...}``. On
        failure the entries are empty and ``diagnostic`` says why.

    See Also
    --------
    parse_record_output : Parse a list of mistake/solution records.

    Notes
    -----
    This function never raises. Code fences are stripped first, then every
    opening bracket is tried in order until a literal evaluates to a list.
    Both JSON and Python literal syntax are accepted, so single- and
    double-quoted strings work.

    Examples
    --------
    >>> parse_list_output('```json\\n["rule A", "rule B"]\\n```').entries
    ('rule A', 'rule B')
    >>> result = parse_list_output("I see no mistakes.")
    >>> result.entries, result.diagnostic.code
    ((), 'no_brackets')
    """
    items, diagnostic = _locate_list(text)
    if items is None:
        _logger.debug("List output did not parse: %s", diagnostic.message)
        return ParseResult((), (), diagnostic)
    entries, priorities = [], []
    skipped = 0
    for item in items:
        entry, priority = _list_entry(item)
        if entry is None:
            skipped += 1
            continue
        entries.append(entry)
        priorities.append(priority)
    problem = None
    if skipped:
        problem = ParseDiagnostic(
            "bad_entry", f"Skipped {skipped} entries that are not rules."
        )
    return ParseResult(tuple(entries), tuple(priorities), problem)


def _record_entry(item: Any) -> Optional[ErrorRecord]:
    if isinstance(item, str):
        match = _FLAT_RECORD.match(item)
        if match:
            return ErrorRecord(match["mistake"], match["solution"])
        return None
    if not isinstance(item, dict):
        return None
    lowered = {str(key).strip().lower(): value for key, value in item.items()}
    mistake = lowered.get("mistake")
    solution = lowered.get("solution")
    if mistake is None and solution is None and len(lowered) == 1:
        # Single-key shape: {"<mistake_slug>": "<solution>"}.
        ((key, solution),) = lowered.items()
        mistake = key.replace("_", " ")
    if not isinstance(mistake, str) or not isinstance(solution, str):
        return None
    if not mistake.strip() or not solution.strip():
        return None
    return ErrorRecord(mistake.strip(), solution.strip())


def parse_record_output(text: str) -> ParseResult:
    """Parse a model output expected to hold mistake/solution records.

    Parameters
    ----------
    text : str
        Raw model output.

    Returns
    -------
    ParseResult
        :class:`ErrorRecord` entries in output order. Keys are matched
        case-insensitively and in any order. Single-key mappings and flat
        ``"mistake: ...; solution: ..."`` strings are recovered too.

    Examples
    --------
    >>> result = parse_record_output(
    ...     "[{'mistake': 'Cabinet was not opened', "
    ...     "'solution': 'Open the cabinet next time'}]"
    ... )
    >>> result.entries[0].solution
    'Open the cabinet next time'
    """
    items, diagnostic = _locate_list(text)
    if items is None:
        _logger.debug("Record output did not parse: %s", diagnostic.message)
        return ParseResult((), (), diagnostic)
    records = [_record_entry(item) for item in items]
    kept = tuple(record for record in records if record is not None)
    problem = None
    if len(kept) != len(records):
        problem = ParseDiagnostic(
            "bad_entry",
            f"Skipped {len(records) - len(kept)} malformed records.",
        )
    return ParseResult(kept, (None,) * len(kept), problem)
