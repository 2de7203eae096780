"""Useful utilities shared by the agent loop and the harness."""
import logging
import numbers
from collections import Counter
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    List,
    Mapping,
    Sequence,
    Set,
    Union,
)

import numpy as np

_logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


Folded = Union[None, numbers.Real, Mapping[str, int]]


class FoldError(Exception):
    """A per-task record could not be folded into the run totals."""
    pass


def success_rate(rewards: "Sequence[int]") -> float:
    """Compute the success rate of a list of binary rewards.

    Parameters
    ----------
    rewards : sequence of int
        Per-task rewards, each 0 or 1.

    Returns
    -------
    float
        Mean reward times 100, rounded to one decimal place.

    Raises
    ------
    ValueError
        If `rewards` is empty or holds something other than 0 and 1.

    Examples
    --------
    >>> success_rate([1, 0, 1, 1])
    75.0
    >>> success_rate([0, 0])
    0.0
    """
    values = np.asarray(rewards, dtype=float)
    if values.size == 0:
        _logger.error("Invalid input: `rewards` may not be empty.")
        raise ValueError("Cannot compute success rate, `rewards` is empty.")
    if not np.all((values == 0) | (values == 1)):
        _logger.error("Invalid input: `rewards` must be binary.")
        raise ValueError(
            "Cannot compute success rate, `rewards` may only hold 0 and 1."
        )
    return round(float(np.mean(values)) * 100, 1)


def expand_seeds(seed: int, count: int) -> List[int]:
    """Derive independent 64-bit seeds from a single run seed.

    Parameters
    ----------
    seed : int
        Run seed, reduced modulo 2**64.
    count : int
        How many seeds to derive.

    Returns
    -------
    list of int
        The first `count` outputs of a splitmix64 generator seeded with
        `seed`.

    Raises
    ------
    ValueError
        If `count` is negative.

    Notes
    -----
    splitmix64 adds the constant ``0x9E3779B97F4A7C15`` to its state and
    scrambles the result with two xor-shift-multiply rounds
    (``0xBF58476D1CE4E5B9`` and ``0x94D049BB133111EB``) and a final
    xor-shift by 31. All arithmetic is modulo 2**64, so the expansion is
    identical on every platform.

    Examples
    --------
    >>> hex(expand_seeds(0, 1)[0])
    '0xe220a8397b1dcdaf'
    """
    if count < 0:
        raise ValueError("Cannot expand seeds, `count` may not be negative.")
    state = seed & _MASK64
    seeds = []
    for _ in range(count):
        state = (state + _GOLDEN_GAMMA) & _MASK64
        mixed = state
        mixed = ((mixed ^ (mixed >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        mixed = ((mixed ^ (mixed >> 27)) * 0x94D049BB133111EB) & _MASK64
        seeds.append(mixed ^ (mixed >> 31))
    return seeds


def is_due(count: int, every: int) -> bool:
    """Whether a periodic event fires after `count` completed units.

    Examples
    --------
    >>> [turn for turn in range(1, 26) if is_due(turn, 10)]
    [10, 20]
    """
    return count > 0 and count % every == 0


def fold_records(
    records: "Iterable[Any]", **folds: "Callable[[Any], Folded]"
) -> Dict[str, Any]:
    """Fold per-task records into run totals.

    Each fold maps one record onto a number or onto a mapping of counts.
    Numbers are added up, mappings are added up key by key, and `None`
    leaves the total untouched.

    Parameters
    ----------
    records : iterable
        Per-task records, typically :class:`~reflect_kit.harness.TaskRecord`.
    **folds : Callable[[Any], Folded]
        Named projections of a record.

    Returns
    -------
    Dict[str, Any]
        Total per fold name. Folds that never produced a value total 0,
        mapping folds total a plain dict.

    Raises
    ------
    TypeError
        If `records` is not iterable or a fold is not callable.
    FoldError
        If a fold raises, returns an unsupported value or mixes numbers
        with mappings.

    Examples
    --------
    >>> totals = fold_records(
    ...     [
    ...         {"reward": 1, "turns": 4, "calls": {"action": 4}},
    ...         {"reward": 0, "turns": 50, "calls": {"action": 50}},
    ...     ],
    ...     solved=lambda record: record["reward"],
    ...     turns=lambda record: record["turns"],
    ...     calls=lambda record: record["calls"],
    ... )
    >>> totals
    {'solved': 1, 'turns': 54, 'calls': {'action': 54}}
    """
    if isinstance(records, (str, bytes, Mapping)) or not isinstance(
        records, Iterable
    ):
        raise TypeError("Cannot fold records, `records` is not iterable.")
    for name, fold in folds.items():
        if not callable(fold):
            raise TypeError(f"Cannot fold records, `{name}` is not callable.")

    totals: Dict[str, Any] = dict.fromkeys(folds, 0)
    tallies: Dict[str, Counter] = {}
    numeric: Set[str] = set()
    count = 0
    for count, record in enumerate(records, start=1):
        for name, fold in folds.items():
            try:
                value = fold(record)
            except Exception as err:
                _logger.exception(
                    "Fold `%s` failed on record %d.", name, count
                )
                raise FoldError(
                    f"Cannot fold record {count}, `{name}` raised."
                ) from err
            if value is None:
                continue
            if isinstance(value, Mapping) and name not in numeric:
                tallies.setdefault(name, Counter()).update(value)
            elif isinstance(value, numbers.Real) and name not in tallies:
                numeric.add(name)
                totals[name] += value
            else:
                raise FoldError(
                    f"Cannot fold record {count}, `{name}` returned "
                    f"{type(value).__name__}."
                )
    for name, tally in tallies.items():
        totals[name] = dict(tally)
    _logger.debug("Folded %d records through %d folds.", count, len(folds))
    return totals
