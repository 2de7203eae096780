"""Trace events and run metrics shared by the agent loop and the harness."""
import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from types import TracebackType
from typing import (
    IO,
    TYPE_CHECKING,
    Any,
    Dict,
    List,
    Optional,
    Type,
    Union,
)

if TYPE_CHECKING:  # pragma: no cover
    from reflect_kit._llm_client import CallRecord
    from reflect_kit._prompts import Prompt

_logger = logging.getLogger(__name__)

METRICS_SCHEMA_VERSION = 1

#: Event types written to trace files.
EVENT_TYPES = (
    "task_start",
    "turn_start",
    "llm_call",
    "env_step",
    "reflection",
    "summarization",
    "task_end",
)


class Tracer:
    """Writer of type-tagged trace events, one JSON object per line.

    Records carry no timestamps or latencies, so a replayed run writes a
    byte-identical file.

    Parameters
    ----------
    path : str or Path, optional
        Trace file, truncated on open. Events are kept in memory when not
        given.
    dump_state : bool, optional
        Whether ``env_step`` records carry a world-state dump.

    Examples
    --------
    >>> tracer = Tracer()
    >>> tracer.emit("task_start", task_id="abc")
    >>> tracer.events
    [{'event': 'task_start', 'seq': 0, 'task_id': 'abc'}]
    """

    def __init__(
        self,
        path: "Union[str, Path, None]" = None,
        dump_state: bool = False,
    ) -> None:
        self.path = Path(path) if path is not None else None
        self.dump_state = dump_state
        self.events: List[Dict[str, Any]] = []
        self.counts: Counter[str] = Counter()
        self._handle: Optional[IO[str]] = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._handle = self.path.open("w", encoding="utf-8")

    def emit(self, event: str, **fields: Any) -> None:
        """Write one event.

        Raises
        ------
        ValueError
            If `event` is not a known event type.
        """
        if event not in EVENT_TYPES:
            raise ValueError(f"Cannot trace, unknown event type `{event}`.")
        record = {"event": event, "seq": sum(self.counts.values()), **fields}
        self.counts[event] += 1
        if self._handle is None:
            self.events.append(record)
            return
        self._handle.write(
            json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n"
        )

    def llm_call(self, record: "CallRecord", prompt: "Prompt") -> None:
        self.emit(
            "llm_call",
            role=record.role,
            digest=record.digest,
            prompt=prompt.text,
            response=record.response,
        )

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def __enter__(self) -> "Tracer":
        return self

    def __exit__(
        self,
        exc_type: Optional[Type[BaseException]],
        exc: Optional[BaseException],
        traceback: Optional[TracebackType],
    ) -> None:
        self.close()


@dataclass
class TaskRecord:
    """Outcome of one task."""

    task_id: str
    task_type: str
    reward: int
    turns: int
    calls: Dict[str, int] = field(default_factory=dict)
    trials: int = 1
    error: Optional[str] = None
    parse_failures: int = 0
    summarization_failures: int = 0


@dataclass
class RunMetrics:
    """Aggregated outcome of one run.

    Attributes
    ----------
    sr : float
        Success rate in percent, one decimal.
    avg_turns : float
        Mean turns of the last trial per task.
    llm_calls : dict
        Calls per role over the whole run.
    parse_warning_count : int
        Reflection categories whose output did not parse.
    summarization_failures : int
        Summarized categories whose output did not parse.
    tasks : list of TaskRecord
        Per-task outcomes in run order.
    config : dict
        Resolved configuration of the run.
    constitution_sizes : list of dict
        Rule counts per category after every task.
    label : str
        Row name used by reports.
    """

    sr: float
    avg_turns: float
    llm_calls: Dict[str, int]
    parse_warning_count: int = 0
    summarization_failures: int = 0
    tasks: List[TaskRecord] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    constitution_sizes: List[Dict[str, int]] = field(default_factory=list)
    label: str = ""
    schema_version: int = METRICS_SCHEMA_VERSION

    @property
    def total_calls(self) -> int:
        return sum(self.llm_calls.values())

    def to_document(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_document(cls, document: Dict[str, Any]) -> "RunMetrics":
        fields = dict(document)
        fields["tasks"] = [TaskRecord(**task) for task in fields["tasks"]]
        return cls(**fields)
