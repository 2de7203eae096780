"""Experiment harness: configuration, runs, ablations and reports."""
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import (
    Any,
    Callable,
    Dict,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np

from reflect_kit._agent_loop import (
    ConfigurationError,
    RunConfig,
    calibrate_meta_advisor,
    demonstrations,
    run_cooperative,
    run_dataset,
    run_reflexion,
    run_react,
)
from reflect_kit._constitution import (
    CATEGORY_ORDER,
    Category,
    load,
    save,
)
from reflect_kit._environment import (
    ENV_KINDS,
    TaskSpec,
    generate_tasks,
    make_environment,
)
from reflect_kit._llm_client import (
    CACHE_MODES,
    ROLES,
    Backend,
    CacheBackend,
    HttpBackend,
    LlmClient,
    LlmSettings,
    RetryPolicy,
)
from reflect_kit._reflectors import (
    NeuralReflector,
    NeuroSymbolicReflector,
    Reflector,
    SymbolicReflector,
    harvest_exemplars,
    load_rulebook,
)
from reflect_kit._tracing import METRICS_SCHEMA_VERSION, RunMetrics, Tracer
from reflect_kit._utilities import expand_seeds

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

_logger = logging.getLogger(__name__)

ENDPOINT_ENV = "REFLECT_KIT_ENDPOINT"
REPORT_COLUMNS = ("label", "sr", "avg_turns", *ROLES, "total_calls")

#: Cells of the default reflection/summarization cadence grid.
DEFAULT_GRID = ((5, 5), (5, 10), (5, 20), (10, 5), (10, 10), (10, 20))

LlmFactory = Callable[[Optional[Tracer]], Callable[..., str]]


class ReportError(ValueError):
    """A metrics file cannot be reported on."""

    def __init__(self, path: "Union[str, Path]", message: str) -> None:
        self.path = str(path)
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class HarnessConfig:
    """Resolved experiment configuration.

    Parameters
    ----------
    run : RunConfig
        Agent loop settings, LLM settings included.
    env_kind : str
        Environment kind.
    task_types : tuple of str
        Task types played, every type of the kind when empty.
    n : int
        Tasks per task type.
    env_params : dict
        Sizing parameters of task generation.
    few_shots : int
        Oracle-solved worked examples per task type in action prompts.
    constitution : str, optional
        Frozen constitution file of co-operative runs.
    rulebook : str, optional
        Rulebook file, the bundled one of the kind by default.
    cache : str
        One of ``off``, ``record`` and ``replay``.
    cache_path : str, optional
        Cache file, ``<out_dir>/cache.jsonl`` by default.
    out_dir : str
        Output directory.
    seeds : int
        Number of derived seeds to run.
    dump_state : bool
        Add world-state dumps to step trace records.
    label : str
        Name of the run in file names and reports.
    grid : tuple of (int, int)
        ``(r_freq, s_freq)`` cells of an ablation.
    knockouts : tuple of tuple of str
        Category sets suppressed by an ablation, one cell each.
    """

    run: RunConfig = field(default_factory=RunConfig)
    env_kind: str = "gridworld"
    task_types: Tuple[str, ...] = ()
    n: int = 10
    env_params: Mapping[str, Any] = field(default_factory=dict)
    few_shots: int = 0
    constitution: Optional[str] = None
    rulebook: Optional[str] = None
    cache: str = "off"
    cache_path: Optional[str] = None
    out_dir: str = "runs"
    seeds: int = 1
    dump_state: bool = False
    label: str = ""
    grid: Tuple[Tuple[int, int], ...] = ()
    knockouts: Tuple[Tuple[str, ...], ...] = ()

    def __post_init__(self) -> None:
        if self.env_kind not in ENV_KINDS:
            raise ConfigurationError(
                "env.kind", f"expected one of {sorted(ENV_KINDS)}."
            )
        known = make_environment(self.env_kind).task_types
        unknown = set(self.task_types) - set(known)
        if unknown:
            raise ConfigurationError(
                "env.task_types", f"unknown task types {sorted(unknown)}."
            )
        for name, where in (("n", "env.n"), ("seeds", "output.seeds")):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigurationError(where, "expected an integer >= 1.")
        if self.few_shots < 0:
            raise ConfigurationError("env.few_shots", "must not be negative.")
        if self.cache not in CACHE_MODES:
            raise ConfigurationError(
                "output.cache", f"expected one of {CACHE_MODES}."
            )
        for cell in self.grid:
            if len(cell) != 2 or min(cell) < 1:
                raise ConfigurationError(
                    "ablation.grid", f"bad cell {list(cell)}."
                )
        categories = {category.value for category in Category}
        for knockout in self.knockouts:
            if not set(knockout) <= categories:
                raise ConfigurationError(
                    "ablation.knockouts", f"bad set {list(knockout)}."
                )

    @property
    def all_task_types(self) -> Tuple[str, ...]:
        return self.task_types or make_environment(self.env_kind).task_types

    @property
    def name(self) -> str:
        return self.label or f"{self.env_kind}-{self.run.mode}"

    @property
    def output(self) -> Path:
        return Path(self.out_dir)

    def to_document(self) -> Dict[str, Any]:
        document = asdict(self)
        document["run"] = self.run.to_document()
        document["env_params"] = dict(self.env_params)
        return document


# Configuration loading.

_RUN_KEYS = {f.name for f in fields(RunConfig)} - {"llm"}
_LLM_KEYS = {f.name for f in fields(LlmSettings)} - {"retry"}
_RETRY_KEYS = {f.name for f in fields(RetryPolicy)}
_SECTION_KEYS = {
    "env": {"kind", "task_types", "n", "params", "few_shots"},
    "output": {
        "out_dir",
        "cache",
        "cache_path",
        "dump_state",
        "label",
        "seeds",
        "constitution",
        "rulebook",
    },
    "ablation": {"grid", "knockouts"},
}


def _check_keys(section: str, values: Mapping[str, Any], known: Any) -> None:
    for key in values:
        if key not in known:
            _logger.error("Unknown configuration key `%s.%s`.", section, key)
            raise ConfigurationError(f"{section}.{key}", "unknown key.")


def _tuple(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_tuple(item) for item in value)
    return value


def resolve_config(
    document: Mapping[str, Any],
    overrides: Optional[Mapping[str, Any]] = None,
) -> HarnessConfig:
    """Build a configuration from a parsed document and dotted overrides.

    Parameters
    ----------
    document : mapping
        Sections ``run``, ``env``, ``llm``, ``output`` and ``ablation``.
    overrides : mapping, optional
        ``"section.key"`` values taking precedence over the document;
        ``None`` values are ignored.

    Raises
    ------
    ConfigurationError
        Naming the first invalid field.
    """
    sections: Dict[str, Dict[str, Any]] = {
        name: dict(document.get(name, {}))
        for name in ("run", "env", "llm", "output", "ablation")
    }
    unknown = set(document) - set(sections)
    if unknown:
        raise ConfigurationError(sorted(unknown)[0], "unknown section.")
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, key = dotted.partition(".")
        sections[section][key] = value
    _check_keys("run", sections["run"], _RUN_KEYS)
    _check_keys("llm", sections["llm"], _LLM_KEYS | {"retry"})
    for name in ("env", "output", "ablation"):
        _check_keys(name, sections[name], _SECTION_KEYS[name])
    llm_values = dict(sections["llm"])
    retry = llm_values.pop("retry", {})
    _check_keys("llm.retry", retry, _RETRY_KEYS)
    if not llm_values.get("endpoint"):
        llm_values["endpoint"] = os.environ.get(ENDPOINT_ENV, "")
    try:
        settings = LlmSettings(retry=RetryPolicy(**retry), **llm_values)
    except (TypeError, ValueError) as err:
        raise ConfigurationError("llm", str(err)) from err
    run_values = {key: _tuple(value) for key, value in sections["run"].items()}
    if run_values.get("mode") == "react":
        run_values.setdefault("reflector", "none")
    run = RunConfig(llm=settings, **run_values)
    env = sections["env"]
    output = sections["output"]
    ablation = sections["ablation"]
    return HarnessConfig(
        run=run,
        env_kind=env.get("kind", "gridworld"),
        task_types=_tuple(env.get("task_types", ())),
        n=env.get("n", 10),
        env_params=dict(env.get("params", {})),
        few_shots=env.get("few_shots", 0),
        constitution=output.get("constitution"),
        rulebook=output.get("rulebook"),
        cache=output.get("cache", "off"),
        cache_path=output.get("cache_path"),
        out_dir=output.get("out_dir", "runs"),
        seeds=output.get("seeds", 1),
        dump_state=output.get("dump_state", False),
        label=output.get("label", ""),
        grid=_tuple(ablation.get("grid", ())),
        knockouts=_tuple(ablation.get("knockouts", ())),
    )


def load_config(
    path: "Union[str, Path, None]" = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> HarnessConfig:
    """Read a TOML experiment file and apply overrides.

    Examples
    --------
    >>> config = load_config(overrides={"env.kind": "gripper", "env.n": 2})
    >>> config.run.r_freq, config.all_task_types
    (10, ('transport',))
    """
    document: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as handle:
                document = tomllib.load(handle)
        except tomllib.TOMLDecodeError as err:
            _logger.error("Cannot parse %s.", path)
            raise ConfigurationError(str(path), str(err)) from err
    return resolve_config(document, overrides)


# Building blocks.


def build_client(
    config: HarnessConfig, tracer: Optional[Tracer] = None
) -> LlmClient:
    """Completion client of a configuration, cache included."""
    cache_path = config.cache_path or str(config.output / "cache.jsonl")
    backend: Backend
    if config.cache == "replay":
        backend = CacheBackend(cache_path, None, "replay")
    elif config.cache == "record":
        backend = CacheBackend(cache_path, HttpBackend(), "record")
    else:
        backend = HttpBackend()
    return LlmClient(config.run.llm, backend, tracer)


def dataset_tasks(config: HarnessConfig, seed: int) -> List[TaskSpec]:
    """Tasks of a run, identical for identical seeds."""
    task_types = config.all_task_types
    tasks: List[TaskSpec] = []
    for task_type, task_seed in zip(
        task_types, expand_seeds(seed, len(task_types))
    ):
        tasks.extend(
            generate_tasks(
                config.env_kind,
                task_type,
                config.n,
                task_seed,
                **config.env_params,
            )
        )
    return tasks


def build_reflector(
    config: HarnessConfig,
    llm: Callable[..., str],
    run: Optional[RunConfig] = None,
) -> Optional[Reflector]:
    """Reflector named by the run configuration, ``None`` for ``none``."""
    run = run or config.run
    kind = run.reflector
    if kind == "none":
        return None
    if kind == "neural":
        return NeuralReflector(llm, run.enabled)
    rulebook = load_rulebook(config.rulebook, config.env_kind)
    if kind == "symbolic":
        return SymbolicReflector(rulebook, run.enabled)
    # Exemplars come from tasks outside the evaluated dataset.
    calibration = [
        task
        for task_type, seed in zip(
            config.all_task_types,
            expand_seeds(run.seed + 1, len(config.all_task_types)),
        )
        for task in generate_tasks(
            config.env_kind, task_type, 1, seed, **config.env_params
        )
    ]
    exemplars = harvest_exemplars(calibration, rulebook)
    return NeuroSymbolicReflector(llm, exemplars, run.enabled)


def _few_shots(config: HarnessConfig, seed: int) -> Dict[str, Tuple[str, ...]]:
    if not config.few_shots:
        return {}
    return demonstrations(
        config.env_kind,
        config.all_task_types,
        config.few_shots,
        seed + 2,
        **config.env_params,
    )


# Operations.


class ExperimentResult(NamedTuple):
    """Metrics of every seed of a run and their mean success rate."""

    metrics: List[RunMetrics]
    mean_sr: float


def write_metrics(metrics: RunMetrics, path: "Union[str, Path]") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(metrics.to_document(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def read_metrics(path: "Union[str, Path]") -> RunMetrics:
    """Load a metrics file.

    Raises
    ------
    ReportError
        If the file is not a metrics document of the current schema.
    """
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as err:
        raise ReportError(path, "not a readable JSON file.") from err
    version = document.get("schema_version") if isinstance(
        document, dict
    ) else None
    if version != METRICS_SCHEMA_VERSION:
        _logger.error("Schema version %r in %s.", version, path)
        raise ReportError(
            path,
            f"schema version {version!r}, expected "
            f"{METRICS_SCHEMA_VERSION}.",
        )
    try:
        return RunMetrics.from_document(document)
    except (KeyError, TypeError) as err:
        raise ReportError(path, "malformed metrics document.") from err


def _execute(
    config: HarnessConfig,
    run: RunConfig,
    seed: int,
    label: str,
    llm_factory: Optional[LlmFactory],
) -> RunMetrics:
    output = config.output
    run = replace(run, seed=seed)
    tasks = dataset_tasks(config, seed)
    few_shots = _few_shots(config, seed)
    with Tracer(output / f"{label}.trace.jsonl", config.dump_state) as tracer:
        llm = (llm_factory or (lambda t: build_client(config, t)))(tracer)
        reflector = (
            build_reflector(config, llm, run)
            if run.mode in ("self_sustaining", "reflexion")
            else None
        )
        if run.mode == "self_sustaining":
            outcome = run_dataset(
                tasks,
                run,
                None,
                llm,
                reflector,
                few_shots=few_shots,
                tracer=tracer,
            )
            save(outcome.constitution, output / f"{label}.constitution.json")
            metrics = outcome.metrics
        elif run.mode == "cooperative":
            if config.constitution is None:
                raise ConfigurationError(
                    "output.constitution",
                    "co-operative runs need a constitution file.",
                )
            frozen = load(config.constitution)
            metrics = run_cooperative(
                tasks,
                frozen,
                run,
                None,
                llm,
                few_shots=few_shots,
                tracer=tracer,
            ).metrics
        elif run.mode == "react":
            metrics = run_react(
                tasks, run, None, llm, few_shots=few_shots, tracer=tracer
            ).metrics
        else:
            metrics = run_reflexion(
                tasks,
                run,
                None,
                llm,
                reflector,
                few_shots=few_shots,
                tracer=tracer,
            ).metrics
    metrics.label = label
    metrics.config = {**replace(config, run=run).to_document()}
    write_metrics(metrics, output / f"{label}.metrics.json")
    _logger.info("Run %s: SR %.1f.", label, metrics.sr)
    return metrics


def run_experiment(
    config: HarnessConfig,
    llm_factory: Optional[LlmFactory] = None,
) -> ExperimentResult:
    """Execute the configured run for every derived seed.

    Parameters
    ----------
    config : HarnessConfig
        Experiment configuration.
    llm_factory : callable, optional
        Maps the run's tracer onto a completion callable, the configured
        client by default.

    Returns
    -------
    ExperimentResult
        Metrics per seed, each also written to ``<label>.metrics.json``
        next to its trace and, for self-sustaining runs, its final
        constitution.
    """
    seeds = (
        [config.run.seed]
        if config.seeds == 1
        else expand_seeds(config.run.seed, config.seeds)
    )
    results = []
    for seed in seeds:
        label = config.name if config.seeds == 1 else f"{config.name}-{seed}"
        results.append(_execute(config, config.run, seed, label, llm_factory))
    mean_sr = round(float(np.mean([metrics.sr for metrics in results])), 1)
    return ExperimentResult(results, mean_sr)


def calibrate(
    config: HarnessConfig,
    factors: "Optional[Sequence[int]]" = None,
    llm_factory: Optional[LlmFactory] = None,
) -> List[Path]:
    """Write one meta-advisor constitution per calibration factor.

    Returns
    -------
    list of Path
        ``<out_dir>/<env_kind>-meta-advisor-f<factor>.json`` files.
    """
    run = config.run
    if run.reflector == "none":
        run = replace(run, reflector="neural")
    paths = []
    for factor in factors or (run.calibration_factor,):
        label = f"{config.env_kind}-meta-advisor-f{factor}"
        path = config.output / f"{label}.json"
        with Tracer(
            config.output / f"{label}.trace.jsonl", config.dump_state
        ) as tracer:
            llm = (llm_factory or (lambda t: build_client(config, t)))(tracer)
            constitution = calibrate_meta_advisor(
                config.env_kind,
                config.all_task_types,
                factor,
                replace(run, calibration_factor=factor),
                llm,
                build_reflector(config, llm, run),
                tracer=tracer,
                **config.env_params,
            )
        save(constitution, path)
        _logger.info("Wrote %s with %d rules.", path, len(constitution))
        paths.append(path)
    return paths


def _summary_cells(metrics: RunMetrics) -> List[str]:
    return [
        f"{metrics.sr:.1f}",
        f"{metrics.avg_turns:.2f}",
        str(metrics.total_calls),
    ]


def knockout_label(knockout: "Sequence[str]") -> str:
    """Row name of a category knockout cell."""
    if not knockout:
        return "all"
    ordered = [c.value for c in CATEGORY_ORDER if c.value in set(knockout)]
    return "w/o " + " + ".join(ordered)


class Ablation(NamedTuple):
    """Metrics and tables of an ablation."""

    grid: List[Tuple[Tuple[int, int], RunMetrics]]
    knockouts: List[Tuple[Tuple[str, ...], RunMetrics]]
    grid_table: str
    knockout_table: str


def ablate(
    config: HarnessConfig, llm_factory: Optional[LlmFactory] = None
) -> Ablation:
    """Run every cadence cell and every knockout cell on the same tasks.

    Cells without an explicit grid or knockout list fall back to the
    default cadence grid.
    """
    grid = config.grid or (DEFAULT_GRID if not config.knockouts else ())
    grid_results = []
    for r_freq, s_freq in grid:
        run = replace(config.run, r_freq=r_freq, s_freq=s_freq)
        label = f"{config.name}-r{r_freq}-s{s_freq}"
        grid_results.append(
            (
                (r_freq, s_freq),
                _execute(config, run, config.run.seed, label, llm_factory),
            )
        )
    knockout_results = []
    for knockout in config.knockouts:
        kept = tuple(
            category.value
            for category in CATEGORY_ORDER
            if category.value not in set(knockout)
        )
        run = replace(config.run, categories=kept)
        label = f"{config.name}-without-{'-'.join(knockout) or 'none'}"
        knockout_results.append(
            (
                tuple(knockout),
                _execute(config, run, config.run.seed, label, llm_factory),
            )
        )
    grid_table = _markdown(
        ["(r_freq, s_freq)", "SR", "Avg turns", "LLM calls"],
        [
            [f"({r}, {s})", *_summary_cells(m)]
            for (r, s), m in grid_results
        ],
    )
    knockout_table = _markdown(
        ["Categories", "SR", "Avg turns", "LLM calls"],
        [
            [knockout_label(k), *_summary_cells(m)]
            for k, m in knockout_results
        ],
    )
    return Ablation(grid_results, knockout_results, grid_table, knockout_table)


# Reports.


class ReportRow(NamedTuple):
    """One configuration in a report."""

    label: str
    sr: float
    avg_turns: float
    calls: Tuple[Tuple[str, int], ...]

    @classmethod
    def of(cls, metrics: RunMetrics) -> "ReportRow":
        return cls(
            metrics.label,
            metrics.sr,
            metrics.avg_turns,
            tuple((role, metrics.llm_calls.get(role, 0)) for role in ROLES),
        )

    @property
    def total_calls(self) -> int:
        return sum(count for _, count in self.calls)

    def cells(self) -> List[str]:
        return [
            self.label,
            f"{self.sr:.1f}",
            f"{self.avg_turns:.2f}",
            *(str(count) for _, count in self.calls),
            str(self.total_calls),
        ]


class Report(NamedTuple):
    """A comparison table as markdown and CSV."""

    rows: List[ReportRow]
    markdown: str
    csv: str


def _markdown(header: "Sequence[str]", rows: "Sequence[Sequence[str]]") -> str:
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join("---" for _ in header) + "|",
    ]
    lines.extend("| " + " | ".join(row) + " |" for row in rows)
    return "\n".join(lines) + "\n"


def report(metrics: "Sequence[RunMetrics]") -> Report:
    """Tabulate runs: one row per run, in the given order.

    Raises
    ------
    ValueError
        If `metrics` is empty.

    Examples
    --------
    >>> run = RunMetrics(75.0, 12.5, {"action": 50, "reflection": 9})
    >>> run.label = "gripper-neural"
    >>> print(report([run]).csv, end="")
    label,sr,avg_turns,action,reflection,summarization,critique,total_calls
    gripper-neural,75.0,12.50,50,9,0,0,59
    """
    if not metrics:
        _logger.error("Invalid input: nothing to report.")
        raise ValueError("Cannot report, `metrics` is empty.")
    rows = [ReportRow.of(item) for item in metrics]
    table = [row.cells() for row in rows]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    writer.writerows(table)
    header = ["Run", "SR", "Avg turns", *ROLES, "Total calls"]
    return Report(rows, _markdown(header, table), buffer.getvalue())


def report_files(paths: "Sequence[Union[str, Path]]") -> Report:
    """:func:`report` over metrics files.

    Raises
    ------
    ReportError
        Naming the first file that cannot be read.
    """
    return report([read_metrics(path) for path in paths])


def read_report_csv(source: "Union[str, Path]") -> List[ReportRow]:
    """Parse a report CSV file back into rows.

    Raises
    ------
    ReportError
        If the header does not match the report columns.
    """
    text = Path(source).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != REPORT_COLUMNS:
        raise ReportError(source, "unexpected report header.")
    rows = []
    for cells in reader:
        try:
            counts = [int(cell) for cell in cells[3 : 3 + len(ROLES)]]
            rows.append(
                ReportRow(
                    cells[0],
                    float(cells[1]),
                    float(cells[2]),
                    tuple(zip(ROLES, counts)),
                )
            )
        except (IndexError, ValueError) as err:
            raise ReportError(source, f"bad row {cells}.") from err
    return rows


