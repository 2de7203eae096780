"""Experiment harness: configuration, runs, ablations and reports.

Experiments are described by a TOML file resolved into a
:class:`HarnessConfig`. Runs write a JSON Lines trace, a metrics file and,
for self-sustaining runs, the final constitution into the output directory.
"""
from reflect_kit._harness import (
    DEFAULT_GRID,
    ENDPOINT_ENV,
    REPORT_COLUMNS,
    Ablation,
    ExperimentResult,
    HarnessConfig,
    Report,
    ReportError,
    ReportRow,
    ablate,
    build_client,
    build_reflector,
    calibrate,
    dataset_tasks,
    knockout_label,
    load_config,
    read_metrics,
    read_report_csv,
    report,
    report_files,
    resolve_config,
    run_experiment,
    write_metrics,
)
from reflect_kit._tracing import (
    EVENT_TYPES,
    METRICS_SCHEMA_VERSION,
    RunMetrics,
    TaskRecord,
    Tracer,
)

__all__ = [
    "DEFAULT_GRID",
    "ENDPOINT_ENV",
    "EVENT_TYPES",
    "METRICS_SCHEMA_VERSION",
    "REPORT_COLUMNS",
    "Ablation",
    "ExperimentResult",
    "HarnessConfig",
    "Report",
    "ReportError",
    "ReportRow",
    "RunMetrics",
    "TaskRecord",
    "Tracer",
    "ablate",
    "build_client",
    "build_reflector",
    "calibrate",
    "dataset_tasks",
    "knockout_label",
    "load_config",
    "read_metrics",
    "read_report_csv",
    "report",
    "report_files",
    "resolve_config",
    "run_experiment",
    "write_metrics",
]
