"""Command-line interface: ``reflect-kit run|calibrate|ablate|report``."""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from reflect_kit.__about__ import __version__
from reflect_kit._agent_loop import MODES, REFLECTOR_KINDS, ConfigurationError
from reflect_kit._constitution import ConstitutionError
from reflect_kit._environment import ENV_KINDS, TaskGenerationError
from reflect_kit._harness import (
    HarnessConfig,
    ReportError,
    ablate,
    calibrate,
    load_config,
    report_files,
    run_experiment,
)
from reflect_kit._llm_client import CACHE_MODES, LlmClientError
from reflect_kit._reflectors import RulebookError

_logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _csv(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _cell(value: str) -> List[int]:
    parts = _csv(value)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(
            f"expected `r_freq,s_freq`, got `{value}`"
        )
    return [int(part) for part in parts]


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "run.mode": args.mode,
        "run.reflector": args.reflector,
        "run.r_freq": args.r_freq,
        "run.s_freq": args.s_freq,
        "run.turns_max": args.max_turns,
        "run.calibration_factor": args.calibration_factor,
        "run.seed": args.seed,
        "run.categories": args.categories,
        "env.kind": args.env,
        "env.task_types": args.task_types,
        "env.n": args.n,
        "llm.endpoint": args.llm_endpoint,
        "llm.model": args.llm_model,
        "output.cache": args.cache,
        "output.out_dir": args.out_dir,
        "output.constitution": args.constitution,
        "output.seeds": args.seeds,
        "output.label": args.label,
        "output.dump_state": True if args.dump_state else None,
    }


def _config(args: argparse.Namespace) -> HarnessConfig:
    config = load_config(args.config, _overrides(args))
    if args.trials is not None:
        name = "trials"
        if config.run.mode == "reflexion":
            name = "reflexion_trials"
        run = replace(config.run, **{name: args.trials})
        config = replace(config, run=run)
    return config


def cmd_run(args: argparse.Namespace) -> int:
    config = _config(args)
    result = run_experiment(config)
    calls = sum(metrics.total_calls for metrics in result.metrics)
    print(
        f"{config.name}: SR {result.mean_sr:.1f} over "
        f"{len(result.metrics)} seed(s), {calls} LLM calls, "
        f"output in {config.out_dir}"
    )
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    if args.env is None and args.config is None:
        args.parser.error("calibrate needs --env or --config")
    config = _config(args)
    for path in calibrate(config, args.factors):
        print(path)
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _config(args)
    if args.grid or args.knockout:
        config = replace(
            config,
            grid=tuple(tuple(cell) for cell in args.grid or ()),
            knockouts=tuple(tuple(cell) for cell in args.knockout or ()),
        )
    result = ablate(config)
    tables = [
        table
        for table, cells in (
            (result.grid_table, result.grid),
            (result.knockout_table, result.knockouts),
        )
        if cells
    ]
    text = "\n".join(tables)
    output = Path(config.out_dir)
    output.mkdir(parents=True, exist_ok=True)
    (output / f"{config.name}-ablation.md").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    result = report_files(args.metrics)
    if args.out is not None:
        prefix = Path(args.out)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        prefix.with_suffix(".md").write_text(result.markdown, encoding="utf-8")
        prefix.with_suffix(".csv").write_text(result.csv, encoding="utf-8")
    print(result.markdown, end="")
    return EXIT_OK


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML experiment file")
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--reflector", choices=REFLECTOR_KINDS)
    parser.add_argument("--env", choices=sorted(ENV_KINDS))
    parser.add_argument("--task-types", type=_csv, help="comma separated")
    parser.add_argument("--n", type=int, help="tasks per task type")
    parser.add_argument("--r-freq", type=int)
    parser.add_argument("--s-freq", type=int)
    parser.add_argument("--max-turns", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--calibration-factor", type=int)
    parser.add_argument(
        "--categories", type=_csv, help="enabled rule categories"
    )
    parser.add_argument("--constitution", help="frozen constitution file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--seeds", type=int, help="number of derived seeds")
    parser.add_argument("--llm-endpoint")
    parser.add_argument("--llm-model")
    parser.add_argument("--cache", choices=CACHE_MODES)
    parser.add_argument("--out-dir")
    parser.add_argument("--label")
    parser.add_argument("--dump-state", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reflect-kit",
        description="Run reflective agents in text environments.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one configuration")
    _add_run_options(run)
    run.set_defaults(func=cmd_run)

    cal = sub.add_parser("calibrate", help="Derive a frozen constitution")
    _add_run_options(cal)
    cal.add_argument(
        "--factors", type=int, nargs="+", help="calibration factors to sweep"
    )
    cal.set_defaults(func=cmd_calibrate, parser=cal)

    abl = sub.add_parser("ablate", help="Run a cadence or knockout grid")
    _add_run_options(abl)
    abl.add_argument(
        "--grid", type=_cell, nargs="+", help="cells like `10,10`"
    )
    abl.add_argument(
        "--knockout",
        type=_csv,
        nargs="+",
        help="suppressed category sets like `abstract,error`",
    )
    abl.set_defaults(func=cmd_ablate)

    rep = sub.add_parser("report", help="Tabulate metrics files")
    rep.add_argument("metrics", nargs="+", help="metrics JSON files")
    rep.add_argument("--out", help="path prefix of the .md and .csv files")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point, returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=args.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return int(args.func(args))
    except (ConfigurationError, TaskGenerationError, RulebookError) as err:
        print(f"reflect-kit: configuration error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (
        LlmClientError,
        ConstitutionError,
        ReportError,
        OSError,
    ) as err:
        _logger.debug("Command failed.", exc_info=True)
        print(f"reflect-kit: {err}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
