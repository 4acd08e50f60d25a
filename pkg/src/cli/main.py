"""
Command Line Module

``wavepp`` entry point: single runs, convergence sweeps, the fixed
iteration CG study and the processing-count table.

Exit codes: 0 success, 1 run failure or order assertion violated,
2 invalid configuration.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import structlog
import yaml
from pydantic import ValidationError

from src.diagnostics.tables import format_table, write_report
from src.models.config import RunConfig
from src.models.reports import ConvergenceRow, ConvergenceTable
from src.processing.ladders import processing_counts_table
from src.problems.catalog import ProblemId
from src.utils.errors import ConfigError, ProblemError, StageError, WaveppError
from src.utils.observability import configure_logging
from src.utils.settings import get_settings
from src.workflows.pipeline import assert_orders, run_iteration_study, run_single, run_sweep


logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

# Coarsest elements-per-wavelength of the 1D sweeps, by p
BASE_N = {1: 20, 2: 5, 3: 5}

# argparse dest -> RunConfig field
CONFIG_FIELDS = {
    "problem": "problem",
    "p": "p",
    "q": "q",
    "level": "level",
    "N": "N",
    "solver": "solver",
    "cg_iters": "cg_iterations",
    "safety": "safety",
    "post_degree": "post_degree",
    "seed_projection": "seed_projection",
    "sigma_bound": "sigma_bound",
    "negative_norm": "negative_norm",
    "final_time": "final_time",
    "seed": "seed",
    "out": "out",
    "format": "format",
    "trace": "trace",
    "trace_every": "trace_every",
    "trace_out": "trace_out",
    "profile_out": "profile_out",
    "mesh_out": "mesh_out",
}


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavepp",
        description="Finite element wave solver with q-step pre- and post-processing",
    )
    parser.add_argument("--config", type=Path, help="YAML file with run defaults")
    parser.add_argument("--problem", choices=[p.value for p in ProblemId])
    parser.add_argument("--p", type=int, help="polynomial degree of the time loop (1-3)")
    parser.add_argument("--q", type=int, help="processing order")

    refinement = parser.add_mutually_exclusive_group()
    refinement.add_argument("--level", type=int, help="2D mesh level")
    refinement.add_argument("--N", dest="N", type=int, help="1D elements per wavelength")

    parser.add_argument("--sweep", action="store_true", help="run a convergence sweep")
    parser.add_argument("--levels", type=_int_list, help="sweep levels (2D), e.g. 1,2,3")
    parser.add_argument("--Ns", type=_int_list, help="sweep N values (1D), e.g. 5,10,20")
    parser.add_argument("--full", action="store_true", help="include level 3 for p=3 in 2D sweeps")

    parser.add_argument("--solver", choices=["direct", "cg"])
    parser.add_argument("--cg-iters", dest="cg_iters", type=int, help="CG iterations per solve")
    parser.add_argument("--cg-iters-list", dest="cg_iters_list", type=_int_list,
                        help="iteration study budgets, e.g. 0,10,100")
    parser.add_argument("--safety", type=float, help="fraction of the stable step (default 0.9)")
    parser.add_argument("--post-degree", dest="post_degree", type=int)
    parser.add_argument("--seed-projection", dest="seed_projection", choices=["nodal", "consistent"])
    parser.add_argument("--sigma-bound", dest="sigma_bound", choices=["consistent", "lumped"],
                        help="element mass in the step-size bound (default: by dimension)")
    parser.add_argument("--negative-norm", dest="negative_norm", type=int,
                        help="also report the relative adapted negative norm of order m")
    parser.add_argument("--final-time", dest="final_time", type=float, help="override T")
    parser.add_argument("--seed", type=int, help="mesh jitter seed")

    parser.add_argument("--out", type=Path, help="report path")
    parser.add_argument("--format", choices=["csv", "json"])
    parser.add_argument("--trace", action="store_true", default=None, help="record the energy trace")
    parser.add_argument("--trace-every", dest="trace_every", type=int)
    parser.add_argument("--trace-out", dest="trace_out", type=Path)
    parser.add_argument("--profile-out", dest="profile_out", type=Path, help="error profile CSV")
    parser.add_argument("--mesh-out", dest="mesh_out", type=Path, help="write the mesh file")

    parser.add_argument("--assert-orders", dest="assert_orders", action="store_true",
                        help="exit 1 if an observed order falls below target - 0.5")
    parser.add_argument("--show-counts", dest="show_counts", action="store_true",
                        help="print the (q, alpha, beta) table and exit")
    parser.add_argument("--log-level", dest="log_level")
    parser.add_argument("--json-logs", dest="json_logs", action="store_true", default=None)
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """YAML defaults overridden by explicit flags."""
    values: Dict[str, Any] = {}
    if args.config is not None:
        try:
            loaded = yaml.safe_load(args.config.read_text()) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot read config file {args.config}: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {args.config} must hold a mapping")
        values.update(loaded)

    for dest, field in CONFIG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is not None:
            values[field] = value
    if args.level is not None:
        values.pop("N", None)
    if args.N is not None:
        values.pop("level", None)

    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def sweep_levels(config: RunConfig, args: argparse.Namespace) -> List[int]:
    if config.is_1d:
        if args.Ns:
            return list(args.Ns)
        base = BASE_N[config.p]
        return [base, 2 * base, 4 * base]
    if args.levels:
        return list(args.levels)
    if config.p == 3 and not args.full:
        return [1, 2]
    return [1, 2, 3]


def _print_counts(q_max: int = 10) -> None:
    print("q  alpha  beta")
    for q, alpha, beta in processing_counts_table(q_max):
        print(f"{q:<2} {alpha:>5} {beta:>5}")


def _execute(config: RunConfig, args: argparse.Namespace) -> int:
    if args.cg_iters_list:
        reports = run_iteration_study(config, args.cg_iters_list)
        table = ConvergenceTable(rows=[ConvergenceRow(report=r) for r in reports])
        for label, report in zip([*map(str, args.cg_iters_list), "direct"], reports):
            print(f"N_it={label:>6}  eE={report.eE:.3e}  e0={report.e0:.3e}")
        if config.out is not None:
            write_report(table, config.format, config.out)
        return EXIT_OK

    if args.sweep or args.levels or args.Ns:
        table = run_sweep(config, sweep_levels(config, args))
        print(format_table(table))
        if args.assert_orders:
            violations = assert_orders(table)
            for message in violations:
                logger.error("order_assertion_failed", detail=message)
            if violations:
                return EXIT_FAILURE
        return EXIT_OK

    report = run_single(config)
    table = ConvergenceTable(rows=[ConvergenceRow(report=report)])
    print(format_table(table))
    if config.out is not None:
        write_report(table, config.format, config.out)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    configure_logging(
        args.log_level or settings.log_level,
        settings.log_json if args.json_logs is None else args.json_logs,
    )

    if args.show_counts:
        _print_counts()
        return EXIT_OK

    try:
        config = load_config(args)
    except (ConfigError, ProblemError) as e:
        logger.error("invalid_configuration", error=str(e))
        return EXIT_CONFIG

    try:
        return _execute(config, args)
    except StageError as e:
        if isinstance(e.cause, (ConfigError, ProblemError)):
            logger.error("invalid_configuration", stage=e.stage, error=str(e.cause))
            return EXIT_CONFIG
        logger.error("run_failed", stage=e.stage, error=str(e.cause))
        return EXIT_FAILURE
    except (ConfigError, ProblemError) as e:
        logger.error("invalid_configuration", error=str(e))
        return EXIT_CONFIG
    except WaveppError as e:
        logger.error("run_failed", error=str(e))
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
