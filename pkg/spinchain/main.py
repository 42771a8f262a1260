import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import models
from .database import SessionLocal, get_session, init_db
from .errors import SpinChainError
from .logger_config import setup_logger
from .scenario import (
    emit_outputs,
    emit_plot_scripts,
    load_config,
    load_preset,
    run_scenario,
    scenario_hash,
)
from .schemas import ScenarioConfig
from .validation import DEFAULT_SAMPLES, DEFAULT_SITES, DEFAULT_TOL, validation_suite

logger = setup_logger("spinchain")

EXIT_OK = 0
EXIT_ORACLE_FAILURE = 1
EXIT_DOMAIN_ERROR = 2


def resolve_config(ref: str) -> ScenarioConfig:
    """A path to a TOML scenario, or the name of a shipped preset."""
    path = Path(ref)
    if path.suffix == ".toml" or path.exists():
        return load_config(path)
    return load_preset(ref)


def _record(args, command: str, config: Optional[ScenarioConfig], output_dir, n_tables, status, reports=()):
    if args.no_ledger:
        return
    init_db()
    with get_session(SessionLocal) as db:
        run = models.record_run(
            db,
            command,
            scenario_hash=scenario_hash(config) if config is not None else None,
            model=config.model.name if config is not None else None,
            n_sites=config.chain.n_sites if config is not None else None,
            output_dir=str(output_dir) if output_dir is not None else None,
            n_tables=n_tables,
            status=status,
        )
        if reports:
            models.record_oracle_checks(db, run, reports)


def cmd_scenario(args) -> int:
    config = resolve_config(args.config)
    output_dir = Path(args.output or config.output.directory)
    try:
        tables = run_scenario(config, args.command, threads=args.threads)
        written = emit_outputs(tables, output_dir, config)
    except SpinChainError:
        _record(args, args.command, config, output_dir, 0, "failed")
        raise
    _record(args, args.command, config, output_dir, len(written), "ok")
    for path in written:
        print(path)
    return EXIT_OK


def cmd_validate(args) -> int:
    reports = validation_suite(n=args.n, tol=args.tol, seed=args.seed, samples=args.samples)
    for report in reports:
        print(report)
    passed = all(r.passed for r in reports)
    _record(args, "validate", None, None, 0, "ok" if passed else "failed", reports)
    if not passed:
        logger.error("Oracle validation failed")
        return EXIT_ORACLE_FAILURE
    return EXIT_OK


def cmd_emit_plots(args) -> int:
    for path in emit_plot_scripts(args.directory):
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinchain",
        description="Correlation and scrambling dynamics of periodic spin-1/2 chains",
    )
    parser.add_argument("--output", help="output directory (overrides [output].directory)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    parser.add_argument("--seed", type=int, default=0, help="seed for sampled validation inputs")
    parser.add_argument("--no-ledger", action="store_true", help="do not record the run in the ledger database")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (
        ("evolve", "measure grids over (pair, t)"),
        ("qdp-sweep", "measure changes over (t0, t) caused by a QDP"),
        ("tmi", "tripartite information vs t, or the p,q landscape"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="scenario TOML file or preset name")
        p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("validate", help="compare analytic paths with exact diagonalization")
    p.add_argument("--n", type=int, default=DEFAULT_SITES, help="number of sites")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="maximum allowed absolute difference")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="random points per check")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("emit-plots", help="regenerate plot scripts for the CSVs in a directory")
    p.add_argument("directory")
    p.set_defaults(func=cmd_emit_plots)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpinChainError as exc:
        logger.error(str(exc))
        return EXIT_DOMAIN_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
