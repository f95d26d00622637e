#!/usr/bin/env python3
"""
Referendum Ledger
Command-line entry point: run scenarios, replay dumps, verify ledger integrity.
"""

import argparse
import logging
import sys
from pathlib import Path

# Add the current directory to Python path
current_dir = Path(__file__).parent
sys.path.insert(0, str(current_dir))

from core.controller import ReferendumController
from modules.scenario import ScenarioConfigError, load_scenario
from utils.config import APP_DESCRIPTION, APP_NAME, APP_VERSION, DEFAULT_OUTPUT_DIR, EXIT_CONFIG_ERROR, EXIT_INVALID, EXIT_VALID
from utils.logger import log_exception, log_system_info, set_log_level, setup_logger


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="referendum-sim", description=APP_DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
    parser.add_argument("--verbose", action="store_true", help="Debug logging and system information")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Execute a scenario and write ledger.dump, report.txt, trace.txt")
    run.add_argument("config", help="Scenario JSON file")
    run.add_argument("--out", default=DEFAULT_OUTPUT_DIR, help=f"Output directory (default: {DEFAULT_OUTPUT_DIR})")
    run.add_argument("--seed", type=int, default=None, help="Override the scenario seed")

    replay = commands.add_parser("replay", help="Re-verify an existing dump against its scenario")
    replay.add_argument("dump", help="Ledger dump file")
    replay.add_argument("config", help="Scenario JSON file the dump was produced from")
    replay.add_argument("--seed", type=int, default=None, help="Seed the dump was run with, if overridden")
    replay.add_argument("--expected-length", type=int, default=None,
                        help="Published record count; a shorter dump is reported as truncated")

    verify = commands.add_parser("verify", help="Check the hash chain of a dump")
    verify.add_argument("dump", help="Ledger dump file")
    return parser


def main(argv=None) -> int:
    """Main application entry point."""
    args = build_parser().parse_args(argv)
    logger = setup_logger()
    set_log_level(logging.DEBUG if args.verbose else logging.INFO)
    if args.verbose:
        log_system_info(logger)

    controller = ReferendumController()
    try:
        if args.command == "verify":
            violation = controller.verify(args.dump)
            if violation is None:
                print("ledger_integrity: ok")
                return EXIT_VALID
            print(f"ledger_integrity: {violation.describe()}")
            return EXIT_INVALID

        config = load_scenario(args.config)
        # Keys and parameters derive from the seed; replay needs the one run used
        if args.seed is not None:
            config = config.with_seed(args.seed)

        if args.command == "run":
            result = controller.run(config, args.out)
            print(result.report.serialize(), end="")
            return result.exit_code

        report, exit_code = controller.replay(args.dump, config, args.expected_length)
        print(report.serialize(), end="")
        return exit_code

    except ScenarioConfigError as e:
        for diagnostic in e.diagnostics:
            logger.error(f"Config error: {diagnostic}")
        return EXIT_CONFIG_ERROR
    except (OSError, ValueError) as e:
        log_exception(logger, f"{args.command} failed")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
