"""
Main Application - command-line entry point for the reversionary Heston toolkit
"""
import argparse
import json
import os
import sys

from loguru import logger

# Add src to path
sys.path.append(os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src'))

from orchestrator import get_orchestrator
from settings import load_runtime_settings


def build_parser(commands) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Reversionary Heston toolkit")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, description in commands.items():
        sub = subparsers.add_parser(name, help=description)
        sub.add_argument("--config", required=True, help="JSON run configuration")
        sub.add_argument("--out", default=None, help="output directory (default: REVHESTON_OUTPUT_DIR)")
        sub.add_argument("--seed", type=int, default=None, help="random seed (simulate)")
        sub.add_argument("--threads", type=int, default=None,
                         help="worker threads, 0 = one per CPU (default: REVHESTON_THREADS)")
    return parser


def configure_logging() -> None:
    logger.remove()
    try:
        level = load_runtime_settings()["log_level"]
    except Exception:
        level = "INFO"
    logger.add(sys.stderr, level=level)


def main(argv=None) -> int:
    configure_logging()
    orchestrator = get_orchestrator()
    args = build_parser(orchestrator.list_commands()).parse_args(argv)
    result = orchestrator.run(args.command, args.config, args.out, args.seed, args.threads)
    print(json.dumps(result, indent=2, default=str))
    return result["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
