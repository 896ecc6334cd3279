"""
Command-line layer for the adaptive PINN toolkit.
"""

from .commands import COMMANDS, build_parser, dispatch, resolve_run
from .errors import CliArgumentParser, format_error, run_guarded

__all__ = [
    "COMMANDS",
    "build_parser",
    "dispatch",
    "resolve_run",
    "CliArgumentParser",
    "format_error",
    "run_guarded",
]
