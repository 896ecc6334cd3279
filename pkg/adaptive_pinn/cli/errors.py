"""
Error reporting for the command line: exception to exit-code mapping and an
argument parser that reports usage problems as toolkit errors.
"""

import argparse
import sys
from typing import Callable, List, NoReturn, Optional, TextIO

from loguru import logger
from pydantic import ValidationError as PydanticValidationError

from ..utils.validation import AdaptivePinnError, DataError, ValidationError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class CliArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting on bad flags."""

    def valid_flags(self) -> List[str]:
        flags = []
        for action in self._actions:
            flags.extend(s for s in action.option_strings if s.startswith("--"))
        return sorted(set(flags))

    def error(self, message: str) -> NoReturn:
        raise ValidationError(f"{message} (valid flags: {' '.join(self.valid_flags())})")

    def parse_args(self, args=None, namespace=None):
        parsed, extras = self.parse_known_args(args, namespace)
        if extras:
            # Report against the subcommand so its own flags are listed.
            target = self
            for action in self._actions:
                if isinstance(action, argparse._SubParsersAction):
                    target = action.choices.get(getattr(parsed, action.dest, None), self)
            target.error(f"unrecognized arguments: {' '.join(extras)}")
        return parsed


def describe(exc: BaseException) -> AdaptivePinnError:
    """Translate foreign exceptions into the toolkit hierarchy."""
    if isinstance(exc, AdaptivePinnError):
        return exc
    if isinstance(exc, PydanticValidationError):
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first.get("loc", ()))
        return ValidationError(f"{where}: {first['msg']}" if where else first["msg"])
    if isinstance(exc, OSError):
        return DataError(f"{exc.strerror or exc}: {exc.filename}" if exc.filename else str(exc))
    return AdaptivePinnError(str(exc))


def format_error(error: AdaptivePinnError) -> str:
    """One machine-parsable line: ``error: <kind>: <message>``."""
    message = " ".join(str(error).split())
    return f"error: {error.kind}: {message}"


def run_guarded(action: Callable[[], int], stream: Optional[TextIO] = None) -> int:
    """
    Run a command and turn failures into an exit code.

    Args:
        action: Command body returning an exit code
        stream: Where the error line goes (stderr when None)

    Returns:
        Exit code (0 ok, 1 usage, 2 data, 3 numerical)
    """
    try:
        return action()
    except (AdaptivePinnError, PydanticValidationError, OSError) as e:
        error = describe(e)
        logger.debug(f"Command failed: {error!r}")
        print(format_error(error), file=stream or sys.stderr)
        return error.exit_code
