"""
Command-line entry point for the adaptive PINN toolkit.
"""

import sys
from typing import List, Optional

from loguru import logger

from .cli.commands import build_parser, dispatch
from .cli.errors import EXIT_USAGE, format_error, run_guarded
from .config import settings
from .utils.validation import ValidationError


def configure_logging(level: str = settings.LOG_LEVEL, log_file: Optional[str] = settings.LOG_FILE):
    """Configure loguru sinks: a rotating file (when set) and stderr."""
    logger.remove()
    if log_file:
        logger.add(
            log_file,
            level="DEBUG",
            rotation="10 MB",
            retention="7 days",
            format="{time:YYYY-MM-DD HH:mm:ss} | {level} | {name}:{function}:{line} | {message}"
        )
    logger.add(sys.stderr, level=level)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one command.

    Args:
        argv: Arguments without the program name (``sys.argv[1:]`` when None)

    Returns:
        Exit code: 0 ok, 1 usage, 2 data error, 3 numerical failure
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ValidationError as e:
        print(format_error(e), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    options = vars(args)
    if options.get("verbose"):
        level = "DEBUG"
    elif options.get("quiet"):
        level = "WARNING"
    else:
        level = settings.LOG_LEVEL
    configure_logging(level, settings.LOG_FILE)

    return run_guarded(lambda: dispatch(args))


if __name__ == "__main__":
    sys.exit(main())
