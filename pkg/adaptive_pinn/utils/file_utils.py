"""
File utility functions for reports, checkpoints and datasets.

Every writer goes through :func:`atomic_write_text`: content is written to a
temporary file next to the destination and renamed into place, so a report is
either complete or absent.
"""

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, Union

import pandas as pd
from loguru import logger

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.17g"


def atomic_write_text(path: PathLike, text: str) -> Path:
    """
    Write text atomically (temp file + rename).

    Args:
        path: Destination path
        text: File content

    Returns:
        Destination path
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)

    fd, temp_path = tempfile.mkstemp(prefix=f".{target.name}.", dir=str(target.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(temp_path, target)
    except Exception:
        if os.path.exists(temp_path):
            os.unlink(temp_path)
        raise

    logger.debug(f"Wrote {target}")
    return target


def write_json(path: PathLike, payload: Any) -> Path:
    """Write a JSON document with sorted keys so reruns are byte-identical."""
    text = json.dumps(payload, indent=2, sort_keys=True, default=str)
    return atomic_write_text(path, text + "\n")


def write_csv(path: PathLike, frame: pd.DataFrame) -> Path:
    """Write a data frame as CSV with full-precision floats."""
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return atomic_write_text(path, text)


def read_json(path: PathLike) -> Any:
    """Read a JSON document."""
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def run_digest(directory: PathLike, exclude: Iterable[str] = ("config-resolved.json",)) -> Dict[str, str]:
    """
    SHA-256 digest of every report file in a run directory.

    Two runs with the same seed and configuration produce equal digests; the
    resolved configuration is excluded by default because it records the
    output directory.

    Args:
        directory: Run output directory
        exclude: File names to skip

    Returns:
        Mapping of relative POSIX path to hex digest, sorted by path
    """
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"Run directory not found: {root}")
    skipped = set(exclude)
    digests = {}
    for path in sorted(root.rglob("*")):
        if not path.is_file() or path.name in skipped or path.name.startswith("."):
            continue
        digests[path.relative_to(root).as_posix()] = hashlib.sha256(path.read_bytes()).hexdigest()
    return digests
