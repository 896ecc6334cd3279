"""
Dataset service: CSV loading, correlation-based synthesis, normalization and
random splitting.
"""

import math
import re
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import ValidationError as PydanticValidationError

from ..models.dataset import Dataset, NormStats, SynthDomain, SynthSpec, TargetStats
from ..utils.file_utils import FLOAT_FORMAT, atomic_write_text
from ..utils.seeding import make_rng
from ..utils.validation import ArrayValidator, DataError, ValidationError

_UNIT_PATTERN = re.compile(r"^\s*(?P<name>[^\[\]]+?)\s*\[(?P<unit>[^\]]*)\]\s*$")


def water_nusselt(re_number, pr):
    """Dittus-Boelter heating correlation: Nu = 0.023 Re^0.8 Pr^0.4."""
    return 0.023 * np.power(re_number, 0.8) * np.power(pr, 0.4)


def sodium_nusselt(pe):
    """Seban-Shimazaki liquid-metal correlation: Nu = 5.0 + 0.025 Pe^0.8."""
    return 5.0 + 0.025 * np.power(pe, 0.8)


def correlation_targets(domain: SynthDomain, columns: Dict[str, np.ndarray]) -> np.ndarray:
    """
    Evaluate the domain correlation on named feature columns.

    Args:
        domain: Synthetic domain
        columns: Mapping column name -> values

    Returns:
        Noise-free Nusselt numbers
    """
    domain = SynthDomain(domain)
    if domain is SynthDomain.WATER:
        return water_nusselt(columns["re"], columns["pr"])
    return sodium_nusselt(columns["pe"])


def _parse_header(header: Sequence[str]) -> Tuple[list, list]:
    names, units = [], []
    for raw in header:
        match = _UNIT_PATTERN.match(str(raw))
        if match:
            names.append(match.group("name"))
            units.append(match.group("unit"))
        else:
            names.append(str(raw).strip())
            units.append("-")
    return names, units


def load_csv(path: Union[str, Path], target_column: Optional[str] = None) -> Dataset:
    """
    Load a dataset from CSV (header row, features then target).

    Args:
        path: CSV file path
        target_column: Name of the target column; the last column when absent
            from the header or not given

    Returns:
        Dataset with N rows and D = columns - 1 features
    """
    file_path = Path(path)
    if not file_path.exists():
        raise DataError(f"Dataset file not found: {file_path}")

    try:
        frame = pd.read_csv(file_path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DataError(f"{file_path}: empty file (header row required)")

    if frame.shape[1] < 2:
        raise DataError(f"{file_path}: need at least 2 columns, found {frame.shape[1]}")
    if frame.shape[0] == 0:
        raise DataError(f"{file_path}: no rows")

    names, units = _parse_header(frame.columns)
    if target_column is not None and target_column in names and names.index(target_column) != len(names) - 1:
        order = [i for i in range(len(names)) if names[i] != target_column] + [names.index(target_column)]
        frame = frame.iloc[:, order]
        names = [names[i] for i in order]
        units = [units[i] for i in order]

    values = np.empty(frame.shape, dtype=float)
    for col_idx, column in enumerate(frame.columns):
        for row_idx, cell in enumerate(frame[column].tolist()):
            try:
                values[row_idx, col_idx] = float(cell)
            except ValueError:
                raise DataError(
                    f"{file_path}: non-numeric cell {cell!r} at row {row_idx + 1}, column {names[col_idx]!r}"
                )
            if not math.isfinite(values[row_idx, col_idx]):
                raise DataError(f"{file_path}: non-finite cell at row {row_idx + 1}, column {names[col_idx]!r}")

    try:
        dataset = Dataset(
            features=values[:, :-1],
            targets=values[:, -1],
            column_names=names[:-1],
            target_name=names[-1],
            units=units[:-1],
        )
    except PydanticValidationError as e:
        raise DataError(f"{file_path}: {e.errors()[0]['msg']}")

    logger.info(f"Loaded {dataset.n_samples} rows x {dataset.n_features} features from {file_path}")
    return dataset


def save_csv(ds: Dataset, path: Union[str, Path]) -> Path:
    """Write a dataset (raw units) as CSV; formatting is deterministic."""
    columns = {
        name if unit in ("", "-") else f"{name}[{unit}]": ds.features[:, j]
        for j, (name, unit) in enumerate(zip(ds.column_names, ds.units or ["-"] * ds.n_features))
    }
    frame = pd.DataFrame(columns)
    frame[ds.target_name] = ds.targets
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return atomic_write_text(path, text)


def synthesize(spec: SynthSpec) -> Dataset:
    """
    Generate a synthetic Nusselt-number dataset from a published correlation.

    Features are sampled uniformly in their ranges; targets receive
    multiplicative Gaussian noise of relative stddev ``spec.noise_stddev``.
    A noisy target is floored at ``1e-6`` times its clean value, so heavy
    noise never produces a zero or negative Nusselt number.

    Args:
        spec: Synthetic dataset specification

    Returns:
        Dataset with ``clean_targets`` holding the noise-free values
    """
    rng = make_rng(spec.seed)
    columns = {}
    for feature in spec.ranges:
        columns[feature.name] = rng.uniform(feature.low, feature.high, size=spec.n_points)

    clean = correlation_targets(spec.domain, columns)
    noise = rng.standard_normal(spec.n_points)
    noisy = clean * (1.0 + spec.noise_stddev * noise)
    noisy = np.maximum(noisy, 1e-6 * clean)

    features = np.column_stack([columns[f.name] for f in spec.ranges])
    dataset = Dataset(
        features=features,
        targets=noisy,
        column_names=[f.name for f in spec.ranges],
        units=[f.units for f in spec.ranges],
        clean_targets=clean,
        domain=spec.domain.value,
    )
    logger.debug(f"Synthesized {spec.n_points} {spec.domain.value} points (noise {spec.noise_stddev})")
    return dataset


def normalize(ds: Dataset) -> Tuple[Dataset, NormStats]:
    """
    Standardize every feature column to mean 0 and population stddev 1.

    Args:
        ds: Dataset in raw units

    Returns:
        (normalized dataset, statistics); targets are untouched
    """
    mean = ds.features.mean(axis=0)
    std = ds.features.std(axis=0)
    for j, value in enumerate(std):
        if not value > 0:
            raise ValidationError(f"Cannot normalize constant column {ds.column_names[j]!r}")

    stats = NormStats(mean=mean, std=std)
    return apply_norm(ds, stats), stats


def apply_norm(ds: Dataset, stats: NormStats) -> Dataset:
    """Standardize a dataset with previously computed statistics."""
    if ds.norm is not None:
        raise ValidationError("Dataset is already normalized")
    return ds.model_copy(update={"features": stats.apply(ds.features), "norm": stats})


def denormalize(ds: Dataset) -> Dataset:
    """Undo feature normalization."""
    if ds.norm is None:
        return ds
    return ds.model_copy(update={"features": ds.norm.invert(ds.features), "norm": None})


def standardize_targets(ds: Dataset) -> Tuple[Dataset, TargetStats]:
    """
    Z-score the targets (population stddev).

    Args:
        ds: Dataset with raw targets

    Returns:
        (dataset with standardized targets, statistics)
    """
    if ds.target_stats is not None:
        raise ValidationError("Targets are already standardized")
    std = float(ds.targets.std())
    stats = TargetStats(mean=float(ds.targets.mean()), std=std if std > 0 else 1.0)
    return apply_target_stats(ds, stats), stats


def apply_target_stats(ds: Dataset, stats: TargetStats) -> Dataset:
    """Standardize targets with previously computed statistics."""
    return ds.model_copy(update={"targets": stats.apply(ds.targets), "target_stats": stats})


def subset(ds: Dataset, indices: Sequence[int]) -> Dataset:
    """Rows ``indices`` of a dataset, keeping all metadata."""
    idx = np.asarray(indices, dtype=int)
    if idx.size == 0:
        raise ValidationError("Cannot build an empty dataset")
    update = {"features": ds.features[idx], "targets": ds.targets[idx]}
    if ds.clean_targets is not None:
        update["clean_targets"] = ds.clean_targets[idx]
    return ds.model_copy(update=update)


def split_indices(n: int, fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Random partition of ``range(n)`` into two sorted index arrays.

    The first part has ``floor(fraction * n + 0.5)`` elements (round half up).
    """
    ArrayValidator.fraction(fraction, "Split fraction")
    n_first = int(math.floor(fraction * n + 0.5))
    if n_first < 1 or n_first > n - 1:
        raise ValidationError(f"Split fraction {fraction} of {n} rows leaves an empty part")

    order = make_rng(seed).permutation(n)
    return np.sort(order[:n_first]), np.sort(order[n_first:])


def split(ds: Dataset, fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """
    Randomly split a dataset into two disjoint, exhaustive parts.

    Args:
        ds: Dataset to split
        fraction: Share of rows in the first part
        seed: Permutation seed

    Returns:
        (first part, remainder)
    """
    first, rest = split_indices(ds.n_samples, fraction, seed)
    return subset(ds, first), subset(ds, rest)
