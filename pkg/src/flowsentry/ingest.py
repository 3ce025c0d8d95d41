"""Flow CSV ingestion: parsing, cleaning, label encoding and min-max scaling.

Consumes CSVs in the CICDDoS2019 column layout (header row, feature columns
that may carry leading whitespace, a categorical ``Label`` column). Rows with
unparseable or non-finite feature cells are skipped and counted rather than
aborting the run, because the corpus is known to contain inf/NaN cells.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DataError,
    ModelFormatError,
    ParameterError,
    SchemaError,
    ShapeError,
)

logger = logging.getLogger(__name__)

# Top-5 packet-length features shared by the DNS/LDAP/SNMP captures, in the
# order they are fed to the model.
DEFAULT_FEATURES = (
    "Max Packet Length",
    "Fwd Packet Length Max",
    "Fwd Packet Length Min",
    "Average Packet Size",
    "Min Packet Length",
)
DEFAULT_LABEL_COLUMN = "Label"
BENIGN_LABEL = "BENIGN"

SCALER_FILE_VERSION = 1


@dataclass(frozen=True)
class FeatureSpec:
    """Which columns to read: feature columns (ordered) plus the label column."""

    names: tuple[str, ...] = DEFAULT_FEATURES
    label_column: str = DEFAULT_LABEL_COLUMN

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if not self.names:
            raise ParameterError("feature list must not be empty")
        if len(set(self.names)) != len(self.names):
            raise ParameterError("feature list contains duplicate column names")
        if not self.label_column:
            raise ParameterError("label column name must not be empty")

    @property
    def m(self) -> int:
        return len(self.names)


@dataclass
class FlowRecord:
    """One parsed traffic-flow row: feature vector, binary label, source row."""

    features: np.ndarray  # (m,) float64
    label: int  # 0 benign, 1 attack
    row: int = -1  # 0-based data-row index in the source file


@dataclass
class Scaler:
    """Per-feature min/max fitted on training data only."""

    min: np.ndarray  # (m,)
    max: np.ndarray  # (m,)
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.min = np.asarray(self.min, dtype=float)
        self.max = np.asarray(self.max, dtype=float)
        if self.min.shape != self.max.shape or self.min.ndim != 1:
            raise ShapeError("scaler min/max must be 1-D vectors of equal length")
        if np.any(self.min > self.max):
            raise DataError("scaler has min > max for at least one feature")
        self.feature_names = tuple(self.feature_names)

    @property
    def m(self) -> int:
        return self.min.shape[0]


@dataclass
class Dataset:
    """Feature matrix with aligned binary labels and (optionally) the fitted scaler."""

    matrix: np.ndarray  # (n, m) float64
    labels: np.ndarray  # (n,) int
    scaler: Scaler | None = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.matrix.ndim != 2:
            raise ShapeError(f"dataset matrix must be 2-D, got ndim={self.matrix.ndim}")
        if self.labels.shape != (self.matrix.shape[0],):
            raise ShapeError(
                f"label count {self.labels.shape} does not match row count {self.matrix.shape[0]}"
            )
        if self.labels.size and not np.isin(self.labels, (0, 1)).all():
            raise DataError("dataset labels must be binary (0 benign, 1 attack)")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def m(self) -> int:
        return self.matrix.shape[1]


def parse_csv(path: str | Path, spec: FeatureSpec | None = None) -> list[FlowRecord]:
    """Parse one flow CSV into records.

    Header names are matched after stripping surrounding whitespace. A label
    equal to "BENIGN" (case-insensitive) encodes to 0, everything else to 1.
    Rows whose feature cells fail to parse or parse to non-finite values are
    skipped; the skip count is logged.
    """
    spec = spec or FeatureSpec()
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file, a header row is required")
        columns = {name.strip(): idx for idx, name in enumerate(header)}
        missing = [c for c in (*spec.names, spec.label_column) if c not in columns]
        if missing:
            raise SchemaError(f"{path}: missing required column(s): {', '.join(missing)}")
        feature_idx = [columns[c] for c in spec.names]
        label_idx = columns[spec.label_column]

        records: list[FlowRecord] = []
        skipped = 0
        for row_no, row in enumerate(reader):
            if not row:
                continue
            try:
                values = [float(row[i]) for i in feature_idx]
                label_text = row[label_idx]
            except (ValueError, IndexError):
                skipped += 1
                continue
            if not all(math.isfinite(v) for v in values):
                skipped += 1
                continue
            label = 0 if label_text.strip().upper() == BENIGN_LABEL else 1
            records.append(FlowRecord(np.array(values, dtype=float), label, row=row_no))
    if skipped:
        logger.warning("%s: skipped %d malformed row(s)", path, skipped)
    return records


def clean(records: Sequence[FlowRecord]) -> list[FlowRecord]:
    """Drop records with any NaN/inf feature, preserving order. Idempotent."""
    survivors = [r for r in records if np.isfinite(r.features).all()]
    removed = len(records) - len(survivors)
    if removed:
        logger.info("clean: removed %d record(s) with non-finite features", removed)
    return survivors


def to_dataset(records: Sequence[FlowRecord], scaler: Scaler | None = None) -> Dataset:
    """Stack records into a Dataset (empty records give a 0×0 matrix)."""
    if not records:
        return Dataset(np.empty((0, 0)), np.empty((0,), dtype=int), scaler)
    matrix = np.stack([r.features for r in records])
    labels = np.array([r.label for r in records], dtype=int)
    return Dataset(matrix, labels, scaler)


def fit_scaler(matrix: np.ndarray, feature_names: Sequence[str] = ()) -> Scaler:
    """Column-wise min/max over the given (training) matrix."""
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={x.ndim}")
    if x.shape[0] == 0:
        raise DataError("cannot fit a scaler on an empty matrix")
    return Scaler(x.min(axis=0), x.max(axis=0), tuple(feature_names))


def apply_scaler(matrix: np.ndarray, scaler: Scaler) -> np.ndarray:
    """Min-max transform to [0,1], clamping out-of-range values.

    Columns with zero fitted range map to 0.
    """
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2 or x.shape[1] != scaler.m:
        raise ShapeError(
            f"matrix has shape {x.shape}, scaler expects {scaler.m} feature column(s)"
        )
    span = scaler.max - scaler.min
    out = np.zeros_like(x)
    nz = span > 0
    out[:, nz] = (x[:, nz] - scaler.min[nz]) / span[nz]
    np.clip(out, 0.0, 1.0, out=out)
    return out


def invert_scaler(matrix: np.ndarray, scaler: Scaler) -> np.ndarray:
    """Map scaled values back to raw units: x*(max-min)+min."""
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2 or x.shape[1] != scaler.m:
        raise ShapeError(
            f"matrix has shape {x.shape}, scaler expects {scaler.m} feature column(s)"
        )
    return x * (scaler.max - scaler.min) + scaler.min


def split_benign(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Split a benign-only dataset into train / held-out parts.

    Rows are selected by a seeded shuffle followed by a contiguous split;
    each part is then restored to ascending source order so downstream
    windowing still sees time-ordered samples.
    """
    if not 0 < train_fraction < 1:
        raise ParameterError(f"train_fraction must be in (0,1), got {train_fraction}")
    if np.any(ds.labels != 0):
        raise DataError("split_benign requires a benign-only dataset (all labels 0)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(ds.n)
    n_train = int(math.floor(ds.n * train_fraction))
    train_idx = np.sort(order[:n_train])
    held_idx = np.sort(order[n_train:])
    train = Dataset(ds.matrix[train_idx], ds.labels[train_idx], ds.scaler)
    held = Dataset(ds.matrix[held_idx], ds.labels[held_idx], ds.scaler)
    return train, held


def assemble_test_set(
    held_out_benign: Dataset, attacks: Dataset, attack_fraction: float, seed: int
) -> Dataset:
    """Concatenate held-out benign rows with a seeded sample of attack rows."""
    if not 0 < attack_fraction <= 1:
        raise ParameterError(f"attack_fraction must be in (0,1], got {attack_fraction}")
    if np.any(attacks.labels != 1):
        raise DataError("attack dataset must contain only label-1 rows")
    if held_out_benign.n == 0:
        logger.warning("assemble_test_set: no held-out benign rows")
    if attacks.n == 0:
        logger.warning("assemble_test_set: no attack rows")
    rng = np.random.default_rng(seed)
    k = int(math.floor(attacks.n * attack_fraction))
    take = np.sort(rng.permutation(attacks.n)[:k])
    if held_out_benign.n == 0:
        return Dataset(attacks.matrix[take], attacks.labels[take], held_out_benign.scaler)
    if attacks.n == 0 or k == 0:
        return Dataset(
            held_out_benign.matrix.copy(), held_out_benign.labels.copy(), held_out_benign.scaler
        )
    matrix = np.concatenate([held_out_benign.matrix, attacks.matrix[take]])
    labels = np.concatenate([held_out_benign.labels, attacks.labels[take]])
    return Dataset(matrix, labels, held_out_benign.scaler)


def save_scaler(scaler: Scaler, path: str | Path) -> None:
    doc = {
        "version": SCALER_FILE_VERSION,
        "feature_names": list(scaler.feature_names),
        "min": scaler.min.tolist(),
        "max": scaler.max.tolist(),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_scaler(path: str | Path) -> Scaler:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read scaler file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    if doc.get("version") != SCALER_FILE_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported scaler file version {doc.get('version')!r}"
        )
    try:
        return Scaler(
            np.array(doc["min"], dtype=float),
            np.array(doc["max"], dtype=float),
            tuple(doc.get("feature_names", ())),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed scaler file ({exc})") from exc


def write_csv(
    path: str | Path,
    matrix: np.ndarray,
    labels: np.ndarray,
    spec: FeatureSpec | None = None,
) -> None:
    """Emit rows in the CICDDoS2019 column layout (leading-space headers).

    The extra Flow ID / Timestamp columns mimic the corpus and exercise
    column selection on re-parse.
    """
    spec = spec or FeatureSpec()
    matrix = np.asarray(matrix, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if matrix.shape[1] != spec.m:
        raise ShapeError(
            f"matrix has {matrix.shape[1]} column(s), feature spec expects {spec.m}"
        )
    if labels.shape != (matrix.shape[0],):
        raise ShapeError("label count does not match row count")
    header = ["Flow ID", " Timestamp"] + [f" {name}" for name in spec.names]
    header.append(f" {spec.label_column}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(matrix.shape[0]):
            label_text = BENIGN_LABEL if labels[i] == 0 else "Synthetic"
            writer.writerow(
                [f"flow-{i}", i, *[repr(float(v)) for v in matrix[i]], label_text]
            )
