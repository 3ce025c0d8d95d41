"""Per-sample anomaly scores, threshold calibration, and the detection pipeline.

A sample's score is the mean absolute reconstruction error over every
window that contains it and over all features; the detection threshold is
the maximum per-sample score seen on benign training data, and a sample is
flagged only when its score is strictly above that threshold.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autoencoder
from .autoencoder import ModelWeights
from .errors import (
    DataError,
    InsufficientDataError,
    ModelFormatError,
    ParameterError,
    ShapeError,
)
from .ingest import FeatureSpec, Scaler, apply_scaler, clean, parse_csv, to_dataset
from .windowing import SequenceBatch, WindowConfig, make_windows

logger = logging.getLogger(__name__)

THRESHOLD_FILE_VERSION = 1


@dataclass
class ScoreSeries:
    """Per-sample mean reconstruction error plus the window count behind it."""

    score: np.ndarray  # (n,) float
    coverage: np.ndarray  # (n,) int

    def __post_init__(self):
        self.score = np.asarray(self.score, dtype=float)
        self.coverage = np.asarray(self.coverage, dtype=int)
        if self.score.shape != self.coverage.shape or self.score.ndim != 1:
            raise ShapeError("score and coverage must be 1-D vectors of equal length")

    @property
    def n(self) -> int:
        return self.score.shape[0]


@dataclass
class ThresholdModel:
    """Everything needed to score new data: threshold, scaler, window, model."""

    threshold: float
    scaler: Scaler
    window: WindowConfig
    model_path: str | None = None
    weights: ModelWeights | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.threshold < 0:
            raise ParameterError(f"threshold must be >= 0, got {self.threshold}")

    def require_weights(self) -> ModelWeights:
        if self.weights is None:
            if self.model_path is None:
                raise DataError("threshold model references no weights")
            self.weights = autoencoder.load(self.model_path)
        return self.weights


def per_sample_errors(
    x: np.ndarray, recon: np.ndarray, batch: SequenceBatch
) -> ScoreSeries:
    """Aggregate window reconstructions into per-sample scores.

    For sample i and feature j, the error is the mean of
    |recon[k][i-k][j] - x[i][j]| over every window k containing i; the
    sample score is the mean of those per-feature errors. Edge samples
    average over however many windows actually contain them.
    """
    x = np.asarray(x, dtype=float)
    recon = np.asarray(recon, dtype=float)
    if x.ndim != 2:
        raise ShapeError(f"source matrix must be 2-D, got ndim={x.ndim}")
    if recon.shape != batch.data.shape:
        raise ShapeError(
            f"reconstruction shape {recon.shape} != window batch shape {batch.data.shape}"
        )
    n, m = x.shape
    w, t, mb = recon.shape
    if mb != m or w != n - t + 1:
        raise ShapeError(
            f"window batch {recon.shape} is inconsistent with a {n}x{m} source matrix"
        )

    # sample index addressed by each (window, offset) slot
    idx = batch.origin[:, None] + np.arange(t)[None, :]
    err = np.abs(recon - x[idx])
    sums = np.zeros((n, m))
    np.add.at(sums, idx.reshape(-1), err.reshape(-1, m))
    counts = np.bincount(idx.reshape(-1), minlength=n)
    per_feature = sums / counts[:, None]
    return ScoreSeries(score=per_feature.mean(axis=1), coverage=counts)


def calibrate(training_scores: ScoreSeries | np.ndarray) -> float:
    """Threshold = maximum per-sample score on the (benign) training data."""
    scores = (
        training_scores.score
        if isinstance(training_scores, ScoreSeries)
        else np.asarray(training_scores, dtype=float)
    )
    if scores.size == 0:
        raise DataError("cannot calibrate a threshold from an empty score series")
    return float(scores.max())


def classify(scores: ScoreSeries | np.ndarray, threshold: float) -> np.ndarray:
    """1 where score is strictly above the threshold, else 0. Ties are normal."""
    if threshold < 0:
        raise ParameterError(f"threshold must be >= 0, got {threshold}")
    values = (
        scores.score if isinstance(scores, ScoreSeries) else np.asarray(scores, dtype=float)
    )
    return (values > threshold).astype(int)


def score_matrix(
    scaled: np.ndarray, weights: ModelWeights, window: WindowConfig
) -> ScoreSeries:
    """Window an already-scaled matrix, reconstruct it, and aggregate scores."""
    batch = make_windows(scaled, window)
    recon = autoencoder.forward(weights, batch, mode="infer")
    return per_sample_errors(scaled, recon, batch)


@dataclass
class DetectionResult:
    rows: np.ndarray  # source data-row index per surviving sample
    labels: np.ndarray
    scores: ScoreSeries
    verdicts: np.ndarray


def detect(
    raw_csv: str | Path, tm: ThresholdModel, spec: FeatureSpec | None = None
) -> DetectionResult:
    """Full scoring pipeline on a raw flow CSV.

    parse -> clean -> select -> apply stored scaler (clamped) -> window ->
    reconstruct (infer) -> per-sample errors -> classify. Every surviving
    sample gets a verdict, including the edge samples near file boundaries.
    """
    if spec is None and tm.scaler.feature_names:
        spec = FeatureSpec(names=tm.scaler.feature_names)
    records = clean(parse_csv(raw_csv, spec))
    t = tm.window.timesteps
    if len(records) < t:
        raise InsufficientDataError(
            f"{raw_csv}: {len(records)} usable sample(s), window length {t} requires at least {t}"
        )
    ds = to_dataset(records)
    scaled = apply_scaler(ds.matrix, tm.scaler)
    scores = score_matrix(scaled, tm.require_weights(), tm.window)
    verdicts = classify(scores, tm.threshold)
    rows = np.array([r.row for r in records], dtype=int)
    return DetectionResult(rows=rows, labels=ds.labels, scores=scores, verdicts=verdicts)


def training_fingerprint(matrix: np.ndarray) -> str:
    """sha256 over the raw float64 bytes of the (scaled) training matrix."""
    x = np.ascontiguousarray(np.asarray(matrix, dtype=float))
    return hashlib.sha256(x.tobytes()).hexdigest()


def _created_stamp() -> str:
    # honors SOURCE_DATE_EPOCH so repeated runs can be byte-identical
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    stamp = int(epoch) if epoch is not None else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(stamp))


def save_threshold(tm: ThresholdModel, path: str | Path) -> None:
    doc = {
        "version": THRESHOLD_FILE_VERSION,
        "threshold": tm.threshold,
        "window": {"timesteps": tm.window.timesteps, "stride": tm.window.stride},
        "scaler": {
            "version": 1,
            "feature_names": list(tm.scaler.feature_names),
            "min": tm.scaler.min.tolist(),
            "max": tm.scaler.max.tolist(),
        },
        "model": tm.model_path,
        "provenance": dict(tm.provenance),
    }
    if "created" not in doc["provenance"]:
        doc["provenance"]["created"] = _created_stamp()
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_threshold(path: str | Path) -> ThresholdModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read threshold file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    if doc.get("version") != THRESHOLD_FILE_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported threshold file version {doc.get('version')!r}"
        )
    try:
        scaler_doc = doc["scaler"]
        scaler = Scaler(
            np.array(scaler_doc["min"], dtype=float),
            np.array(scaler_doc["max"], dtype=float),
            tuple(scaler_doc.get("feature_names", ())),
        )
        window = WindowConfig(
            timesteps=int(doc["window"]["timesteps"]), stride=int(doc["window"]["stride"])
        )
        return ThresholdModel(
            threshold=float(doc["threshold"]),
            scaler=scaler,
            window=window,
            model_path=doc.get("model"),
            provenance=dict(doc.get("provenance", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed threshold file ({exc})") from exc
