"""Sequence autoencoder assembled from the recurrent kernel.

Six stages per window: input -> recurrent encoder (final hidden state only)
-> bottleneck repeat (t copies) -> recurrent decoder (full sequence) ->
shared per-timestep linear projection -> output, trained on benign-only
windows with mean-absolute-error loss and Adam.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DivergenceError,
    ModelFormatError,
    ParameterError,
    ShapeError,
)
from .lstm import (
    GATE_NAMES,
    AdamState,
    DenseParams,
    LstmCellParams,
    adam_step,
    dense_backward,
    dense_forward,
    dropout_mask,
    lstm_layer_backward,
    lstm_layer_forward,
)
from .windowing import SequenceBatch

logger = logging.getLogger(__name__)

MODEL_FILE_VERSION = 1


@dataclass
class ModelConfig:
    timesteps: int = 10
    features: int = 5
    units: int = 16
    dropout: float = 0.2
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.001
    seed: int = 0

    def __post_init__(self):
        for name in ("timesteps", "features", "units", "batch_size"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ParameterError(f"epochs must be >= 0, got {self.epochs}")
        if not 0 <= self.dropout < 1:
            raise ParameterError(f"dropout must be in [0,1), got {self.dropout}")
        if self.learning_rate <= 0:
            raise ParameterError(f"learning_rate must be > 0, got {self.learning_rate}")


@dataclass
class ModelWeights:
    encoder: LstmCellParams
    decoder: LstmCellParams
    projection: DenseParams
    config: ModelConfig

    def __post_init__(self):
        cfg = self.config
        if self.encoder.units != cfg.units or self.encoder.input_dim != cfg.features:
            raise ShapeError("encoder dimensions disagree with the config")
        if self.decoder.units != cfg.units or self.decoder.input_dim != cfg.units:
            raise ShapeError("decoder dimensions disagree with the config")
        if self.projection.weight.shape != (cfg.features, cfg.units):
            raise ShapeError("projection must map units -> features")

    def named_arrays(self) -> dict[str, np.ndarray]:
        """Live views on every trainable array, keyed by a stable path."""
        out: dict[str, np.ndarray] = {}
        for part in ("encoder", "decoder"):
            for name, arr in getattr(self, part).named_arrays():
                out[f"{part}.{name}"] = arr
        out["projection.weight"] = self.projection.weight
        out["projection.bias"] = self.projection.bias
        return out


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] | None = None
    epoch_seconds: list[float] = field(default_factory=list)


def build(config: ModelConfig, seed: int | None = None) -> ModelWeights:
    """Deterministic Glorot initialization under the given (or config) seed."""
    effective = config.seed if seed is None else seed
    rng = np.random.default_rng([effective, 0])
    encoder = LstmCellParams.glorot(config.units, config.features, rng)
    decoder = LstmCellParams.glorot(config.units, config.units, rng)
    projection = DenseParams.glorot(config.features, config.units, rng)
    return ModelWeights(encoder, decoder, projection, config)


def _batch_array(batch: SequenceBatch | np.ndarray) -> np.ndarray:
    data = batch.data if isinstance(batch, SequenceBatch) else np.asarray(batch, dtype=float)
    if data.ndim != 3:
        raise ShapeError(f"window batch must be rank 3, got ndim={data.ndim}")
    return data


def _forward_cached(
    weights: ModelWeights,
    x: np.ndarray,
    mode: str,
    rng: np.random.Generator | None,
):
    cfg = weights.config
    if x.shape[1] != cfg.timesteps or x.shape[2] != cfg.features:
        raise ShapeError(
            f"batch windows are {x.shape[1]}x{x.shape[2]}, model expects "
            f"{cfg.timesteps}x{cfg.features}"
        )
    if mode not in ("train", "infer"):
        raise ParameterError(f"mode must be 'train' or 'infer', got {mode!r}")
    training = mode == "train" and cfg.dropout > 0
    if training and rng is None:
        raise ParameterError("train-mode forward with dropout requires an rng")

    encoded, enc_cache = lstm_layer_forward(weights.encoder, x, return_sequences=False)
    enc_mask = dropout_mask(encoded.shape, cfg.dropout, rng) if training else None
    bottleneck = encoded * enc_mask if enc_mask is not None else encoded
    repeated = np.repeat(bottleneck[:, None, :], cfg.timesteps, axis=1)
    decoded, dec_cache = lstm_layer_forward(weights.decoder, repeated, return_sequences=True)
    dec_mask = dropout_mask(decoded.shape, cfg.dropout, rng) if training else None
    dec_out = decoded * dec_mask if dec_mask is not None else decoded
    recon = dense_forward(weights.projection, dec_out)
    cache = (enc_cache, enc_mask, dec_cache, dec_mask, dec_out)
    return recon, cache


def forward(
    weights: ModelWeights,
    batch: SequenceBatch | np.ndarray,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Reconstruct every window; output shape equals input shape (w, t, m)."""
    recon, _ = _forward_cached(weights, _batch_array(batch), mode, rng)
    return recon


def mae_loss(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Mean absolute difference over all elements of the batch."""
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x.shape != x_hat.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    return float(np.mean(np.abs(x - x_hat)))


def loss_and_gradients(
    weights: ModelWeights,
    x: np.ndarray,
    mode: str = "train",
    rng: np.random.Generator | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """One forward/backward pass; gradients keyed like ModelWeights.named_arrays()."""
    x = _batch_array(x)
    recon, cache = _forward_cached(weights, x, mode, rng)
    loss = float(np.mean(np.abs(recon - x)))
    enc_cache, enc_mask, dec_cache, dec_mask, dec_out = cache

    d_recon = np.sign(recon - x) / recon.size
    d_proj, d_dec_out = dense_backward(weights.projection, dec_out, d_recon)
    d_decoded = d_dec_out * dec_mask if dec_mask is not None else d_dec_out
    dec_grads, d_repeated = lstm_layer_backward(weights.decoder, dec_cache, d_decoded)
    d_bottleneck = d_repeated.sum(axis=1)
    d_encoded = d_bottleneck * enc_mask if enc_mask is not None else d_bottleneck
    enc_grads, _ = lstm_layer_backward(weights.encoder, enc_cache, d_encoded)

    grads: dict[str, np.ndarray] = {}
    for name, arr in enc_grads.named_arrays():
        grads[f"encoder.{name}"] = arr
    for name, arr in dec_grads.named_arrays():
        grads[f"decoder.{name}"] = arr
    grads["projection.weight"] = d_proj.weight
    grads["projection.bias"] = d_proj.bias
    return loss, grads


def train(
    weights: ModelWeights,
    benign_windows: SequenceBatch | np.ndarray,
    config: ModelConfig | None = None,
    val_windows: SequenceBatch | np.ndarray | None = None,
) -> tuple[ModelWeights, TrainReport]:
    """Epochs of shuffled mini-batches (last partial batch kept) with Adam.

    The caller is responsible for passing windows built from benign-only,
    scaled data. Raises DivergenceError if the loss ever goes non-finite.
    """
    cfg = config or weights.config
    data = _batch_array(benign_windows)
    val = _batch_array(val_windows) if val_windows is not None else None
    rng = np.random.default_rng([cfg.seed, 1])
    params = weights.named_arrays()
    adam = AdamState(lr=cfg.learning_rate)
    report = TrainReport(val_loss=[] if val is not None else None)

    n = data.shape[0]
    for epoch in range(cfg.epochs):
        tic = time.perf_counter()
        order = rng.permutation(n)
        total = 0.0
        for step, start in enumerate(range(0, n, cfg.batch_size)):
            xb = data[order[start : start + cfg.batch_size]]
            loss, grads = loss_and_gradients(weights, xb, mode="train", rng=rng)
            if not math.isfinite(loss):
                raise DivergenceError(
                    f"non-finite training loss at epoch {epoch + 1}, step {step + 1}"
                )
            adam_step(params, grads, adam)
            total += loss * xb.shape[0]
        report.train_loss.append(total / n)
        if val is not None:
            report.val_loss.append(mae_loss(val, forward(weights, val, mode="infer")))
        report.epoch_seconds.append(time.perf_counter() - tic)
        logger.debug("epoch %d/%d loss %.6f", epoch + 1, cfg.epochs, report.train_loss[-1])
    return weights, report


def _cell_to_doc(params: LstmCellParams) -> dict:
    return {name: arr.tolist() for name, arr in params.named_arrays()}


def _cell_from_doc(doc: dict) -> LstmCellParams:
    arrays = [
        np.array(doc[name], dtype=float)
        for g in GATE_NAMES
        for name in (f"w_{g}", f"b_{g}")
    ]
    return LstmCellParams(*arrays)


def save(weights: ModelWeights, path: str | Path) -> None:
    """Versioned JSON with the config and row-major parameter arrays."""
    doc = {
        "version": MODEL_FILE_VERSION,
        "config": asdict(weights.config),
        "encoder": _cell_to_doc(weights.encoder),
        "decoder": _cell_to_doc(weights.decoder),
        "projection": {
            "weight": weights.projection.weight.tolist(),
            "bias": weights.projection.bias.tolist(),
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load(path: str | Path) -> ModelWeights:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    if doc.get("version") != MODEL_FILE_VERSION:
        raise ModelFormatError(f"{path}: unsupported model file version {doc.get('version')!r}")
    try:
        config = ModelConfig(**doc["config"])
        return ModelWeights(
            encoder=_cell_from_doc(doc["encoder"]),
            decoder=_cell_from_doc(doc["decoder"]),
            projection=DenseParams(
                np.array(doc["projection"]["weight"], dtype=float),
                np.array(doc["projection"]["bias"], dtype=float),
            ),
            config=config,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model file ({exc})") from exc
