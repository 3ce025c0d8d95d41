"""Recurrent numeric kernel.

Gated-cell forward pass, backpropagation through time, the shared
per-timestep dense projection, inverted dropout, Adam, and a
finite-difference gradient checker. Everything runs at float64.

Weight layout: each gate matrix acts on the concatenation [h_prev, x], so
``w_g`` has shape (units, units + input_dim) and ``b_g`` shape (units,).
Layer functions accept one sequence (t, d) or a batch (b, t, d); gradients
mirror the input shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import NumericError, ParameterError, ShapeError

GATE_NAMES = ("f", "i", "c", "o")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LstmCellParams:
    """Weights and biases for the four gates (forget, input, candidate, output)."""

    w_f: np.ndarray
    b_f: np.ndarray
    w_i: np.ndarray
    b_i: np.ndarray
    w_c: np.ndarray
    b_c: np.ndarray
    w_o: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        for name, arr in self.named_arrays():
            setattr(self, name, np.asarray(arr, dtype=float))
        units = self.b_f.shape[0]
        width = self.w_f.shape
        for g in GATE_NAMES:
            w, b = getattr(self, f"w_{g}"), getattr(self, f"b_{g}")
            if w.shape != width or b.shape != (units,):
                raise ShapeError("all four gates must share weight/bias dimensions")
        if width[0] != units or width[1] <= units:
            raise ShapeError(
                f"gate weights must have shape (units, units + input_dim), got {width}"
            )

    @property
    def units(self) -> int:
        return self.b_f.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_f.shape[1] - self.units

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        return [(n, getattr(self, n)) for g in GATE_NAMES for n in (f"w_{g}", f"b_{g}")]

    @classmethod
    def zeros(cls, units: int, input_dim: int) -> "LstmCellParams":
        width = units + input_dim
        return cls(*(arr for _ in GATE_NAMES for arr in (np.zeros((units, width)), np.zeros(units))))

    @classmethod
    def glorot(cls, units: int, input_dim: int, rng: np.random.Generator) -> "LstmCellParams":
        """Uniform Glorot gate weights (fan_in = units+input_dim, fan_out = units), zero biases."""
        width = units + input_dim
        limit = np.sqrt(6.0 / (width + units))
        arrays = []
        for _ in GATE_NAMES:
            arrays.append(rng.uniform(-limit, limit, size=(units, width)))
            arrays.append(np.zeros(units))
        return cls(*arrays)


@dataclass
class LstmState:
    """Hidden and cell state; zeros at the start of every sequence."""

    hidden: np.ndarray  # (..., units)
    cell: np.ndarray  # (..., units)

    @classmethod
    def zeros(cls, units: int, batch: int | None = None) -> "LstmState":
        shape = (units,) if batch is None else (batch, units)
        return cls(np.zeros(shape), np.zeros(shape))


class CellStep(NamedTuple):
    """Per-timestep activations kept for the backward pass."""

    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    f: np.ndarray
    i: np.ndarray
    g: np.ndarray  # candidate cell value (tanh gate)
    c: np.ndarray
    o: np.ndarray
    tc: np.ndarray  # tanh(c)


@dataclass
class GateCache:
    """One CellStep per processed timestep, plus layer bookkeeping."""

    steps: list[CellStep] = field(default_factory=list)
    return_sequences: bool = False
    squeeze: bool = False  # input arrived as a single (t, d) sequence


def lstm_cell_forward(
    params: LstmCellParams, state: LstmState, x: np.ndarray
) -> tuple[LstmState, CellStep]:
    """One gated-cell step.

    f = sigmoid(w_f [h,x] + b_f)      i = sigmoid(w_i [h,x] + b_i)
    g = tanh(w_c [h,x] + b_c)         c' = f*c + i*g
    o = sigmoid(w_o [h,x] + b_o)      h' = o*tanh(c')

    x: (input_dim,) or (b, input_dim); state arrays shaped (..., units) to match.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.input_dim:
        raise ShapeError(
            f"input has {x.shape[-1]} feature(s), cell expects {params.input_dim}"
        )
    if state.hidden.shape[-1] != params.units or state.hidden.shape != state.cell.shape:
        raise ShapeError("state arrays do not match the cell's unit count")
    if x.shape[:-1] != state.hidden.shape[:-1]:
        raise ShapeError("input and state batch dimensions disagree")
    if not np.isfinite(x).all():
        raise NumericError("non-finite value in cell input")

    cat = np.concatenate([state.hidden, x], axis=-1)
    f = sigmoid(cat @ params.w_f.T + params.b_f)
    i = sigmoid(cat @ params.w_i.T + params.b_i)
    g = np.tanh(cat @ params.w_c.T + params.b_c)
    c = f * state.cell + i * g
    o = sigmoid(cat @ params.w_o.T + params.b_o)
    tc = np.tanh(c)
    h = o * tc
    step = CellStep(x=x, h_prev=state.hidden, c_prev=state.cell, f=f, i=i, g=g, c=c, o=o, tc=tc)
    return LstmState(hidden=h, cell=c), step


def lstm_layer_forward(
    params: LstmCellParams, seq: np.ndarray, return_sequences: bool = False
) -> tuple[np.ndarray, GateCache]:
    """Run the cell over a sequence from a zero state.

    seq: (t, input_dim) or (b, t, input_dim).
    Returns all hidden states (..., t, units) when return_sequences, else the
    final hidden state (..., units), plus the cache for the backward pass.
    """
    x = np.asarray(seq, dtype=float)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    if x.ndim != 3:
        raise ShapeError(f"sequence must be rank 2 or 3, got ndim={x.ndim}")
    if x.shape[-1] != params.input_dim:
        raise ShapeError(
            f"sequence has {x.shape[-1]} feature(s), layer expects {params.input_dim}"
        )
    b, t, _ = x.shape
    if t < 1:
        raise ShapeError("sequence must contain at least one timestep")

    state = LstmState.zeros(params.units, batch=b)
    hs = np.empty((b, t, params.units))
    cache = GateCache(return_sequences=return_sequences, squeeze=squeeze)
    for j in range(t):
        state, step = lstm_cell_forward(params, state, x[:, j])
        hs[:, j] = state.hidden
        cache.steps.append(step)
    out = hs if return_sequences else hs[:, -1]
    if squeeze:
        out = out[0]
    return out, cache


def lstm_layer_backward(
    params: LstmCellParams, cache: GateCache, d_out: np.ndarray
) -> tuple[LstmCellParams, np.ndarray]:
    """Reverse-time accumulation of gradients through the cached forward pass.

    d_out matches the forward output: (..., t, units) when the forward
    returned sequences, else (..., units) applied at the final step.
    Returns (parameter gradients, input-sequence gradients (..., t, input_dim)).
    """
    if not cache.steps:
        raise ShapeError("empty cache; run a forward pass first")
    t = len(cache.steps)
    b = cache.steps[0].f.shape[0]
    u = params.units

    d_up = np.asarray(d_out, dtype=float)
    if cache.squeeze:
        d_up = d_up[None]
    expected = (b, t, u) if cache.return_sequences else (b, u)
    if d_up.shape != expected:
        raise ShapeError(
            f"upstream gradient has shape {d_up.shape}, cache expects {expected}"
        )

    grads = LstmCellParams.zeros(u, params.input_dim)
    d_x = np.empty((b, t, params.input_dim))
    dh_next = np.zeros((b, u))
    dc_next = np.zeros((b, u))
    for j in reversed(range(t)):
        s = cache.steps[j]
        dh = dh_next.copy()
        if cache.return_sequences:
            dh += d_up[:, j]
        elif j == t - 1:
            dh += d_up
        dc = dc_next + dh * s.o * (1.0 - s.tc**2)

        d_af = dc * s.c_prev * s.f * (1.0 - s.f)
        d_ai = dc * s.g * s.i * (1.0 - s.i)
        d_ac = dc * s.i * (1.0 - s.g**2)
        d_ao = dh * s.tc * s.o * (1.0 - s.o)

        cat = np.concatenate([s.h_prev, s.x], axis=-1)
        grads.w_f += d_af.T @ cat
        grads.b_f += d_af.sum(axis=0)
        grads.w_i += d_ai.T @ cat
        grads.b_i += d_ai.sum(axis=0)
        grads.w_c += d_ac.T @ cat
        grads.b_c += d_ac.sum(axis=0)
        grads.w_o += d_ao.T @ cat
        grads.b_o += d_ao.sum(axis=0)

        d_cat = d_af @ params.w_f + d_ai @ params.w_i + d_ac @ params.w_c + d_ao @ params.w_o
        dh_next = d_cat[:, :u]
        d_x[:, j] = d_cat[:, u:]
        dc_next = dc * s.f
    if cache.squeeze:
        d_x = d_x[0]
    return grads, d_x


@dataclass
class DenseParams:
    """Affine map applied identically at every timestep."""

    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError("dense weight must be (out, in) with bias (out,)")

    @classmethod
    def glorot(cls, out_dim: int, in_dim: int, rng: np.random.Generator) -> "DenseParams":
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        return cls(rng.uniform(-limit, limit, size=(out_dim, in_dim)), np.zeros(out_dim))


def dense_forward(params: DenseParams, x: np.ndarray) -> np.ndarray:
    """y = x @ W.T + b over the trailing axis; any leading shape."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.weight.shape[1]:
        raise ShapeError(
            f"input has {x.shape[-1]} feature(s), dense expects {params.weight.shape[1]}"
        )
    return x @ params.weight.T + params.bias


def dense_backward(
    params: DenseParams, x: np.ndarray, d_out: np.ndarray
) -> tuple[DenseParams, np.ndarray]:
    """Gradients of the affine map; d_out must match the forward output shape."""
    x = np.asarray(x, dtype=float)
    d_out = np.asarray(d_out, dtype=float)
    out_dim, in_dim = params.weight.shape
    if d_out.shape != x.shape[:-1] + (out_dim,):
        raise ShapeError(
            f"upstream gradient shape {d_out.shape} does not match input {x.shape}"
        )
    flat_x = x.reshape(-1, in_dim)
    flat_d = d_out.reshape(-1, out_dim)
    d_w = flat_d.T @ flat_x
    d_b = flat_d.sum(axis=0)
    d_x = d_out @ params.weight
    return DenseParams(d_w, d_b), d_x


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask, pre-scaled by 1/(1-rate)."""
    if not 0 <= rate < 1:
        raise ParameterError(f"dropout rate must be in [0,1), got {rate}")
    if rate == 0:
        return np.ones(shape)
    return (rng.random(shape) >= rate) / (1.0 - rate)


def dropout(
    x: np.ndarray, rate: float, mode: str = "train", rng: np.random.Generator | None = None
) -> np.ndarray:
    """Train mode zeroes elements with probability `rate` and scales survivors
    by 1/(1-rate); infer mode is the identity."""
    if not 0 <= rate < 1:
        raise ParameterError(f"dropout rate must be in [0,1), got {rate}")
    if mode not in ("train", "infer"):
        raise ParameterError(f"dropout mode must be 'train' or 'infer', got {mode!r}")
    x = np.asarray(x, dtype=float)
    if mode == "infer" or rate == 0:
        return x
    if rng is None:
        raise ParameterError("train-mode dropout requires an rng")
    return x * dropout_mask(x.shape, rate, rng)


@dataclass
class AdamState:
    """First/second-moment accumulators congruent to the parameter set."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState
) -> tuple[dict[str, np.ndarray], AdamState]:
    """Standard Adam update with bias correction; parameters updated in place."""
    if set(params) != set(grads):
        raise ShapeError("parameter and gradient sets disagree")
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m += (1.0 - state.beta1) * (g - m)
        v += (1.0 - state.beta2) * (g * g - v)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def grad_check(
    loss_and_grads: Callable[[], tuple[float, dict[str, np.ndarray]]],
    params: dict[str, np.ndarray],
    tolerance: float = 1e-5,
    *,
    step: float = 1e-5,
    samples: int = 200,
    rng: np.random.Generator | None = None,
    floor: float = 1e-5,
) -> GradCheckReport:
    """Central-difference check of analytic gradients on a random parameter subset.

    The closure must be deterministic (dropout disabled) and read the live
    arrays in `params`, which are perturbed in place. Relative error uses
    max(|analytic|, |numeric|, floor) as denominator; the floor keeps
    float64 round-off in the difference quotient from dominating entries
    whose true gradient is near zero.
    """
    rng = rng or np.random.default_rng(0)
    _, grads = loss_and_grads()
    index = [(name, i) for name, arr in sorted(params.items()) for i in range(arr.size)]
    k = min(samples, len(index))
    picks = rng.choice(len(index), size=k, replace=False)
    worst = 0.0
    worst_param = ""
    for sel in picks:
        name, i = index[sel]
        arr = params[name]
        orig = arr.flat[i]
        arr.flat[i] = orig + step
        loss_plus, _ = loss_and_grads()
        arr.flat[i] = orig - step
        loss_minus, _ = loss_and_grads()
        arr.flat[i] = orig
        numeric = (loss_plus - loss_minus) / (2.0 * step)
        analytic = grads[name].flat[i]
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
        if rel > worst:
            worst = rel
            worst_param = f"{name}[{i}]"
    return GradCheckReport(worst, worst_param, k, tolerance)
