"""Deterministic numeric engine: MLP forward/backward, softmax, SGD with
momentum and weight decay, cosine learning-rate schedule, and an exponential
moving average of the parameters.

Everything is float64. Batched operations dispatch to the selected kernel
backend (compiled extension or NumPy fallback, see pars._kernels).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

# Probabilities are clamped to [PROB_EPS, 1] before any logarithm so that
# log-based losses stay finite on (near) one-hot predictions.
PROB_EPS = 1e-7


class ScheduleExhaustedError(RuntimeError):
    """Raised when sgd_step is called after the last scheduled step."""


@dataclass
class ModelParams:
    """MLP parameters: weights[i] is (out_i, in_i), biases[i] is (out_i,).

    Hidden layers use ReLU; the final layer emits logits. The same container
    doubles as the gradient holder since gradients are shape-congruent.
    """

    weights: list
    biases: list

    @property
    def input_dim(self):
        return self.weights[0].shape[1]

    @property
    def num_classes(self):
        return self.weights[-1].shape[0]

    def validate(self):
        if not self.weights or len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must be non-empty and congruent")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {i}: weight/bias shapes do not match")
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i}: input dim does not chain")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {i}: non-finite parameter entries")
        return self

    def copy(self):
        return ModelParams(
            [w.copy() for w in self.weights], [b.copy() for b in self.biases]
        )

    def zeros_like(self):
        return ModelParams(
            [np.zeros_like(w) for w in self.weights],
            [np.zeros_like(b) for b in self.biases],
        )


def init_mlp(input_dim, hidden, num_classes, rng):
    """Glorot-uniform weights (bias 0) for input_dim -> hidden... -> classes."""
    dims = [int(input_dim)] + [int(h) for h in hidden] + [int(num_classes)]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return ModelParams(weights, biases).validate()


def add_grads(a, b):
    """Elementwise sum of two gradient containers (in place into a)."""
    for wa, wb in zip(a.weights, b.weights):
        wa += wb
    for ba, bb in zip(a.biases, b.biases):
        ba += bb
    return a


# ---------------------------------------------------------------------------
# softmax and MLP forward/backward


def softmax(logits):
    """Max-shifted softmax of a 1-d logit vector."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise ValueError("softmax expects a 1-d logit vector")
    if not np.isfinite(logits).all():
        raise ValueError("softmax requires finite logits")
    return _kernels.softmax_batch(logits[None, :])[0]


def softmax_batch(logits):
    return _kernels.softmax_batch(logits)


def mlp_forward(params, x):
    """Single-sample forward pass. Returns (logits, cache)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != params.input_dim:
        raise ValueError(
            f"input dim {x.shape} does not match model input {params.input_dim}"
        )
    logits, cache = _kernels.forward_batch(
        np.ascontiguousarray(x[None, :]), params.weights, params.biases
    )
    return logits[0], cache


def mlp_backward(params, cache, dlogits):
    """Gradients of the scalar loss whose logit gradient is dlogits."""
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if dlogits.ndim == 1:
        dlogits = dlogits[None, :]
    if dlogits.shape[1] != params.num_classes:
        raise ValueError("dlogits does not match the number of classes")
    dws, dbs = _kernels.backward_batch(
        np.ascontiguousarray(dlogits), params.weights, cache
    )
    return ModelParams(dws, dbs)


def forward_batch(params, x):
    """Batched forward pass; x is (n, input_dim). Returns (logits, cache)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ValueError(
            f"batch shape {x.shape} does not match model input {params.input_dim}"
        )
    return _kernels.forward_batch(x, params.weights, params.biases)


def backward_batch(params, cache, dlogits):
    return mlp_backward(params, cache, dlogits)


def predict_probs(params, x):
    """Softmax probabilities for a batch, no cache kept."""
    logits, _ = forward_batch(params, x)
    return _kernels.softmax_batch(logits)


# ---------------------------------------------------------------------------
# optimizer, schedule, EMA


@dataclass
class OptimState:
    """SGD-with-momentum state tied to a cosine schedule of total_steps."""

    momenta: ModelParams
    total_steps: int
    base_lr: float
    momentum: float = 0.9
    weight_decay: float = 0.0
    t: int = 0

    @classmethod
    def for_params(cls, params, total_steps, base_lr, momentum=0.9, weight_decay=0.0):
        if total_steps <= 0:
            raise ValueError("total_steps must be positive")
        return cls(params.zeros_like(), int(total_steps), base_lr, momentum, weight_decay)


def cosine_lr(t, total_steps, base_lr):
    """base_lr * cos(7*pi*t / (16*total_steps)), strictly decreasing on [0, T]."""
    if total_steps <= 0 or not 0 <= t <= total_steps:
        raise ValueError(f"step {t} outside schedule of {total_steps} steps")
    return base_lr * math.cos(7.0 * math.pi * t / (16.0 * total_steps))


def sgd_step(params, grads, state):
    """One in-place SGD step; returns the learning rate that was applied.

    buffer <- momentum*buffer + (grad + weight_decay*param)
    param  <- param - lr*buffer
    """
    if state.t >= state.total_steps:
        raise ScheduleExhaustedError(
            f"schedule exhausted after {state.total_steps} steps"
        )
    lr = cosine_lr(state.t, state.total_steps, state.base_lr)
    m = state.momentum
    wd = state.weight_decay
    for w, dw, buf in zip(params.weights, grads.weights, state.momenta.weights):
        buf *= m
        buf += dw
        if wd:
            buf += wd * w
        w -= lr * buf
    for b, db, buf in zip(params.biases, grads.biases, state.momenta.biases):
        buf *= m
        buf += db
        if wd:
            buf += wd * b
        b -= lr * buf
    state.t += 1
    return lr


@dataclass
class EmaParams:
    """Exponential moving average (shadow copy) of ModelParams."""

    params: ModelParams
    decay: float = 0.999

    @classmethod
    def from_params(cls, params, decay=0.999):
        if not 0.0 <= decay <= 1.0:
            raise ValueError("EMA decay must be in [0, 1]")
        return cls(params.copy(), decay)


def ema_update(ema, params):
    """shadow <- decay*shadow + (1-decay)*param, elementwise, in place."""
    d = ema.decay
    for s, w in zip(ema.params.weights, params.weights):
        s *= d
        s += (1.0 - d) * w
    for s, b in zip(ema.params.biases, params.biases):
        s *= d
        s += (1.0 - d) * b
    return ema
