"""Dense-network math for the fixed fusion topology.

The only differentiated graph is

    cross_entropy . softmax . dense . relu . dense

so forward/backward are written out by hand rather than through a generic
autodiff. Parameters live in float32; pass float64 layers (``astype``) to
get a double-precision pass for gradient checking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ShapeError, StaleRecordError, TrainingError

CE_CLAMP = 1e-12

PARAM_KEYS = ("hidden.weights", "hidden.biases", "output.weights", "output.biases")
WEIGHT_KEYS = frozenset({"hidden.weights", "output.weights"})


@dataclass(frozen=True, eq=False)
class DenseLayer:
    """Fully connected layer; ``weights`` has shape (fan_out, fan_in)."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        w, b = np.asarray(self.weights), np.asarray(self.biases)
        if w.ndim != 2 or b.ndim != 1:
            raise ShapeError(f"weights must be 2-D and biases 1-D, got {w.shape} and {b.shape}")
        if w.shape[0] != b.shape[0]:
            raise ShapeError(f"weights {w.shape} do not match biases {b.shape}")
        if w.shape[0] < 1 or w.shape[1] < 1:
            raise ShapeError(f"empty layer {w.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("layer parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def fan_in(self) -> int:
        return self.weights.shape[1]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[0]

    def astype(self, dtype) -> "DenseLayer":
        return DenseLayer(self.weights.astype(dtype), self.biases.astype(dtype))


def _float32_bound(limit: float) -> np.float32:
    # largest float32 not exceeding ``limit``
    lim = np.float32(limit)
    if float(lim) > limit:
        lim = np.nextafter(lim, np.float32(0))
    return lim


def glorot_init(fan_in: int, fan_out: int, rng: np.random.Generator) -> DenseLayer:
    """Glorot/Xavier uniform weights, zero biases."""
    if fan_in < 1 or fan_out < 1:
        raise ValueError(f"fan_in and fan_out must be >= 1, got {fan_in}, {fan_out}")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    w = rng.uniform(-limit, limit, size=(fan_out, fan_in)).astype(np.float32)
    lim32 = _float32_bound(limit)
    np.clip(w, -lim32, lim32, out=w)
    return DenseLayer(w, np.zeros(fan_out, dtype=np.float32))


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    """``x @ W.T + b`` for a single vector or a (batch, fan_in) matrix."""
    x = np.asarray(x)
    if x.ndim not in (1, 2) or x.shape[-1] != layer.fan_in:
        raise ShapeError(f"expected input with last dimension {layer.fan_in}, got shape {x.shape}")
    return x @ layer.weights.T + layer.biases


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    z = np.asarray(logits)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def cross_entropy(probabilities: np.ndarray, label):
    """``-ln(max(p[label], 1e-12))``.

    With a (batch, classes) matrix and an array of labels, returns the
    per-sample losses.
    """
    p = np.asarray(probabilities)
    labels = np.asarray(label)
    n_classes = p.shape[-1]
    if labels.dtype.kind not in "iu" or np.any(labels < 0) or np.any(labels >= n_classes):
        raise ValueError(f"label {label!r} out of range for {n_classes} classes")
    if p.ndim == 1:
        return float(-np.log(max(p[int(labels)], CE_CLAMP)))
    picked = p[np.arange(p.shape[0]), labels]
    return -np.log(np.maximum(picked, CE_CLAMP))


@dataclass(frozen=True, eq=False)
class ForwardRecord:
    """Activations of one forward pass, tied to the layers that produced them."""

    x: np.ndarray
    pre: np.ndarray
    hidden: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    layers: tuple


def forward(hidden: DenseLayer, output: DenseLayer, x: np.ndarray) -> ForwardRecord:
    x = np.atleast_2d(x)
    pre = dense_forward(hidden, x)
    h = relu(pre)
    logits = dense_forward(output, h)
    return ForwardRecord(x, pre, h, logits, softmax(logits), (hidden, output))


def backward(hidden: DenseLayer, output: DenseLayer, record: ForwardRecord | None, labels) -> dict:
    """Gradients of the batch-mean cross-entropy w.r.t. all four parameter arrays."""
    if record is None:
        raise StaleRecordError("no forward record; call forward() first")
    if record.layers[0] is not hidden or record.layers[1] is not output:
        raise StaleRecordError("forward record was produced by different layers")
    labels = np.atleast_1d(np.asarray(labels))
    n = record.x.shape[0]
    if labels.shape != (n,):
        raise ShapeError(f"expected {n} labels, got shape {labels.shape}")
    if np.any(labels < 0) or np.any(labels >= output.fan_out):
        raise ValueError("label out of range")

    rows = np.arange(n)
    dlogits = record.probs.copy()
    dlogits[rows, labels] -= 1
    # the clamp makes the loss flat where p_label < 1e-12
    dlogits[record.probs[rows, labels] < CE_CLAMP] = 0
    dlogits /= n

    dh = dlogits @ output.weights
    dpre = dh * (record.pre > 0)
    return {
        "hidden.weights": dpre.T @ record.x,
        "hidden.biases": dpre.sum(axis=0),
        "output.weights": dlogits.T @ record.hidden,
        "output.biases": dlogits.sum(axis=0),
    }


def layer_params(hidden: DenseLayer, output: DenseLayer) -> dict:
    return {
        "hidden.weights": hidden.weights,
        "hidden.biases": hidden.biases,
        "output.weights": output.weights,
        "output.biases": output.biases,
    }


def layers_from_params(params: Mapping[str, np.ndarray]) -> tuple[DenseLayer, DenseLayer]:
    return (
        DenseLayer(params["hidden.weights"], params["hidden.biases"]),
        DenseLayer(params["output.weights"], params["output.biases"]),
    )


@dataclass(frozen=True, eq=False)
class SgdState:
    """SGD with momentum and L2 weight decay.

    ``decay_keys`` selects the parameters that receive weight decay; ``None``
    decays everything.
    """

    learning_rate: float
    momentum: float
    weight_decay: float
    velocity: dict = field(default_factory=dict)
    decay_keys: frozenset | None = None

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if not self.weight_decay >= 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")

    @classmethod
    def start(cls, params, learning_rate=0.01, momentum=0.9, weight_decay=1e-4, decay_keys=None):
        velocity = {k: np.zeros_like(v) for k, v in params.items()}
        return cls(learning_rate, momentum, weight_decay, velocity, decay_keys)


def sgd_step(params: Mapping, grads: Mapping, state: SgdState) -> tuple[dict, SgdState]:
    """One momentum step; returns new parameter and state objects."""
    new_params, new_velocity = {}, {}
    for key, theta in params.items():
        g = np.asarray(grads[key])
        theta = np.asarray(theta)
        if g.shape != theta.shape:
            raise ShapeError(f"{key}: gradient shape {g.shape} != parameter shape {theta.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for {key}")
        dtype = theta.dtype
        if state.weight_decay and (state.decay_keys is None or key in state.decay_keys):
            g = g + dtype.type(state.weight_decay) * theta
        v = state.velocity.get(key)
        if v is None:
            v = np.zeros_like(theta)
        v = (dtype.type(state.momentum) * v + g).astype(dtype, copy=False)
        new_velocity[key] = v
        new_params[key] = (theta - dtype.type(state.learning_rate) * v).astype(dtype, copy=False)
    new_state = SgdState(state.learning_rate, state.momentum, state.weight_decay, new_velocity, state.decay_keys)
    return new_params, new_state


def finite_diff_grad(loss: Callable, params, epsilon: float = 1e-6):
    """Central-difference gradient of ``loss`` in float64.

    ``params`` is either one array (``loss`` takes that array) or a mapping
    of arrays (``loss`` takes the mapping). Independent of :func:`backward`.
    """
    if isinstance(params, Mapping):
        base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
        grads = {}
        for key, arr in base.items():
            g = np.zeros_like(arr)
            flat = arr.reshape(-1)
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + epsilon
                up = float(loss(base))
                flat[idx] = orig - epsilon
                down = float(loss(base))
                flat[idx] = orig
                g.reshape(-1)[idx] = (up - down) / (2 * epsilon)
            grads[key] = g
        return grads
    arr = np.array(params, dtype=np.float64)
    g = finite_diff_grad(lambda p: loss(p["_"]), {"_": arr}, epsilon)
    return g["_"]
