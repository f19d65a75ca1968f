"""The fusion network: whitening, one ReLU hidden layer, softmax over ANPs."""

from __future__ import annotations

import logging
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import nn
from .dataio import Dataset
from .errors import (
    BadMagicError,
    DimensionError,
    NonFiniteError,
    ShapeError,
    TrainingError,
    TruncatedError,
    VersionError,
)
from .metrics import topk_hits

log = logging.getLogger(__name__)

STD_FLOOR = 1e-6
PROB_TOL = 1e-6
FULL_SCALE_DIMS = (117, 167, 1024, 553)

CHECKPOINT_MAGIC = b"ANPM"
CHECKPOINT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sHIIII")
_COUNT = struct.Struct("<Q")

EVAL_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class Whitener:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float32)
        std = np.asarray(self.std, dtype=np.float32)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ShapeError(f"mean {mean.shape} and std {std.shape} must be equal-length vectors")
        if np.any(std < np.float32(STD_FLOOR)):
            raise ValueError("whitener std must be >= 1e-6")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @classmethod
    def identity(cls, n: int) -> "Whitener":
        return cls(np.zeros(n), np.ones(n))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float32) - self.mean) / self.std


def fit_whitener(inputs) -> Whitener:
    """Per-dimension mean and population std, std clamped below at 1e-6."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("fit_whitener needs at least one sample")
    std = np.maximum(x.std(axis=0), STD_FLOOR)
    return Whitener(x.mean(axis=0), std)


@dataclass(frozen=True, eq=False)
class FusionNetwork:
    whitener: Whitener
    hidden: nn.DenseLayer
    output: nn.DenseLayer
    n_adj: int

    def __post_init__(self):
        n_in = self.whitener.mean.shape[0]
        if self.hidden.fan_in != n_in:
            raise ShapeError(f"hidden layer takes {self.hidden.fan_in} inputs, whitener has {n_in}")
        if self.output.fan_in != self.hidden.fan_out:
            raise ShapeError("output layer does not match hidden layer width")
        if not 1 <= self.n_adj < n_in:
            raise ShapeError(f"n_adj={self.n_adj} incompatible with {n_in} inputs")

    @property
    def n_noun(self) -> int:
        return self.hidden.fan_in - self.n_adj

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (self.n_adj, self.n_noun, self.hidden.fan_out, self.output.fan_out)

    def replace(self, **changes) -> "FusionNetwork":
        fields = dict(whitener=self.whitener, hidden=self.hidden, output=self.output, n_adj=self.n_adj)
        fields.update(changes)
        return FusionNetwork(**fields)


def build_anpnet(n_adj: int, n_noun: int, hidden_size: int, n_anp: int, seed: int = 0) -> FusionNetwork:
    """Glorot-initialised network with an identity whitener placeholder."""
    if min(n_adj, n_noun, hidden_size, n_anp) < 1:
        raise ValueError("all dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    hidden = nn.glorot_init(n_adj + n_noun, hidden_size, rng)
    output = nn.glorot_init(hidden_size, n_anp, rng)
    return FusionNetwork(Whitener.identity(n_adj + n_noun), hidden, output, n_adj)


def _check_probs(x: np.ndarray, n: int, name: str) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim not in (1, 2) or x.shape[-1] != n:
        raise ShapeError(f"{name} probabilities must have length {n}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} probabilities must be finite")
    if np.any(x < -PROB_TOL) or np.any(x > 1 + PROB_TOL):
        raise ValueError(f"{name} probabilities must lie in [0, 1]")
    return x


def _inputs(net: FusionNetwork, adj_probs, noun_probs) -> np.ndarray:
    adj = _check_probs(adj_probs, net.n_adj, "adjective")
    noun = _check_probs(noun_probs, net.n_noun, "noun")
    if adj.ndim != noun.ndim or (adj.ndim == 2 and adj.shape[0] != noun.shape[0]):
        raise ShapeError("adjective and noun batches differ in size")
    return np.concatenate([adj, noun], axis=-1)


def logits(net: FusionNetwork, adj_probs, noun_probs) -> np.ndarray:
    x = net.whitener.apply(_inputs(net, adj_probs, noun_probs))
    return nn.dense_forward(net.output, nn.relu(nn.dense_forward(net.hidden, x)))


def predict(net: FusionNetwork, adj_probs, noun_probs) -> np.ndarray:
    """ANP probabilities for one sample (vectors) or a batch (matrices)."""
    return nn.softmax(logits(net, adj_probs, noun_probs))


def predict_dataset(net: FusionNetwork, ds: Dataset) -> np.ndarray:
    """Batched predictions in fixed-size chunks (order-deterministic)."""
    out = np.empty((len(ds), net.output.fan_out), dtype=np.float32)
    for start in range(0, len(ds), EVAL_CHUNK):
        sl = slice(start, start + EVAL_CHUNK)
        out[sl] = predict(net, ds.adj_probs[sl], ds.noun_probs[sl])
    return out


# ---------------------------------------------------------------- training


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    seed: int = 0
    shuffle: bool = True
    val_fraction: float = 0.0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.learning_rate < 0 or self.weight_decay < 0 or not 0 <= self.momentum < 1:
            raise ValueError("invalid optimizer hyperparameters")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must be in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


def _topk_rate(probs: np.ndarray, labels: np.ndarray, k: int) -> float:
    if len(labels) == 0:
        return float("nan")
    return 100.0 * float(np.mean(topk_hits(probs, labels, k)))


def train(net: FusionNetwork, ds: Dataset, config: TrainConfig = TrainConfig(), validation: Dataset | None = None):
    """Fit the whitener on ``ds`` and train both dense layers.

    Returns the trained network and one history dict per epoch with the mean
    training loss and top-1/top-5 accuracy (percent) on the training data
    and, when present, on the validation split.
    """
    n_anp = net.output.fan_out
    if len(ds) == 0:
        raise ValueError("training set is empty")
    if ds.anp_labels.min() < 0 or ds.anp_labels.max() >= n_anp:
        raise ValueError(f"training labels must be < {n_anp}")
    if (ds.n_adj, ds.n_noun) != (net.n_adj, net.n_noun):
        raise ShapeError(f"dataset dims ({ds.n_adj}, {ds.n_noun}) != network dims ({net.n_adj}, {net.n_noun})")

    if config.val_fraction > 0 and validation is None:
        perm = np.random.default_rng([config.seed, 1]).permutation(len(ds))
        n_val = int(round(config.val_fraction * len(ds)))
        validation, ds = ds.subset(np.sort(perm[:n_val])), ds.subset(np.sort(perm[n_val:]))

    whitener = fit_whitener(ds.inputs)
    x_all = whitener.apply(ds.inputs)
    y_all = ds.anp_labels
    x_val = whitener.apply(validation.inputs) if validation is not None and len(validation) else None

    hidden, output = net.hidden, net.output
    state = nn.SgdState.start(
        nn.layer_params(hidden, output),
        config.learning_rate,
        config.momentum,
        config.weight_decay,
        decay_keys=nn.WEIGHT_KEYS,
    )
    rng = np.random.default_rng(config.seed)
    n = len(ds)
    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            rec = nn.forward(hidden, output, x_all[idx])
            losses = nn.cross_entropy(rec.probs, y_all[idx])
            batch_loss = float(np.mean(losses, dtype=np.float64))
            if not np.isfinite(batch_loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            total += batch_loss * len(idx)
            grads = nn.backward(hidden, output, rec, y_all[idx])
            try:
                params, state = nn.sgd_step(nn.layer_params(hidden, output), grads, state)
            except TrainingError as exc:
                raise TrainingError(f"epoch {epoch}, batch {b}: {exc}") from None
            hidden, output = nn.layers_from_params(params)

        row = {"epoch": epoch, "loss": total / n}
        train_probs = nn.forward(hidden, output, x_all).probs
        row["train_top1"] = _topk_rate(train_probs, y_all, 1)
        row["train_top5"] = _topk_rate(train_probs, y_all, 5)
        if x_val is not None:
            val_probs = nn.forward(hidden, output, x_val).probs
            row["val_top1"] = _topk_rate(val_probs, validation.anp_labels, 1)
            row["val_top5"] = _topk_rate(val_probs, validation.anp_labels, 5)
        history.append(row)
        log.info("epoch %d loss %.5f top1 %.2f", epoch, row["loss"], row["train_top1"])

    return FusionNetwork(whitener, hidden, output, net.n_adj), history


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(net: FusionNetwork, path) -> None:
    arrays = [
        net.whitener.mean,
        net.whitener.std,
        net.hidden.weights,
        net.hidden.biases,
        net.output.weights,
        net.output.biases,
    ]
    with open(path, "wb") as fh:
        fh.write(_CKPT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, *net.dims))
        for arr in arrays:
            data = np.ascontiguousarray(arr, dtype="<f4")
            fh.write(_COUNT.pack(data.size))
            fh.write(data.tobytes())


def load_checkpoint(path) -> FusionNetwork:
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise TruncatedError(f"{path}: file shorter than magic")
    if data[:4] != CHECKPOINT_MAGIC:
        raise BadMagicError(f"{path}: bad magic {data[:4]!r}, expected {CHECKPOINT_MAGIC!r}")
    if len(data) < _CKPT_HEADER.size:
        raise TruncatedError(f"{path}: truncated header")
    _, version, n_adj, n_noun, hidden_size, n_anp = _CKPT_HEADER.unpack_from(data)
    if version != CHECKPOINT_VERSION:
        raise VersionError(f"{path}: unsupported checkpoint version {version}")
    if min(n_adj, n_noun, hidden_size, n_anp) < 1:
        raise DimensionError(f"{path}: zero dimension in header")
    n_in = n_adj + n_noun
    shapes = [(n_in,), (n_in,), (hidden_size, n_in), (hidden_size,), (n_anp, hidden_size), (n_anp,)]
    offset = _CKPT_HEADER.size
    arrays = []
    for shape in shapes:
        if len(data) < offset + _COUNT.size:
            raise TruncatedError(f"{path}: truncated before array count")
        (count,) = _COUNT.unpack_from(data, offset)
        offset += _COUNT.size
        if count != int(np.prod(shape)):
            raise DimensionError(f"{path}: array count {count} does not match header shape {shape}")
        nbytes = 4 * count
        if len(data) < offset + nbytes:
            raise TruncatedError(f"{path}: truncated array data")
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=offset).reshape(shape).astype(np.float32)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"{path}: non-finite parameter values")
        arrays.append(arr)
        offset += nbytes
    if offset != len(data):
        raise DimensionError(f"{path}: {len(data) - offset} trailing bytes")
    mean, std, hw, hb, ow, ob = arrays
    return FusionNetwork(Whitener(mean, std), nn.DenseLayer(hw, hb), nn.DenseLayer(ow, ob), n_adj)
