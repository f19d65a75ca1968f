"""Deep Taylor relevance for the fusion network.

Relevance starts at the target ANP's pre-softmax logit (clamped at zero),
goes through the output layer with the z+ rule (ReLU inputs, unbounded
above) and through the hidden layer with the z^B rule, whose box is the
[0, 1] range of the specialist probabilities. Whitening is folded into the
hidden layer first so that box applies to the raw inputs.

Biases take no part in redistribution. All arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .fusion import FusionNetwork
from .nn import DenseLayer, dense_forward, relu

STABILIZER = 1e-9
NEG_TOL = 1e-9
BOUND_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class RelevanceReport:
    target_anp: int
    root_relevance: float
    adj_contrib: np.ndarray
    noun_contrib: np.ndarray
    degenerate: bool

    @property
    def total(self) -> float:
        return float(self.adj_contrib.sum() + self.noun_contrib.sum())

    def scaled(self, c: float) -> "RelevanceReport":
        return RelevanceReport(
            self.target_anp, c * self.root_relevance, c * self.adj_contrib, c * self.noun_contrib, self.degenerate
        )


def fold_whitening(net: FusionNetwork) -> DenseLayer:
    """Hidden layer acting on raw inputs: w/sigma, b - sum(w * mu / sigma)."""
    mu = net.whitener.mean.astype(np.float64)
    sigma = net.whitener.std.astype(np.float64)
    w = net.hidden.weights.astype(np.float64) / sigma
    b = net.hidden.biases.astype(np.float64) - w @ mu
    return DenseLayer(w, b)


def _redistribute(z: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, float]:
    """Share each output's relevance in proportion to the rows of ``z``.

    Denominators are floored at STABILIZER. Rows whose sum is exactly zero
    pass nothing on; the relevance they held is returned as the second value.
    """
    s = z.sum(axis=1)
    ok = s != 0
    dropped = float(r[~ok].sum())
    if not np.any(ok):
        return np.zeros(z.shape[1]), dropped
    share = r[ok] / np.maximum(s[ok], STABILIZER)
    return share @ z[ok], dropped


def _zplus(layer: DenseLayer, x, r_out) -> tuple[np.ndarray, float]:
    x = np.asarray(x, dtype=np.float64)
    r_out = np.asarray(r_out, dtype=np.float64)
    if x.shape != (layer.fan_in,) or r_out.shape != (layer.fan_out,):
        raise ShapeError(f"z+ rule expects input {layer.fan_in} and relevance {layer.fan_out}")
    if np.any(x < -NEG_TOL):
        raise ValueError("z+ rule needs non-negative input activations")
    x = np.maximum(x, 0)
    active = np.flatnonzero(r_out)
    if active.size == 0:
        return np.zeros(layer.fan_in), 0.0
    wp = np.maximum(np.asarray(layer.weights, dtype=np.float64)[active], 0)
    return _redistribute(wp * x, r_out[active])


def _zb(layer: DenseLayer, x, r_out, lower=0.0, upper=1.0) -> tuple[np.ndarray, float]:
    x = np.asarray(x, dtype=np.float64)
    r_out = np.asarray(r_out, dtype=np.float64)
    if x.shape != (layer.fan_in,) or r_out.shape != (layer.fan_out,):
        raise ShapeError(f"z^B rule expects input {layer.fan_in} and relevance {layer.fan_out}")
    lo = np.broadcast_to(np.asarray(lower, dtype=np.float64), x.shape)
    hi = np.broadcast_to(np.asarray(upper, dtype=np.float64), x.shape)
    if np.any(x < lo - BOUND_TOL) or np.any(x > hi + BOUND_TOL):
        raise ValueError("z^B rule input outside its bounds")
    active = np.flatnonzero(r_out)
    if active.size == 0:
        return np.zeros(layer.fan_in), 0.0
    x = np.clip(x, lo, hi)
    w = np.asarray(layer.weights, dtype=np.float64)[active]
    z = w * x - np.maximum(w, 0) * lo - np.minimum(w, 0) * hi
    return _redistribute(z, r_out[active])


def zplus_backprop(layer: DenseLayer, input_activations, output_relevance) -> np.ndarray:
    """z+ rule: R_i = sum_j x_i w+_ji / max(eps, sum_i' x_i' w+_ji') R_j."""
    return _zplus(layer, input_activations, output_relevance)[0]


def zb_backprop(layer: DenseLayer, x, output_relevance, lower=0.0, upper=1.0) -> np.ndarray:
    """z^B rule with box [lower, upper]: z_ji = x_i w_ji - l_i w+_ji - h_i w-_ji."""
    return _zb(layer, x, output_relevance, lower, upper)[0]


class Explainer:
    """Caches the float64 folded layers of one network for repeated queries."""

    def __init__(self, net: FusionNetwork, lower=0.0, upper=1.0):
        self.net = net
        self.hidden = fold_whitening(net)
        self.output = net.output.astype(np.float64)
        self.lower = lower
        self.upper = upper

    def _input(self, adj_probs, noun_probs) -> np.ndarray:
        adj = np.asarray(adj_probs, dtype=np.float64)
        noun = np.asarray(noun_probs, dtype=np.float64)
        if adj.shape != (self.net.n_adj,) or noun.shape != (self.net.n_noun,):
            raise ShapeError(
                f"expected vectors of length {self.net.n_adj} and {self.net.n_noun}, got {adj.shape} and {noun.shape}"
            )
        return np.concatenate([adj, noun])

    def logits(self, adj_probs, noun_probs) -> np.ndarray:
        x = self._input(adj_probs, noun_probs)
        return dense_forward(self.output, relu(dense_forward(self.hidden, x)))

    def root_relevance(self, adj_probs, noun_probs, target: int) -> float:
        return max(float(self.logits(adj_probs, noun_probs)[target]), 0.0)

    def explain(self, adj_probs, noun_probs, target: int) -> RelevanceReport:
        n_anp = self.output.fan_out
        if not 0 <= target < n_anp:
            raise ValueError(f"target ANP {target} out of range for {n_anp} classes")
        x = self._input(adj_probs, noun_probs)
        h = relu(dense_forward(self.hidden, x))
        root = max(float(dense_forward(self.output, h)[target]), 0.0)
        n_adj = self.net.n_adj
        if root == 0.0:
            zeros = np.zeros(x.shape[0])
            # still enforce the input bounds on degenerate queries
            _zb(self.hidden, x, np.zeros(self.hidden.fan_out), self.lower, self.upper)
            return RelevanceReport(target, 0.0, zeros[:n_adj], zeros[n_adj:], True)
        r_out = np.zeros(n_anp)
        r_out[target] = root
        r_hidden, lost_out = _zplus(self.output, h, r_out)
        r_in, lost_in = _zb(self.hidden, x, r_hidden, self.lower, self.upper)
        # relevance that reached a unit with no admissible path cannot be conserved
        degenerate = lost_out > 0 or lost_in > 0
        return RelevanceReport(target, root, r_in[:n_adj], r_in[n_adj:], degenerate)


def root_relevance(net: FusionNetwork, adj_probs, noun_probs, target: int) -> float:
    """Target ANP logit, clamped below at zero; the softmax is not decomposed."""
    return Explainer(net).root_relevance(adj_probs, noun_probs, target)


def explain(net: FusionNetwork, adj_probs, noun_probs, target: int, lower=0.0, upper=1.0) -> RelevanceReport:
    """Adjective and noun contributions to the target ANP's score.

    ``lower``/``upper`` give the input box in the network's raw input
    space; the default is the probability range.
    """
    return Explainer(net, lower, upper).explain(adj_probs, noun_probs, target)
