"""Top-k accuracy, per-class tables, co-detection matrix and histograms.

Ties in scores are broken by class index: among equal scores the lower
index ranks first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CONCEPTS = ("Adj", "Noun", "ANP")


def label_rank(scores: np.ndarray, labels) -> np.ndarray:
    """0-based rank of each label under the index tie-break."""
    s = np.atleast_2d(np.asarray(scores))
    labels = np.atleast_1d(np.asarray(labels))
    n_classes = s.shape[1]
    if labels.shape[0] != s.shape[0]:
        raise ValueError(f"{labels.shape[0]} labels for {s.shape[0]} score rows")
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise ValueError(f"label out of range for {n_classes} classes")
    target = s[np.arange(s.shape[0]), labels][:, None]
    lower = np.arange(n_classes)[None, :] < labels[:, None]
    return np.sum(s > target, axis=1) + np.sum((s == target) & lower, axis=1)


def topk_hits(scores: np.ndarray, labels, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("k must be >= 1")
    return label_rank(scores, labels) < k


def topk_hit(scores, label: int, k: int) -> bool:
    """True iff ``label`` is among the ``k`` best-scoring classes."""
    return bool(topk_hits(np.asarray(scores)[None, :], [label], k)[0])


def topk_indices(scores, k: int) -> np.ndarray:
    """Indices of the ``k`` largest scores, best first, ties to the lower index."""
    s = np.asarray(scores)
    k = max(0, min(k, s.shape[-1]))
    return np.argsort(-s, axis=-1, kind="stable")[..., :k]


@dataclass
class ClassAccuracy:
    """Per-class hit counts; ``accuracy`` is NaN for classes without samples."""

    counts: np.ndarray
    hits: np.ndarray

    @property
    def accuracy(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, 100.0 * self.hits / np.maximum(self.counts, 1), np.nan)

    @property
    def present(self) -> np.ndarray:
        return np.flatnonzero(self.counts > 0)

    @property
    def overall(self) -> float:
        total = self.counts.sum()
        return float(100.0 * self.hits.sum() / total) if total else float("nan")


def class_accuracy(scores, labels, k: int, n_classes: int | None = None) -> ClassAccuracy:
    scores = np.asarray(scores)
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = scores.shape[1] if n_classes is None else n_classes
    hits = topk_hits(scores, labels, k) if len(labels) else np.zeros(0, dtype=bool)
    counts = np.bincount(labels, minlength=n_classes)
    return ClassAccuracy(counts, np.bincount(labels, weights=hits, minlength=n_classes).astype(np.int64))


def per_class_topk(adj_scores, noun_scores, anp_scores, adj_labels, noun_labels, anp_labels, k: int = 5) -> dict:
    """Per-class top-k tables keyed by concept name ("Adj", "Noun", "ANP").

    Adjective and noun correctness come from the specialist score vectors,
    ANP correctness from the fusion predictions.
    """
    if len(anp_labels) == 0:
        raise ValueError("per_class_topk needs a non-empty dataset")
    return {
        "Adj": class_accuracy(adj_scores, adj_labels, k),
        "Noun": class_accuracy(noun_scores, noun_labels, k),
        "ANP": class_accuracy(anp_scores, anp_labels, k),
    }


@dataclass
class CoDetectionMatrix:
    """Row r, column c: percent of samples with concept c correct among those with r correct.

    Rows with no conditioning samples hold NaN (absent).
    """

    values: np.ndarray  # (3, 3)
    counts: np.ndarray  # (3,) samples conditioning each row

    def row(self, name: str) -> np.ndarray:
        return self.values[CONCEPTS.index(name)]


def codetection(adj_scores, noun_scores, anp_scores, adj_labels, noun_labels, anp_labels, k: int = 5) -> CoDetectionMatrix:
    correct = np.stack(
        [
            topk_hits(adj_scores, adj_labels, k),
            topk_hits(noun_scores, noun_labels, k),
            topk_hits(anp_scores, anp_labels, k),
        ]
    )
    counts = correct.sum(axis=1)
    values = np.full((3, 3), np.nan)
    for r in range(3):
        if counts[r]:
            both = (correct[r] & correct).sum(axis=1)
            values[r] = 100.0 * both / counts[r]
    return CoDetectionMatrix(values, counts)


def accuracy_histogram(accuracies, bin_width: float = 10.0) -> tuple[np.ndarray, np.ndarray]:
    """Bin counts over [0, 100]; bins are [lo, hi) except the last, which is closed.

    Returns ``(edges, counts)`` with ``len(edges) == len(counts) + 1``. NaN
    (absent classes) are skipped.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    acc = np.asarray(accuracies, dtype=np.float64).reshape(-1)
    acc = acc[~np.isnan(acc)]
    if np.any(acc < 0) or np.any(acc > 100):
        raise ValueError("accuracies must be in [0, 100]")
    n_bins = int(np.ceil(100.0 / bin_width))
    edges = np.minimum(np.arange(n_bins + 1) * bin_width, 100.0)
    idx = np.minimum(np.floor(acc / bin_width).astype(np.int64), n_bins - 1)
    return edges, np.bincount(idx, minlength=n_bins)
