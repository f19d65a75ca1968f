"""Adjective-to-Noun Ratio, orientation labels, contribution profiles,
visually equivalent ANPs and related concepts."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .dataio import Dataset, Vocabulary
from .fusion import FusionNetwork, predict_dataset
from .metrics import topk_hits, topk_indices
from .relevance import Explainer, RelevanceReport

log = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-9


class Mode(enum.Enum):
    ANP_CORRECT = "anp-correct"
    ANP_ADJ = "anp-adj"
    ANP_NOUN = "anp-noun"
    ANP_ADJ_NOUN = "anp-adj-noun"
    ALL_TOP5 = "all-top5"


class Orientation(enum.Enum):
    ADJECTIVE = "adjective-oriented"
    NOUN = "noun-oriented"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class AnrRecord:
    anp: int
    mode: Mode
    anr: float
    n_samples: int


@dataclass(frozen=True)
class OrientationLabel:
    anp: int
    label: Orientation
    anr: float


def anr_of_report(report: RelevanceReport, n_adj: int | None = None, n_noun: int | None = None) -> float | None:
    """Mean adjective contribution over mean noun contribution.

    Returns None for reports that cannot enter an average: degenerate ones
    and those whose adjective or noun total is not positive.
    """
    n_adj = len(report.adj_contrib) if n_adj is None else n_adj
    n_noun = len(report.noun_contrib) if n_noun is None else n_noun
    if report.degenerate:
        return None
    adj = float(np.sum(report.adj_contrib))
    noun = float(np.sum(report.noun_contrib))
    if adj <= 0 or noun <= 0:
        return None
    return (adj / n_adj) / (noun / n_noun)


def qualifying_events(net: FusionNetwork, ds: Dataset, mode: Mode, k: int = 5, probs=None) -> list:
    """(sample index, explained ANP) pairs for a conditioning mode.

    The correctness modes explain each sample at its ground-truth ANP when
    that ANP is in the fusion top-k, optionally also requiring the
    adjective and/or noun in the specialist top-k. ``ALL_TOP5`` explains
    every one of the top-k predicted ANPs and ignores ground truth.
    """
    mode = Mode(mode)
    if len(ds) == 0:
        return []
    probs = predict_dataset(net, ds) if probs is None else probs
    if mode is Mode.ALL_TOP5:
        top = topk_indices(probs, k)
        return [(i, int(t)) for i in range(len(ds)) for t in top[i]]
    keep = topk_hits(probs, ds.anp_labels, k)
    if mode in (Mode.ANP_ADJ, Mode.ANP_ADJ_NOUN):
        keep &= topk_hits(ds.adj_probs, ds.adj_labels, k)
    if mode in (Mode.ANP_NOUN, Mode.ANP_ADJ_NOUN):
        keep &= topk_hits(ds.noun_probs, ds.noun_labels, k)
    return [(int(i), int(ds.anp_labels[i])) for i in np.flatnonzero(keep)]


def anr_table(net: FusionNetwork, ds: Dataset, mode: Mode, k: int = 5, probs=None) -> list:
    """Per-ANP mean of per-event ANR; ANPs with no usable events are absent."""
    mode = Mode(mode)
    explainer = Explainer(net)
    sums, counts, excluded = {}, {}, 0
    for i, target in qualifying_events(net, ds, mode, k, probs):
        r = anr_of_report(explainer.explain(ds.adj_probs[i], ds.noun_probs[i], target))
        if r is None:
            excluded += 1
            continue
        sums[target] = sums.get(target, 0.0) + r
        counts[target] = counts.get(target, 0) + 1
    if excluded:
        log.info("anr %s: %d degenerate events excluded", mode.value, excluded)
    return [AnrRecord(a, mode, sums[a] / counts[a], counts[a]) for a in sorted(sums)]


def classify_orientation(records) -> list:
    out = []
    for rec in records:
        if rec.n_samples <= 0:
            continue
        if abs(rec.anr - 1.0) <= BOUNDARY_TOL:
            label = Orientation.BOUNDARY
        elif rec.anr > 1.0:
            label = Orientation.ADJECTIVE
        else:
            label = Orientation.NOUN
        out.append(OrientationLabel(rec.anp, label, rec.anr))
    return out


@dataclass(frozen=True, eq=False)
class Profile:
    """Mean adjective and noun contributions of one ANP."""

    anp: int
    adj: np.ndarray
    noun: np.ndarray
    n_events: int


def contribution_profiles(net: FusionNetwork, ds: Dataset, k: int = 5, probs=None) -> dict:
    """Profiles for every ANP with at least one correct top-k prediction."""
    explainer = Explainer(net)
    adj_sum, noun_sum, counts = {}, {}, {}
    for i, target in qualifying_events(net, ds, Mode.ANP_CORRECT, k, probs):
        rep = explainer.explain(ds.adj_probs[i], ds.noun_probs[i], target)
        if target in counts:
            adj_sum[target] += rep.adj_contrib
            noun_sum[target] += rep.noun_contrib
            counts[target] += 1
        else:
            adj_sum[target] = rep.adj_contrib.copy()
            noun_sum[target] = rep.noun_contrib.copy()
            counts[target] = 1
    return {a: Profile(a, adj_sum[a] / counts[a], noun_sum[a] / counts[a], counts[a]) for a in sorted(counts)}


def aggregate_contributions(net: FusionNetwork, ds: Dataset, anp: int, k: int = 5) -> Profile | None:
    """Mean contribution vectors for one ANP, or None without qualifying events."""
    rows = np.flatnonzero(ds.anp_labels == anp)
    if rows.size == 0:
        return None
    return contribution_profiles(net, ds.subset(rows), k).get(anp)


def _top_set(v: np.ndarray, top: int) -> frozenset:
    return frozenset(int(i) for i in topk_indices(v, top))


def equivalent(p: Profile, q: Profile, top: int = 5) -> bool:
    """Same top adjective set and same top noun set, order ignored."""
    return _top_set(p.adj, top) == _top_set(q.adj, top) and _top_set(p.noun, top) == _top_set(q.noun, top)


def visually_equivalent(profiles, top: int = 5) -> list:
    """Unordered ANP pairs (a < b) with identical top adjective and noun sets."""
    if isinstance(profiles, dict):
        profiles = list(profiles.values())
    groups = {}
    for p in profiles:
        key = (_top_set(p.adj, top), _top_set(p.noun, top))
        groups.setdefault(key, []).append(p.anp)
    pairs = []
    for members in groups.values():
        members = sorted(members)
        pairs.extend((a, b) for i, a in enumerate(members) for b in members[i + 1 :])
    return sorted(pairs)


@dataclass(frozen=True)
class RelatedConcepts:
    anp: int
    adjectives: list  # (name, mean contribution), best first
    nouns: list


def related_concepts(profile: Profile, vocab: Vocabulary, k: int = 5) -> RelatedConcepts:
    adj = [(vocab.adjectives[i], float(profile.adj[i])) for i in topk_indices(profile.adj, k)]
    noun = [(vocab.nouns[i], float(profile.noun[i])) for i in topk_indices(profile.noun, k)]
    return RelatedConcepts(profile.anp, adj, noun)
