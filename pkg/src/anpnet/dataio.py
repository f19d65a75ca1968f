"""Vocabulary and dataset handling, file formats and the synthetic generator."""

from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    DimensionError,
    NonFiniteError,
    ParseError,
    ShapeError,
    TruncatedError,
    VersionError,
)
from .nn import softmax

log = logging.getLogger(__name__)

DATASET_MAGIC = b"ANPD"
DATASET_VERSION = 1
_DATASET_HEADER = struct.Struct("<4sHQIII")
_LABELS = struct.Struct("<III")

PROB_SUM_TOL = 1e-4
CSV_SUM_TOL = 1e-3
MIN_NOUNS_PER_ADJECTIVE = 3


# ---------------------------------------------------------------- vocabulary


@dataclass(frozen=True)
class Vocabulary:
    adjectives: tuple
    nouns: tuple
    anps: tuple  # (adjective index, noun index) per ANP class

    def __post_init__(self):
        object.__setattr__(self, "adjectives", tuple(self.adjectives))
        object.__setattr__(self, "nouns", tuple(self.nouns))
        object.__setattr__(self, "anps", tuple((int(a), int(n)) for a, n in self.anps))
        seen = set()
        for k, (a, n) in enumerate(self.anps):
            if not (0 <= a < len(self.adjectives) and 0 <= n < len(self.nouns)):
                raise ValueError(f"ANP {k} = ({a}, {n}) is out of range")
            if (a, n) in seen:
                raise ValueError(f"duplicate ANP ({a}, {n})")
            seen.add((a, n))

    @property
    def n_adj(self) -> int:
        return len(self.adjectives)

    @property
    def n_noun(self) -> int:
        return len(self.nouns)

    @property
    def n_anp(self) -> int:
        return len(self.anps)

    def anp_name(self, k: int) -> str:
        a, n = self.anps[k]
        return f"{self.adjectives[a]} {self.nouns[n]}"

    @property
    def anp_names(self) -> list:
        return [self.anp_name(k) for k in range(self.n_anp)]

    def anp_index(self, name: str) -> int:
        return self.anp_names.index(name)

    def pair_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        pairs = np.array(self.anps, dtype=np.int64).reshape(-1, 2)
        return pairs[:, 0], pairs[:, 1]


@dataclass
class VocabReport:
    warnings: list = field(default_factory=list)
    nouns_per_adjective: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.warnings


def _read_tokens(path: Path) -> list:
    tokens = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            tok = line.rstrip("\r\n")
            if not tok.strip():
                raise ParseError("empty token", line=lineno, path=path)
            tokens.append(tok)
    return tokens


def load_vocab(vocab_dir=None, *, adjectives=None, nouns=None, anps=None) -> Vocabulary:
    """Read ``adjectives.txt``, ``nouns.txt`` and ``anps.csv``.

    Either give the directory holding all three or the three paths.
    """
    if vocab_dir is not None:
        d = Path(vocab_dir)
        adjectives = adjectives or d / "adjectives.txt"
        nouns = nouns or d / "nouns.txt"
        anps = anps or d / "anps.csv"
    adj_names = _read_tokens(Path(adjectives))
    noun_names = _read_tokens(Path(nouns))
    pairs, seen = [], {}
    with open(anps, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.strip().split(",")
            if len(parts) != 2:
                raise ParseError(f"expected 'adj_index,noun_index', got {line.strip()!r}", lineno, anps)
            try:
                a, n = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer index in {line.strip()!r}", lineno, anps) from None
            if not 0 <= a < len(adj_names):
                raise ParseError(f"adjective index {a} out of range", lineno, anps)
            if not 0 <= n < len(noun_names):
                raise ParseError(f"noun index {n} out of range", lineno, anps)
            if (a, n) in seen:
                raise ParseError(f"duplicate ANP ({a},{n}), first seen on line {seen[(a, n)]}", lineno, anps)
            seen[(a, n)] = lineno
            pairs.append((a, n))
    return Vocabulary(adj_names, noun_names, pairs)


def write_vocab(vocab: Vocabulary, vocab_dir) -> None:
    d = Path(vocab_dir)
    d.mkdir(parents=True, exist_ok=True)
    (d / "adjectives.txt").write_text("".join(f"{a}\n" for a in vocab.adjectives), encoding="utf-8")
    (d / "nouns.txt").write_text("".join(f"{n}\n" for n in vocab.nouns), encoding="utf-8")
    (d / "anps.csv").write_text("".join(f"{a},{n}\n" for a, n in vocab.anps), encoding="utf-8")


def validate_vocab(vocab: Vocabulary, min_nouns: int = MIN_NOUNS_PER_ADJECTIVE) -> VocabReport:
    """Check the curation constraints; problems are reported, never raised."""
    report = VocabReport()
    nouns_of = {a: set() for a in range(vocab.n_adj)}
    used_nouns = set()
    for a, n in vocab.anps:
        nouns_of[a].add(n)
        used_nouns.add(n)
    report.nouns_per_adjective = {vocab.adjectives[a]: len(s) for a, s in nouns_of.items()}
    for a, s in nouns_of.items():
        name = vocab.adjectives[a]
        if not s:
            report.warnings.append(f"adjective {name!r} is not used by any ANP")
        elif len(s) < min_nouns:
            report.warnings.append(f"adjective {name!r} is paired with {len(s)} noun(s), fewer than {min_nouns}")
    for n in range(vocab.n_noun):
        if n not in used_nouns:
            report.warnings.append(f"noun {vocab.nouns[n]!r} is not used by any ANP")
    if len(set(vocab.anps)) != len(vocab.anps):
        report.warnings.append("duplicate ANP pairs")
    for w in report.warnings:
        log.warning("vocabulary: %s", w)
    return report


# ---------------------------------------------------------------- samples


@dataclass(frozen=True, eq=False)
class Sample:
    adj_probs: np.ndarray
    noun_probs: np.ndarray
    adj_label: int
    noun_label: int
    anp_label: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column store of samples; row ``i`` is one observation."""

    adj_probs: np.ndarray  # (N, n_adj) float32
    noun_probs: np.ndarray  # (N, n_noun) float32
    adj_labels: np.ndarray  # (N,) int64
    noun_labels: np.ndarray
    anp_labels: np.ndarray

    def __post_init__(self):
        adj = np.ascontiguousarray(self.adj_probs, dtype=np.float32)
        noun = np.ascontiguousarray(self.noun_probs, dtype=np.float32)
        if adj.ndim != 2 or noun.ndim != 2 or adj.shape[0] != noun.shape[0]:
            raise ShapeError(f"probability matrices disagree: {adj.shape} vs {noun.shape}")
        object.__setattr__(self, "adj_probs", adj)
        object.__setattr__(self, "noun_probs", noun)
        for name in ("adj_labels", "noun_labels", "anp_labels"):
            lab = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1)
            if lab.shape[0] != adj.shape[0]:
                raise ShapeError(f"{name} has {lab.shape[0]} entries for {adj.shape[0]} samples")
            object.__setattr__(self, name, lab)

    def __len__(self) -> int:
        return self.adj_probs.shape[0]

    def __getitem__(self, i: int) -> Sample:
        return Sample(
            self.adj_probs[i],
            self.noun_probs[i],
            int(self.adj_labels[i]),
            int(self.noun_labels[i]),
            int(self.anp_labels[i]),
        )

    @property
    def n_adj(self) -> int:
        return self.adj_probs.shape[1]

    @property
    def n_noun(self) -> int:
        return self.noun_probs.shape[1]

    @property
    def inputs(self) -> np.ndarray:
        """Concatenated (adjective, noun) probability rows."""
        return np.concatenate([self.adj_probs, self.noun_probs], axis=1)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.adj_probs[idx],
            self.noun_probs[idx],
            self.adj_labels[idx],
            self.noun_labels[idx],
            self.anp_labels[idx],
        )

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], n_adj: int, n_noun: int) -> "Dataset":
        if not samples:
            return cls.empty(n_adj, n_noun)
        return cls(
            np.stack([s.adj_probs for s in samples]),
            np.stack([s.noun_probs for s in samples]),
            [s.adj_label for s in samples],
            [s.noun_label for s in samples],
            [s.anp_label for s in samples],
        )

    @classmethod
    def empty(cls, n_adj: int, n_noun: int) -> "Dataset":
        z = np.zeros(0, dtype=np.int64)
        return cls(np.zeros((0, n_adj)), np.zeros((0, n_noun)), z, z, z)

    def check(self, vocab: Vocabulary | None = None, sum_tol: float = PROB_SUM_TOL) -> None:
        """Raise if any row breaks the sample invariants."""
        if not (np.all(np.isfinite(self.adj_probs)) and np.all(np.isfinite(self.noun_probs))):
            raise NonFiniteError("non-finite probability")
        for name, m in (("adjective", self.adj_probs), ("noun", self.noun_probs)):
            bad = np.flatnonzero(np.abs(m.sum(axis=1, dtype=np.float64) - 1) > sum_tol)
            if bad.size:
                raise ValueError(f"sample {bad[0]}: {name} probabilities do not sum to 1")
        if vocab is not None:
            if (self.n_adj, self.n_noun) != (vocab.n_adj, vocab.n_noun):
                raise DimensionError(
                    f"dataset has n_adj={self.n_adj}, n_noun={self.n_noun}; "
                    f"vocabulary has n_adj={vocab.n_adj}, n_noun={vocab.n_noun}"
                )
            check_labels(self, vocab)


def check_labels(ds: Dataset, vocab: Vocabulary) -> None:
    if len(ds) == 0:
        return
    if ds.anp_labels.min() < 0 or ds.anp_labels.max() >= vocab.n_anp:
        raise DimensionError("ANP label out of range for the vocabulary")
    pa, pn = vocab.pair_arrays()
    bad = np.flatnonzero((pa[ds.anp_labels] != ds.adj_labels) | (pn[ds.anp_labels] != ds.noun_labels))
    if bad.size:
        raise ValueError(f"sample {bad[0]}: adjective/noun labels disagree with ANP {ds.anp_labels[bad[0]]}")


def concat(datasets: Iterable[Dataset]) -> Dataset:
    ds = list(datasets)
    return Dataset(
        np.concatenate([d.adj_probs for d in ds]),
        np.concatenate([d.noun_probs for d in ds]),
        np.concatenate([d.adj_labels for d in ds]),
        np.concatenate([d.noun_labels for d in ds]),
        np.concatenate([d.anp_labels for d in ds]),
    )


# ---------------------------------------------------------------- binary format


def write_dataset(path, ds: Dataset, n_anp: int) -> None:
    n = len(ds)
    rows = np.zeros(
        n,
        dtype=[
            ("labels", "<u4", (3,)),
            ("adj", "<f4", (ds.n_adj,)),
            ("noun", "<f4", (ds.n_noun,)),
        ],
    )
    rows["labels"][:, 0] = ds.adj_labels
    rows["labels"][:, 1] = ds.noun_labels
    rows["labels"][:, 2] = ds.anp_labels
    rows["adj"] = ds.adj_probs
    rows["noun"] = ds.noun_probs
    with open(path, "wb") as fh:
        fh.write(_DATASET_HEADER.pack(DATASET_MAGIC, DATASET_VERSION, n, ds.n_adj, ds.n_noun, n_anp))
        fh.write(rows.tobytes())


def read_dataset(path, vocab: Vocabulary | None = None) -> tuple[Dataset, int]:
    """Load a dataset file; returns the dataset and the header's n_anp."""
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise TruncatedError(f"{path}: file shorter than magic")
    if data[:4] != DATASET_MAGIC:
        raise BadMagicError(f"{path}: bad magic {data[:4]!r}, expected {DATASET_MAGIC!r}")
    if len(data) < _DATASET_HEADER.size:
        raise TruncatedError(f"{path}: truncated header")
    _, version, n, n_adj, n_noun, n_anp = _DATASET_HEADER.unpack_from(data)
    if version != DATASET_VERSION:
        raise VersionError(f"{path}: unsupported dataset version {version}")
    if vocab is not None and (n_adj, n_noun, n_anp) != (vocab.n_adj, vocab.n_noun, vocab.n_anp):
        raise DimensionError(
            f"{path}: header n_adj={n_adj}, n_noun={n_noun}, n_anp={n_anp}; "
            f"vocabulary n_adj={vocab.n_adj}, n_noun={vocab.n_noun}, n_anp={vocab.n_anp}"
        )
    dtype = np.dtype([("labels", "<u4", (3,)), ("adj", "<f4", (n_adj,)), ("noun", "<f4", (n_noun,))])
    expected = _DATASET_HEADER.size + n * dtype.itemsize
    if len(data) < expected:
        raise TruncatedError(f"{path}: expected {expected} bytes, found {len(data)}")
    if len(data) > expected:
        raise DimensionError(f"{path}: {len(data) - expected} trailing bytes after {n} samples")
    rows = np.frombuffer(data, dtype=dtype, count=n, offset=_DATASET_HEADER.size)
    if not (np.all(np.isfinite(rows["adj"])) and np.all(np.isfinite(rows["noun"]))):
        raise NonFiniteError(f"{path}: non-finite probability values")
    labels = rows["labels"].astype(np.int64)
    ds = Dataset(rows["adj"].copy(), rows["noun"].copy(), labels[:, 0], labels[:, 1], labels[:, 2])
    if np.any(ds.anp_labels >= n_anp) or np.any(ds.adj_labels >= n_adj) or np.any(ds.noun_labels >= n_noun):
        raise DimensionError(f"{path}: label out of range of header dimensions")
    if vocab is not None:
        check_labels(ds, vocab)
    return ds, n_anp


def import_csv(paths, vocab: Vocabulary) -> Dataset:
    """Read samples from CSV files with a header row.

    Columns: adj_label, noun_label, anp_label, then n_adj adjective and
    n_noun noun probabilities. Branch rows summing within 1e-3 of one are
    renormalised; anything else is rejected with its row number.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    width = 3 + vocab.n_adj + vocab.n_noun
    parts = []
    for path in paths:
        labels, adj, noun = [], [], []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ParseError("missing header row", line=1, path=path)
            if len(header) != width:
                raise DimensionError(f"{path}: header has {len(header)} columns, vocabulary implies {width}")
            for lineno, row in enumerate(reader, 2):
                if not row:
                    continue
                if len(row) != width:
                    raise ParseError(f"expected {width} columns, got {len(row)}", lineno, path)
                try:
                    lab = [int(v) for v in row[:3]]
                    vals = np.array([float(v) for v in row[3:]], dtype=np.float64)
                except ValueError as exc:
                    raise ParseError(str(exc), lineno, path) from None
                if not np.all(np.isfinite(vals)):
                    raise ParseError("non-finite probability", lineno, path)
                a, n = vals[: vocab.n_adj], vals[vocab.n_adj :]
                for name, v in (("adjective", a), ("noun", n)):
                    s = v.sum()
                    if abs(s - 1) > CSV_SUM_TOL or np.any(v < 0):
                        raise ParseError(f"{name} probabilities sum to {s:.6g}", lineno, path)
                labels.append(lab)
                adj.append(a / a.sum())
                noun.append(n / n.sum())
        lab = np.array(labels, dtype=np.int64).reshape(-1, 3)
        parts.append(
            Dataset(
                np.array(adj).reshape(-1, vocab.n_adj),
                np.array(noun).reshape(-1, vocab.n_noun),
                lab[:, 0],
                lab[:, 1],
                lab[:, 2],
            )
        )
    ds = concat(parts)
    check_labels(ds, vocab)
    return ds


# ---------------------------------------------------------------- splitting


def stratified_split(ds: Dataset, train_fraction: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Per-ANP split: floor(fraction * n) (at least 1) rows go to train."""
    if not 0 < train_fraction <= 1:
        raise ValueError(f"train_fraction must be in (0, 1], got {train_fraction}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in np.unique(ds.anp_labels):
        members = np.flatnonzero(ds.anp_labels == c)
        if members.size < 2:
            raise ValueError(f"ANP class {c} has {members.size} sample(s); at least 2 are needed")
        members = rng.permutation(members)
        n_train = max(1, int(np.floor(train_fraction * members.size)))
        train_idx.append(members[:n_train])
        test_idx.append(members[n_train:])
    train = np.sort(np.concatenate(train_idx))
    test = np.sort(np.concatenate(test_idx))
    return ds.subset(train), ds.subset(test)


# ---------------------------------------------------------------- synthetic data


@dataclass
class SynthConfig:
    """Generator settings.

    ``adj_signal``/``noun_signal`` are the logit boosts on the true class,
    either one value for all ANPs or one per ANP. ANP ``b`` of a
    ``duplicate_pairs`` entry ``(a, b)`` draws its probability vectors from
    ANP ``a``'s generator while keeping its own labels.
    """

    n_adj: int
    n_noun: int
    samples_per_anp: int
    seed: int
    anps: list | None = None  # default: the full adjective x noun grid
    adj_signal: float | Sequence[float] = 4.0
    noun_signal: float | Sequence[float] = 4.0
    noise_temp: float = 1.0
    duplicate_pairs: list = field(default_factory=list)
    related_signal: float = 0.0
    n_related: int = 0
    adjective_names: list | None = None
    noun_names: list | None = None

    def __post_init__(self):
        if self.n_adj < 1 or self.n_noun < 1:
            raise ValueError("n_adj and n_noun must be >= 1")
        if self.samples_per_anp < 1:
            raise ValueError("samples_per_anp must be >= 1")
        if not self.noise_temp > 0:
            raise ValueError("noise_temp must be positive")
        if self.n_related < 0 or not np.isfinite(self.related_signal):
            raise ValueError("n_related must be >= 0 and related_signal finite")
        if self.anps is None:
            self.anps = [(a, n) for a in range(self.n_adj) for n in range(self.n_noun)]
        self.anps = [tuple(int(v) for v in p) for p in self.anps]
        n_anp = len(self.anps)
        for name in ("adj_signal", "noun_signal"):
            sig = np.broadcast_to(np.asarray(getattr(self, name), dtype=np.float64), (n_anp,))
            if not np.all(np.isfinite(sig)) or np.any(sig < 0):
                raise ValueError(f"{name} must be finite and non-negative")
        donors = {}
        for a, b in self.duplicate_pairs:
            if not (0 <= a < n_anp and 0 <= b < n_anp) or a == b:
                raise ValueError(f"bad duplicate pair ({a}, {b})")
            if b in donors:
                raise ValueError(f"ANP {b} appears as the copy in more than one duplicate pair")
            donors[b] = a
        self.duplicate_pairs = [(int(a), int(b)) for a, b in self.duplicate_pairs]

    def signals(self) -> tuple[np.ndarray, np.ndarray]:
        n_anp = len(self.anps)
        return (
            np.broadcast_to(np.asarray(self.adj_signal, dtype=np.float64), (n_anp,)).copy(),
            np.broadcast_to(np.asarray(self.noun_signal, dtype=np.float64), (n_anp,)).copy(),
        )

    def generator_of(self) -> np.ndarray:
        """Index of the ANP whose generator each ANP samples from."""
        gen = np.arange(len(self.anps))
        for a, b in self.duplicate_pairs:
            gen[b] = a
        # follow chains so a copy of a copy uses the original generator
        for _ in range(len(self.anps)):
            nxt = gen[gen]
            if np.array_equal(nxt, gen):
                break
            gen = nxt
        return gen

    def vocabulary(self) -> Vocabulary:
        adjs = self.adjective_names or [f"adj{i}" for i in range(self.n_adj)]
        nouns = self.noun_names or [f"noun{j}" for j in range(self.n_noun)]
        return Vocabulary(adjs, nouns, self.anps)


def synth_generate(config: SynthConfig) -> tuple[Vocabulary, Dataset]:
    """Draw specialist outputs as softmax((signal * onehot + N(0, 1)) / noise_temp)."""
    vocab = config.vocabulary()
    rng = np.random.default_rng(config.seed)
    adj_sig, noun_sig = config.signals()
    gen = config.generator_of()
    m = config.samples_per_anp
    related = _related_sets(config, vocab)
    adj_rows, noun_rows, labels = [], [], []
    for k, (a, n) in enumerate(vocab.anps):
        g = gen[k]
        ga, gn = vocab.anps[g]
        adj_logits = rng.standard_normal((m, vocab.n_adj))
        adj_logits[:, ga] += adj_sig[g]
        noun_logits = rng.standard_normal((m, vocab.n_noun))
        noun_logits[:, gn] += noun_sig[g]
        if related:
            adj_logits[:, related[g][0]] += config.related_signal
            noun_logits[:, related[g][1]] += config.related_signal
        adj_rows.append(softmax(adj_logits / config.noise_temp))
        noun_rows.append(softmax(noun_logits / config.noise_temp))
        labels.append(np.tile([a, n, k], (m, 1)))
    lab = np.concatenate(labels)
    ds = Dataset(np.concatenate(adj_rows), np.concatenate(noun_rows), lab[:, 0], lab[:, 1], lab[:, 2])
    return vocab, ds


def _related_sets(config: SynthConfig, vocab: Vocabulary) -> dict:
    """Per-generator (adjective indices, noun indices) of co-activated concepts."""
    if config.n_related == 0 or config.related_signal == 0:
        return {}
    rng = np.random.default_rng([config.seed, 2])
    out = {}
    for g, (a, n) in enumerate(vocab.anps):
        others_a = np.delete(np.arange(vocab.n_adj), a)
        others_n = np.delete(np.arange(vocab.n_noun), n)
        out[g] = (
            np.sort(rng.choice(others_a, size=min(config.n_related, others_a.size), replace=False)),
            np.sort(rng.choice(others_n, size=min(config.n_related, others_n.size), replace=False)),
        )
    return out
