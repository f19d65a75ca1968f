"""Plain ``key = value`` config files.

One setting per line, ``#`` starts a comment. Lists are comma separated;
index pairs are written ``a:b``, e.g. ``duplicate_pairs = 0:10, 3:7``.
"""

from __future__ import annotations

from pathlib import Path

from .dataio import SynthConfig
from .errors import ConfigError, ParseError
from .fusion import TrainConfig


def parse_kv(text: str, path=None) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ParseError("empty key", lineno, path)
        if key in out:
            raise ParseError(f"key {key!r} given twice", lineno, path)
        out[key] = value
    return out


def read_kv(path) -> dict:
    return parse_kv(Path(path).read_text(encoding="utf-8"), path)


def _get(cfg: dict, key: str, conv, default=...):
    if key not in cfg:
        if default is ...:
            raise ConfigError(key, "required key is missing")
        return default
    try:
        return conv(cfg[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"cannot parse {cfg[key]!r}: {exc}") from None


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _floats(s: str):
    vals = [float(v) for v in s.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty list")
    return vals[0] if len(vals) == 1 else vals


def _pairs(s: str) -> list:
    out = []
    for item in s.replace(",", " ").split():
        a, b = item.split(":")
        out.append((int(a), int(b)))
    return out


def _names(s: str) -> list:
    return [v.strip() for v in s.split(",") if v.strip()]


SYNTH_KEYS = {
    "n_adj", "n_noun", "samples_per_anp", "seed", "anps", "adj_signal", "noun_signal",
    "noise_temp", "duplicate_pairs", "related_signal", "n_related", "adjectives", "nouns",
}
TRAIN_KEYS = {
    "epochs", "batch_size", "learning_rate", "momentum", "weight_decay", "seed",
    "shuffle", "val_fraction", "hidden_size",
}


def _check_unknown(cfg: dict, known: set) -> None:
    for key in cfg:
        if key not in known:
            raise ConfigError(key, "unknown key")


def synth_config(cfg: dict) -> SynthConfig:
    _check_unknown(cfg, SYNTH_KEYS)
    try:
        return SynthConfig(
            n_adj=_get(cfg, "n_adj", int),
            n_noun=_get(cfg, "n_noun", int),
            samples_per_anp=_get(cfg, "samples_per_anp", int),
            seed=_get(cfg, "seed", int),
            anps=_get(cfg, "anps", _pairs, None),
            adj_signal=_get(cfg, "adj_signal", _floats),
            noun_signal=_get(cfg, "noun_signal", _floats),
            noise_temp=_get(cfg, "noise_temp", float, 1.0),
            duplicate_pairs=_get(cfg, "duplicate_pairs", _pairs, []),
            related_signal=_get(cfg, "related_signal", float, 0.0),
            n_related=_get(cfg, "n_related", int, 0),
            adjective_names=_get(cfg, "adjectives", _names, None),
            noun_names=_get(cfg, "nouns", _names, None),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("<synth>", str(exc)) from None


def train_config(cfg: dict, overrides: dict | None = None) -> tuple[TrainConfig, int]:
    """TrainConfig plus hidden size; ``overrides`` (non-None values) win over the file."""
    _check_unknown(cfg, TRAIN_KEYS)
    merged = dict(cfg)
    for k, v in (overrides or {}).items():
        if v is not None:
            merged[k] = str(v)
    defaults = TrainConfig()
    try:
        tc = TrainConfig(
            epochs=_get(merged, "epochs", int, defaults.epochs),
            batch_size=_get(merged, "batch_size", int, defaults.batch_size),
            learning_rate=_get(merged, "learning_rate", float, defaults.learning_rate),
            momentum=_get(merged, "momentum", float, defaults.momentum),
            weight_decay=_get(merged, "weight_decay", float, defaults.weight_decay),
            seed=_get(merged, "seed", int),
            shuffle=_get(merged, "shuffle", _bool, defaults.shuffle),
            val_fraction=_get(merged, "val_fraction", float, defaults.val_fraction),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("<train>", str(exc)) from None
    return tc, _get(merged, "hidden_size", int, 1024)
