"""Command-line front end.

    anpnet synth    --config synth.cfg --out-dir data/
    anpnet split    --dataset data/dataset.anpd --vocab-dir data/ --seed 0 --out-dir data/
    anpnet train    --dataset data/train.anpd --vocab-dir data/ --seed 0 --out-dir run/
    anpnet eval     --checkpoint run/model.anpm --dataset data/test.anpd --vocab-dir data/ --out-dir run/
    anpnet explain  --checkpoint run/model.anpm --dataset data/test.anpd --vocab-dir data/ --sample 3
    anpnet analyze  --checkpoint run/model.anpm --dataset data/test.anpd --vocab-dir data/ --which anr

Every command writes ``manifest_<command>.json`` next to its outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    Mode,
    anr_table,
    classify_orientation,
    contribution_profiles,
    related_concepts,
    visually_equivalent,
)
from .config import read_kv, synth_config, train_config
from .dataio import (
    DATASET_VERSION,
    load_vocab,
    read_dataset,
    stratified_split,
    synth_generate,
    validate_vocab,
    write_dataset,
    write_vocab,
)
from .errors import ConfigError, FormatError
from .fusion import CHECKPOINT_VERSION, build_anpnet, load_checkpoint, predict_dataset, save_checkpoint, train
from .metrics import CONCEPTS, accuracy_histogram, codetection, per_class_topk
from .relevance import explain

log = logging.getLogger("anpnet")

FORMAT_VERSIONS = {"dataset": DATASET_VERSION, "checkpoint": CHECKPOINT_VERSION}


class CliError(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else f"{float(v):.6f}"
    return str(v)


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _write_manifest(out_dir: Path, command: str, args, config: dict, outputs, started: float) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "argv": sys.argv[1:],
        "arguments": {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"},
        "config": config,
        "seed": config.get("seed", getattr(args, "seed", None)),
        "outputs": [str(p) for p in outputs],
        "format_versions": FORMAT_VERSIONS,
        "started_unix": started,
        "duration_s": time.time() - started,
    }
    (out_dir / f"manifest_{command}.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def _out_dir(args) -> Path:
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _load_data(args):
    vocab = load_vocab(args.vocab_dir)
    ds, _ = read_dataset(args.dataset, vocab)
    return vocab, ds


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> None:
    started = time.time()
    kv = read_kv(args.config)
    if args.seed is not None:
        kv["seed"] = str(args.seed)
    cfg = synth_config(kv)
    vocab, ds = synth_generate(cfg)
    validate_vocab(vocab)
    out = _out_dir(args)
    write_vocab(vocab, out)
    write_dataset(out / "dataset.anpd", ds, vocab.n_anp)
    read_dataset(out / "dataset.anpd", load_vocab(out))
    outputs = [out / "adjectives.txt", out / "nouns.txt", out / "anps.csv", out / "dataset.anpd"]
    _write_manifest(out, "synth", args, kv, outputs, started)
    print(f"wrote {len(ds)} samples, {vocab.n_anp} ANPs to {out}")


def cmd_split(args) -> None:
    started = time.time()
    vocab, ds = _load_data(args)
    train_ds, test_ds = stratified_split(ds, args.train_fraction, args.seed)
    out = _out_dir(args)
    outputs = [out / "train.anpd", out / "test.anpd"]
    write_dataset(outputs[0], train_ds, vocab.n_anp)
    write_dataset(outputs[1], test_ds, vocab.n_anp)
    cfg = {"train_fraction": args.train_fraction, "seed": args.seed}
    _write_manifest(out, "split", args, cfg, outputs, started)
    print(f"train {len(train_ds)} / test {len(test_ds)}")


def cmd_train(args) -> None:
    started = time.time()
    vocab, ds = _load_data(args)
    kv = read_kv(args.config) if args.config else {}
    overrides = {
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "learning_rate": args.lr,
        "momentum": args.momentum,
        "weight_decay": args.weight_decay,
        "seed": args.seed,
        "val_fraction": args.val_fraction,
        "hidden_size": args.hidden_size,
    }
    tc, hidden_size = train_config(kv, overrides)
    net = build_anpnet(vocab.n_adj, vocab.n_noun, hidden_size, vocab.n_anp, seed=tc.seed)
    net, history = train(net, ds, tc)
    out = _out_dir(args)
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "model.anpm"
    save_checkpoint(net, ckpt)
    reloaded = load_checkpoint(ckpt)
    if reloaded.dims != net.dims:
        raise CliError("checkpoint failed to validate after writing")
    cols = ["epoch", "loss", "train_top1", "train_top5", "val_top1", "val_top5"]
    hist_path = _write_csv(
        out / "history.csv", cols, [[row.get(c, float("nan")) for c in cols] for row in history]
    )
    config = dict(tc.to_dict(), hidden_size=hidden_size)
    _write_manifest(out, "train", args, config, [ckpt, hist_path], started)
    if history:
        last = history[-1]
        print(f"epoch {last['epoch']}: loss {last['loss']:.4f}, train top-1 {last['train_top1']:.2f}%")


def cmd_eval(args) -> None:
    started = time.time()
    vocab, ds = _load_data(args)
    if len(ds) == 0:
        raise CliError("evaluation dataset is empty")
    net = load_checkpoint(args.checkpoint)
    probs = predict_dataset(net, ds)
    scores = (ds.adj_probs, ds.noun_probs, probs)
    labels = (ds.adj_labels, ds.noun_labels, ds.anp_labels)
    out = _out_dir(args)

    ks = sorted({1, 5, args.k})
    overall = []
    for k in ks:
        tables = per_class_topk(*scores, *labels, k=k)
        overall.extend((name, k, tables[name].overall, int(tables[name].counts.sum())) for name in CONCEPTS)
    acc_path = _write_csv(out / "accuracy.csv", ["concept", "k", "accuracy", "n_samples"], overall)

    tables = per_class_topk(*scores, *labels, k=args.k)
    names = {"Adj": vocab.adjectives, "Noun": vocab.nouns, "ANP": vocab.anp_names}
    rows = []
    for concept in CONCEPTS:
        t = tables[concept]
        acc = t.accuracy
        rows.extend((concept, c, names[concept][c], t.counts[c], t.hits[c], acc[c]) for c in t.present)
    per_path = _write_csv(out / "per_class.csv", ["concept", "class", "name", "n_samples", "hits", "accuracy"], rows)

    rows = []
    for concept in CONCEPTS:
        edges, counts = accuracy_histogram(tables[concept].accuracy, args.bin_width)
        rows.extend((concept, edges[i], edges[i + 1], counts[i]) for i in range(len(counts)))
    hist_path = _write_csv(out / "histogram.csv", ["concept", "bin_low", "bin_high", "count"], rows)

    m = codetection(*scores, *labels, k=args.k)
    rows = [(CONCEPTS[r], *m.values[r], m.counts[r]) for r in range(3)]
    co_path = _write_csv(out / "codetection.csv", ["row", *CONCEPTS, "n_samples"], rows)

    cfg = {"k": args.k, "bin_width": args.bin_width}
    _write_manifest(out, "eval", args, cfg, [acc_path, per_path, hist_path, co_path], started)
    for name, k, acc, _ in overall:
        print(f"{name:5s} top-{k}: {acc:.2f}%")


def _resolve_target(vocab, target: str | None, default: int) -> int:
    if target is None:
        return default
    try:
        idx = int(target)
    except ValueError:
        try:
            return vocab.anp_index(target)
        except ValueError:
            raise CliError(f"unknown ANP {target!r}") from None
    if not 0 <= idx < vocab.n_anp:
        raise CliError(f"ANP index {idx} out of range")
    return idx


def cmd_explain(args) -> None:
    started = time.time()
    vocab, ds = _load_data(args)
    if not 0 <= args.sample < len(ds):
        raise CliError(f"sample {args.sample} out of range for {len(ds)} samples")
    net = load_checkpoint(args.checkpoint)
    s = ds[args.sample]
    target = _resolve_target(vocab, args.target, s.anp_label)
    rep = explain(net, s.adj_probs, s.noun_probs, target)
    out = _out_dir(args)
    rows = [("adjective", vocab.adjectives[i], v) for i, v in enumerate(rep.adj_contrib)]
    rows += [("noun", vocab.nouns[i], v) for i, v in enumerate(rep.noun_contrib)]
    path = _write_csv(out / f"explain_{args.sample}_{target}.csv", ["branch", "concept", "contribution"], rows)
    cfg = {"sample": args.sample, "target": target}
    _write_manifest(out, "explain", args, cfg, [path], started)
    print(f"target {vocab.anp_name(target)!r} sample {args.sample}")
    print(
        f"checksum root={rep.root_relevance:.6f} sum={rep.total:.6f} "
        f"adj={rep.adj_contrib.sum():.6f} noun={rep.noun_contrib.sum():.6f} degenerate={int(rep.degenerate)}"
    )


def cmd_analyze(args) -> None:
    started = time.time()
    vocab, ds = _load_data(args)
    if len(ds) == 0:
        raise CliError("analysis dataset is empty")
    net = load_checkpoint(args.checkpoint)
    probs = predict_dataset(net, ds)
    out = _out_dir(args)
    modes = [Mode(m) for m in (args.mode or [])]
    outputs = []

    if args.which == "anr":
        modes = modes or list(Mode)
        tables = {m: {r.anp: r for r in anr_table(net, ds, m, args.k, probs)} for m in modes}
        header = ["anp", "name"]
        for m in modes:
            header += [f"anr_{m.value}", f"n_{m.value}"]
        rows = []
        for a in range(vocab.n_anp):
            if not any(a in t for t in tables.values()):
                continue
            row = [a, vocab.anp_name(a)]
            for m in modes:
                r = tables[m].get(a)
                row += [r.anr, r.n_samples] if r else [float("nan"), 0]
            rows.append(row)
        outputs.append(_write_csv(out / "anr.csv", header, rows))
    elif args.which == "orientation":
        mode = modes[0] if modes else Mode.ANP_CORRECT
        labels = classify_orientation(anr_table(net, ds, mode, args.k, probs))
        rows = [(lab.anp, vocab.anp_name(lab.anp), lab.anr, lab.label.value) for lab in labels]
        outputs.append(_write_csv(out / f"orientation_{mode.value}.csv", ["anp", "name", "anr", "orientation"], rows))
    elif args.which == "equiv":
        profiles = contribution_profiles(net, ds, args.k, probs)
        pairs = visually_equivalent(profiles, args.top)
        rows = [(a, vocab.anp_name(a), b, vocab.anp_name(b)) for a, b in pairs]
        outputs.append(_write_csv(out / "equiv.csv", ["anp_a", "name_a", "anp_b", "name_b"], rows))
    elif args.which == "related":
        profiles = contribution_profiles(net, ds, args.k, probs)
        rows = []
        for a, p in profiles.items():
            rel = related_concepts(p, vocab, args.top)
            rows.extend((a, vocab.anp_name(a), "adjective", i + 1, n, v) for i, (n, v) in enumerate(rel.adjectives))
            rows.extend((a, vocab.anp_name(a), "noun", i + 1, n, v) for i, (n, v) in enumerate(rel.nouns))
        outputs.append(_write_csv(out / "related.csv", ["anp", "name", "branch", "rank", "concept", "score"], rows))

    cfg = {"which": args.which, "modes": [m.value for m in modes], "k": args.k, "top": args.top}
    _write_manifest(out, f"analyze_{args.which}", args, cfg, outputs, started)
    for p in outputs:
        print(f"wrote {p}")


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anpnet", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, dataset=True, checkpoint=False):
        sp.add_argument("--out-dir", default=".", help="directory for outputs and the manifest")
        if dataset:
            sp.add_argument("--dataset", required=True)
            sp.add_argument("--vocab-dir", required=True)
        if checkpoint:
            sp.add_argument("--checkpoint", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic vocabulary and dataset")
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int, help="overrides the config seed")
    common(sp, dataset=False)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("split", help="stratified train/test split")
    common(sp)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--train-fraction", type=float, default=0.8)
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser("train", help="train the fusion network")
    common(sp)
    sp.add_argument("--config", help="key = value training config")
    sp.add_argument("--checkpoint", help="checkpoint path (default OUT_DIR/model.anpm)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--momentum", type=float)
    sp.add_argument("--weight-decay", type=float)
    sp.add_argument("--val-fraction", type=float)
    sp.add_argument("--hidden-size", type=int)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="accuracy tables, histograms and co-detection matrix")
    common(sp, checkpoint=True)
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--bin-width", type=float, default=10.0)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("explain", help="relevance report for one sample")
    common(sp, checkpoint=True)
    sp.add_argument("--sample", type=int, required=True)
    sp.add_argument("--target", help="ANP index or name (default: ground truth)")
    sp.set_defaults(func=cmd_explain)

    sp = sub.add_parser("analyze", help="ANR, orientation, equivalent ANPs, related concepts")
    common(sp, checkpoint=True)
    sp.add_argument("--which", choices=["anr", "orientation", "equiv", "related"], required=True)
    sp.add_argument("--mode", action="append", choices=[m.value for m in Mode])
    sp.add_argument("--k", type=int, default=5, help="top-k used to judge correct predictions")
    sp.add_argument("--top", type=int, default=5, help="concepts per branch for equiv/related")
    sp.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CliError, FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
