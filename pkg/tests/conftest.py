import sys

import numpy as np
import pytest

from anpnet.fusion import FusionNetwork, Whitener
from anpnet.nn import DenseLayer


def routing_net(n_adj=2, n_noun=2) -> FusionNetwork:
    """Hand-built net: hidden unit (i, j) fires for adjective i plus noun j.

    Hidden unit k = i * n_noun + j has weight +1 on adjective i and noun j,
    -0.5 on every other input, bias -1; output ANP k reads only unit k.
    """
    n_in = n_adj + n_noun
    n_anp = n_adj * n_noun
    w = np.full((n_anp, n_in), -0.5)
    for i in range(n_adj):
        for j in range(n_noun):
            k = i * n_noun + j
            w[k, i] = 1.0
            w[k, n_adj + j] = 1.0
    hidden = DenseLayer(w.astype(np.float32), np.full(n_anp, -1.0, dtype=np.float32))
    output = DenseLayer(np.eye(n_anp, dtype=np.float32) * 4, np.zeros(n_anp, dtype=np.float32))
    return FusionNetwork(Whitener.identity(n_in), hidden, output, n_adj)


def random_net(rng, n_adj, n_noun, hidden, n_anp, dtype=np.float32) -> FusionNetwork:
    w1 = rng.normal(0, 0.7, (hidden, n_adj + n_noun))
    b1 = rng.normal(0, 0.3, hidden)
    w2 = rng.normal(0, 0.7, (n_anp, hidden))
    b2 = rng.normal(0, 0.3, n_anp)
    whitener = Whitener(rng.uniform(0, 0.5, n_adj + n_noun), rng.uniform(0.1, 1.0, n_adj + n_noun))
    return FusionNetwork(
        whitener,
        DenseLayer(w1.astype(dtype), b1.astype(dtype)),
        DenseLayer(w2.astype(dtype), b2.astype(dtype)),
        n_adj,
    )


def random_probs(rng, n, size=None):
    return rng.dirichlet(np.full(n, 0.5), size=size)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)


SYNTH_CFG = """\
# small planted vocabulary
n_adj = 3
n_noun = 3
samples_per_anp = 30
seed = {seed}
adj_signal = 4
noun_signal = 3
"""

PIPELINE_CSVS = ("history.csv", "accuracy.csv", "per_class.csv", "histogram.csv", "codetection.csv", "anr.csv", "equiv.csv", "related.csv")


def run_pipeline(root, seed=0, epochs=3, hidden=16):
    """synth -> split -> train -> eval -> analyze under ``root``; returns the run dir."""
    from anpnet.cli import main

    root.mkdir(parents=True, exist_ok=True)
    data, run = root / "data", root / "run"
    cfg = root / "synth.cfg"
    cfg.write_text(SYNTH_CFG.format(seed=seed))
    common = ["--vocab-dir", str(data)]
    steps = [
        ["synth", "--config", str(cfg), "--out-dir", str(data)],
        ["split", "--dataset", str(data / "dataset.anpd"), *common, "--seed", str(seed), "--out-dir", str(data)],
        ["train", "--dataset", str(data / "train.anpd"), *common, "--seed", str(seed),
         "--epochs", str(epochs), "--hidden-size", str(hidden), "--out-dir", str(run)],
    ]
    evald = ["--checkpoint", str(run / "model.anpm"), "--dataset", str(data / "test.anpd"), *common, "--out-dir", str(run)]
    steps.append(["eval", *evald])
    for which in ("anr", "equiv", "related"):
        steps.append(["analyze", *evald, "--which", which])
    for argv in steps:
        assert main(argv) == 0, argv
    return run
