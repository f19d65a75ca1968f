"""Acceptance criteria 1-10, each at its stated tolerance.

Every test appends one ``criterion N: PASS|FAIL ...`` line to ``RESULTS``;
the conftest hook prints them at the end of the session.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from anpnet import nn
from anpnet.analysis import anr_of_report
from anpnet.dataio import Dataset, read_dataset, write_dataset
from anpnet.errors import BadMagicError, TruncatedError, VersionError
from anpnet.experiments import equivalence_recovery, orientation_recovery, separable_learning
from anpnet.fusion import load_checkpoint, logits, save_checkpoint
from anpnet.metrics import codetection
from anpnet.relevance import RelevanceReport, explain, zb_backprop, zplus_backprop

from conftest import PIPELINE_CSVS, random_net, random_probs, run_pipeline

RESULTS = []


@contextmanager
def criterion(n, title):
    started = time.perf_counter()
    detail = {}
    try:
        yield detail
    except BaseException as exc:
        RESULTS.append(f"criterion {n:2d}: FAIL  {title} ({type(exc).__name__}: {exc})".splitlines()[0])
        print(RESULTS[-1])
        raise
    extra = ", ".join(f"{k}={v}" for k, v in detail.items())
    RESULTS.append(f"criterion {n:2d}: PASS  {title} [{time.perf_counter() - started:.1f}s{', ' + extra if extra else ''}]")
    print(RESULTS[-1])


def _rel_err(a, b):
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)


def test_c01_gradient_oracle():
    with criterion(1, "analytic gradients match central differences") as d:
        t0 = time.perf_counter()
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(100):
            n_adj, n_noun = rng.integers(1, 9, 2)
            hidden, n_anp = int(rng.integers(1, 17)), int(rng.integers(1, 13))
            net = random_net(rng, int(n_adj), int(n_noun), hidden, n_anp, dtype=np.float64)
            batch = int(rng.integers(1, 5))
            x = net.whitener.apply(np.hstack([random_probs(rng, int(n_adj), batch), random_probs(rng, int(n_noun), batch)]))
            x = x.astype(np.float64)
            y = rng.integers(0, n_anp, batch)
            params = nn.layer_params(net.hidden, net.output)

            def loss(p):
                h, o = nn.layers_from_params(p)
                return float(np.mean(nn.cross_entropy(nn.forward(h, o, x).probs, y)))

            analytic = nn.backward(net.hidden, net.output, nn.forward(net.hidden, net.output, x), y)
            numeric = nn.finite_diff_grad(loss, params, 1e-6)
            worst = max(worst, max(_rel_err(analytic[k], numeric[k]) for k in params))
        elapsed = time.perf_counter() - t0
        d["max_rel_err"] = f"{worst:.2e}"
        assert worst < 1e-6
        assert elapsed < 60


def test_c02_relevance_conservation():
    with criterion(2, "relevance conservation and non-negativity") as d:
        t0 = time.perf_counter()
        rng = np.random.default_rng(2)
        worst, lowest, degenerate = 0.0, 0.0, 0
        for _ in range(1000):
            n_adj, n_noun = (int(v) for v in rng.integers(1, 9, 2))
            net = random_net(rng, n_adj, n_noun, int(rng.integers(1, 17)), int(rng.integers(1, 13)))
            adj, noun = random_probs(rng, n_adj), random_probs(rng, n_noun)
            # a non-positive logit has zero root relevance; prefer targets that carry mass
            live = np.flatnonzero(logits(net, adj, noun) > 0)
            target = int(rng.choice(live)) if live.size else int(rng.integers(net.output.fan_out))
            rep = explain(net, adj, noun, target)
            lowest = min(lowest, rep.adj_contrib.min(), rep.noun_contrib.min())
            if rep.degenerate:
                degenerate += 1
                continue
            worst = max(worst, abs(rep.total - rep.root_relevance) / rep.root_relevance)
        elapsed = time.perf_counter() - t0
        d.update(max_rel_err=f"{worst:.2e}", min_contrib=f"{lowest:.2e}", degenerate=degenerate)
        assert worst < 1e-6
        assert lowest >= -1e-9
        assert elapsed < 60


def test_c03_hand_rule_fixtures():
    with criterion(3, "z+ and zB hand fixtures"):
        layer = nn.DenseLayer(np.array([[0.5, -0.25]]), np.zeros(1))
        np.testing.assert_allclose(zplus_backprop(layer, [1.0, 2.0], [1.0]), [1.0, 0.0], rtol=0, atol=1e-12)
        layer = nn.DenseLayer(np.array([[1.0, 1.0]]), np.zeros(1))
        np.testing.assert_allclose(zplus_backprop(layer, [1.0, 3.0], [2.0]), [0.5, 1.5], rtol=0, atol=1e-12)
        layer = nn.DenseLayer(np.array([[1.0, -1.0]]), np.zeros(1))
        np.testing.assert_allclose(zb_backprop(layer, [1.0, 0.0], [1.0]), [0.5, 0.5], rtol=0, atol=1e-12)
        layer = nn.DenseLayer(np.array([[1.0, 1.0]]), np.zeros(1))
        np.testing.assert_allclose(zb_backprop(layer, [1.0, 1.0], [1.0]), [0.5, 0.5], rtol=0, atol=1e-12)


def test_c04_anr_normalization():
    with criterion(4, "ANR normalization and scale invariance") as d:
        rng = np.random.default_rng(4)
        for n_adj, n_noun in ((3, 4), (117, 167), (1, 9)):
            c = rng.uniform(0.01, 10)
            rep = RelevanceReport(0, c * (n_adj + n_noun), np.full(n_adj, c), np.full(n_noun, c), False)
            assert abs(anr_of_report(rep) - 1.0) <= 1e-9
        worst = 0.0
        for _ in range(1000):
            adj = rng.exponential(size=int(rng.integers(1, 30)))
            noun = rng.exponential(size=int(rng.integers(1, 30)))
            rep = RelevanceReport(0, adj.sum() + noun.sum(), adj, noun, False)
            scale = float(np.exp(rng.uniform(-10, 10)))
            a, b = anr_of_report(rep), anr_of_report(rep.scaled(scale))
            worst = max(worst, abs(a - b) / a)
        d["max_rel_change"] = f"{worst:.1e}"
        assert worst < 1e-12


def test_c05_orientation_recovery():
    with criterion(5, "planted orientation recovered under all-top5") as d:
        t0 = time.perf_counter()
        res = orientation_recovery(seed=0, samples_per_anp=500, strong=4.0, weak=1.0)
        elapsed = time.perf_counter() - t0
        d.update(adj=f"{100 * res.adj_recovered:.0f}%", noun=f"{100 * res.noun_recovered:.0f}%")
        assert res.adj_recovered >= 0.8
        assert res.noun_recovered >= 0.8
        assert elapsed < 300


def test_c06_separable_learning():
    with criterion(6, "high-signal set is learned") as d:
        t0 = time.perf_counter()
        res = separable_learning(seed=0, signal=8.0)
        elapsed = time.perf_counter() - t0
        d.update(classes=res.n_classes, top1=f"{res.top1:.2f}", top5=f"{res.top5:.2f}")
        assert res.n_classes >= 6
        assert res.top1 >= 95.0
        assert res.top5 >= 99.0
        assert elapsed < 180


def test_c07_codetection():
    with criterion(7, "co-detection diagonal and 2-sample fixture") as d:
        adj = np.array([[1.0, 0.0], [1.0, 0.0]])
        noun = np.array([[1.0, 0.0], [0.0, 1.0]])
        m = codetection(adj, noun, noun, [0, 0], [0, 0], [0, 0], k=1)
        np.testing.assert_array_equal(m.values, [[100, 50, 50], [100, 100, 100], [100, 100, 100]])
        rng = np.random.default_rng(7)
        evaluated = 0
        for _ in range(200):
            n = int(rng.integers(1, 60))
            sizes = rng.integers(1, 12, 3)
            m = codetection(
                rng.random((n, sizes[0])), rng.random((n, sizes[1])), rng.random((n, sizes[2])),
                rng.integers(0, sizes[0], n), rng.integers(0, sizes[1], n), rng.integers(0, sizes[2], n),
                k=int(rng.integers(1, 6)),
            )
            for r in range(3):
                if m.counts[r]:
                    assert m.values[r, r] == 100.0
                    evaluated += 1
        d["rows_checked"] = evaluated


def test_c08_equivalence_recovery():
    with criterion(8, "planted duplicate pair found, no disjoint false pairs") as d:
        runs = [equivalence_recovery(seed) for seed in range(10)]
        found = sum(r.found_planted for r in runs)
        clean = sum(not r.false_disjoint for r in runs)
        d.update(found=f"{found}/10", clean=f"{clean}/10")
        assert found >= 9
        assert clean >= 9


def test_c09_determinism(tmp_path):
    with criterion(9, "pipeline outputs byte-identical across runs") as d:
        a = run_pipeline(tmp_path / "a", seed=11, epochs=5)
        b = run_pipeline(tmp_path / "b", seed=11, epochs=5)
        names = [*PIPELINE_CSVS, "model.anpm"]
        for name in names:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
        for name in ("dataset.anpd", "train.anpd", "test.anpd"):
            assert (a.parent / "data" / name).read_bytes() == (b.parent / "data" / name).read_bytes(), name
        d["files"] = len(names) + 3


def test_c10_format_round_trips(tmp_path):
    with criterion(10, "bit-identical round trips and error categories"):
        rng = np.random.default_rng(10)
        ds_path, ck_path = tmp_path / "d.anpd", tmp_path / "m.anpm"
        for _ in range(1000):
            n_adj, n_noun, n_anp = (int(v) for v in rng.integers(1, 10, 3))
            n = int(rng.integers(0, 20))
            ds = Dataset(
                random_probs(rng, n_adj, n), random_probs(rng, n_noun, n),
                rng.integers(0, n_adj, n), rng.integers(0, n_noun, n), rng.integers(0, n_anp, n),
            )
            write_dataset(ds_path, ds, n_anp)
            back, n_anp_back = read_dataset(ds_path)
            assert n_anp_back == n_anp
            for attr in ("adj_probs", "noun_probs", "adj_labels", "noun_labels", "anp_labels"):
                assert getattr(back, attr).tobytes() == getattr(ds, attr).tobytes(), attr

            net = random_net(rng, n_adj, n_noun, int(rng.integers(1, 17)), n_anp)
            save_checkpoint(net, ck_path)
            loaded = load_checkpoint(ck_path)
            for part in ("hidden", "output"):
                for arr in ("weights", "biases"):
                    x, y = getattr(getattr(net, part), arr), getattr(getattr(loaded, part), arr)
                    assert x.tobytes() == y.tobytes()
            assert loaded.whitener.mean.tobytes() == net.whitener.mean.tobytes()
            assert loaded.whitener.std.tobytes() == net.whitener.std.tobytes()
            assert loaded.n_adj == net.n_adj

        bad = tmp_path / "bad"
        for path, reader in ((ds_path, read_dataset), (ck_path, load_checkpoint)):
            data = path.read_bytes()
            for blob, err in (
                (b"ZZZZ" + data[4:], BadMagicError),
                (data[:4] + (999).to_bytes(2, "little") + data[6:], VersionError),
                (data[: len(data) // 2], TruncatedError),
            ):
                bad.write_bytes(blob)
                with pytest.raises(err):
                    reader(bad)
