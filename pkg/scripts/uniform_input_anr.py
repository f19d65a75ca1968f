"""ANR when both specialist outputs are uniform, measured on a trained net.

Equal mean contributions give ANR 1 by construction; uniform inputs need
not, since the shares depend on the learned weights. This prints the
distribution over ANP targets.
"""

import argparse

import numpy as np

from anpnet.analysis import anr_of_report
from anpnet.dataio import SynthConfig, stratified_split, synth_generate
from anpnet.fusion import TrainConfig, build_anpnet, train
from anpnet.relevance import Explainer


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-adj", type=int, default=6)
    p.add_argument("--n-noun", type=int, default=8)
    p.add_argument("--epochs", type=int, default=30)
    args = p.parse_args()
    cfg = SynthConfig(args.n_adj, args.n_noun, 100, seed=args.seed, adj_signal=4, noun_signal=4)
    vocab, ds = synth_generate(cfg)
    tr, _ = stratified_split(ds, 0.8, seed=args.seed)
    net = build_anpnet(vocab.n_adj, vocab.n_noun, 1024, vocab.n_anp, seed=args.seed)
    net, _ = train(net, tr, TrainConfig(epochs=args.epochs, seed=args.seed))
    ex = Explainer(net)
    adj, noun = np.full(vocab.n_adj, 1 / vocab.n_adj), np.full(vocab.n_noun, 1 / vocab.n_noun)
    ratios = [anr_of_report(ex.explain(adj, noun, t)) for t in range(vocab.n_anp)]
    ratios = np.array([r for r in ratios if r is not None])
    print(f"{ratios.size}/{vocab.n_anp} targets with defined ANR")
    if ratios.size:
        q = np.percentile(ratios, [0, 25, 50, 75, 100])
        print("ANR min/q1/median/q3/max: " + " ".join(f"{v:.3f}" for v in q))


if __name__ == "__main__":
    main()
