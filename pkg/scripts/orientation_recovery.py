"""Planted adjective/noun orientation: train on a 5x4 grid and report ANR per ANP."""

import argparse

from anpnet.experiments import orientation_recovery


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples-per-anp", type=int, default=500)
    p.add_argument("--strong", type=float, default=4.0)
    p.add_argument("--weak", type=float, default=1.0)
    args = p.parse_args()
    res = orientation_recovery(args.seed, args.samples_per_anp, args.strong, args.weak)
    for anp in sorted(res.anr):
        kind = "adj" if anp in res.adjective_informative else "noun"
        print(f"ANP {anp:2d} planted {kind:4s} ANR {res.anr[anp]:.3f}")
    print(f"adjective-informative with ANR > 1: {100 * res.adj_recovered:.0f}%")
    print(f"noun-informative with ANR < 1:      {100 * res.noun_recovered:.0f}%")


if __name__ == "__main__":
    main()
