"""Planted duplicate ANP pair: how often do the top-5 concept sets coincide?"""

import argparse

from anpnet.experiments import equivalence_recovery


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=10)
    args = p.parse_args()
    found = clean = 0
    for seed in range(args.seeds):
        run = equivalence_recovery(seed)
        found += run.found_planted
        clean += not run.false_disjoint
        print(f"seed {seed}: pairs {run.pairs} planted {run.planted} false-disjoint {run.false_disjoint}")
    print(f"planted pair found in {found}/{args.seeds}; no disjoint false pair in {clean}/{args.seeds}")


if __name__ == "__main__":
    main()
