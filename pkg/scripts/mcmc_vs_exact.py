"""Total variation between MCMC period histograms and the exact sector law, as a function of steps.

    python3 scripts/mcmc_vs_exact.py --N 6 --steps 1e4 1e5 1e6 --seed 7
"""
import argparse
import sys

from flatdimers.graph import build_graph
from flatdimers.height import sector_distribution
from flatdimers.kasteleyn import build_K
from flatdimers.sampler import McmcConfig, sample_histogram


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--N", type=int, default=6)
    p.add_argument("--steps", type=float, nargs="+", default=[1e4, 1e5, 1e6])
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--loop-prob", type=float, default=0.2)
    args = p.parse_args()
    g = build_graph("hex-torus", args.N)
    K = build_K(g)
    exact = sector_distribution(K).as_dict()
    print("steps,total_variation,sectors_seen,sectors_exact")
    for s in args.steps:
        s = int(s)
        cfg = McmcConfig(steps=s, burn_in=min(10_000, s // 10), seed=args.seed, loop_prob=args.loop_prob)
        h = sample_histogram(g, cfg, K.alpha_G)
        print(f"{s},{h.total_variation(exact):.6f},{len(h.counts)},{len(exact)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
