"""Side-by-side behaviour of the two partition priors, no data involved.

Draws complete partitions from the Dirichlet-process prior and from the
uniform prior at the same n and b, then compares the cluster-count and
cluster-size statistics.  The expected contrast: the uniform prior
spreads items over more moderate-size clusters, while the
Dirichlet-process prior concentrates mass into fewer, larger ones with a
mean cluster count near b * H(n) (the harmonic number) at b = 1.
"""

import argparse
import math

import numpy as np

from motifclust import Hyperparameters, PriorKind
from motifclust.priorsim import PriorSimConfig, run_prior_sim


def harmonic(n: int) -> float:
    return sum(1.0 / k for k in range(1, n + 1))


def summarize(kind: PriorKind, n: int, b: float, reps: int, seed: int):
    hyper = Hyperparameters(b=b, prior_kind=kind)
    stream = 0 if kind is PriorKind.DP else 1
    rng = np.random.default_rng(np.random.SeedSequence([seed, stream]))
    return run_prior_sim(PriorSimConfig(n=n, replicates=reps, hyper=hyper), rng)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=106)
    ap.add_argument("--b", type=float, default=1.0)
    ap.add_argument("--replicates", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    stats = {
        kind: summarize(kind, args.n, args.b, args.replicates, args.seed)
        for kind in (PriorKind.DP, PriorKind.UNIFORM)
    }
    print(f"n={args.n}  b={args.b}  replicates={args.replicates}\n")
    header = f"{'statistic':38s} {'dp':>10s} {'uniform':>10s}"
    print(header)
    print("-" * len(header))
    rows = [
        ("mean cluster count", lambda s: f"{s.mean_cluster_count:.3f}"),
        ("median multi-member clusters", lambda s: f"{s.median_multi_member_count:.1f}"),
        ("largest cluster ever seen", lambda s: f"{s.max_cluster_size:d}"),
    ]
    for label, fmt in rows:
        dp, uni = fmt(stats[PriorKind.DP]), fmt(stats[PriorKind.UNIFORM])
        print(f"{label:38s} {dp:>10s} {uni:>10s}")
    if args.b == 1.0:
        print(
            f"\nharmonic-number reference for the dp mean at b=1: "
            f"H({args.n}) = {harmonic(args.n):.3f}"
        )


if __name__ == "__main__":
    main()
