"""Pairwise-match histograms for a random set and evolved pools of several shapes.

Writes one CSV per configuration plus the binomial reference curves, then
prints the mean match of each.
"""
import argparse
from pathlib import Path

import numpy as np

from genenet.genome import GenomeParams, random_genome
from genenet.population import PopulationParams, grow
from genenet.stats import binomial_reference, pairwise_match_distribution, reference_csv

CONFIGS = [(100, 100), (100, 10), (1000, 100)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/histograms")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--per-capita", type=int, default=100, help="births per node before measuring")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(args.seed)
    gp = GenomeParams()
    fresh = np.stack([random_genome(gp, rng).elements for _ in range(100)])
    hists = {"random": pairwise_match_distribution(fresh, params_tag="random")}
    for size, parents in CONFIGS:
        params = PopulationParams(max_size=size, parent_count=parents, seed=args.seed, history_every=0)
        pop = grow(params, args.per_capita * size)
        tag = f"N{size}_parents{parents}"
        hists[tag] = pairwise_match_distribution(pop, params_tag=tag)

    for tag, h in hists.items():
        (out / f"{tag}.csv").write_text(h.to_csv({"seed": args.seed, "per_capita": args.per_capita}))
        print(f"{tag:>20}: mean match {h.mean():7.1f} over {h.n_pairs} pairs")
    curves = {label: binomial_reference(gp.n, p) for label, p in (("1/26", 1 / 26), ("1/3", 1 / 3), ("1/2", 0.5))}
    (out / "binomial_reference.csv").write_text(reference_csv(curves))


if __name__ == "__main__":
    main()
