"""Mean pairwise match over time for two pools with the same number of parents.

Clocks are rescaled to births per node so that the 100- and 1000-node runs
share one time axis; the memory-factor curve is exported alongside.
"""
import argparse
import csv
from pathlib import Path

from genenet.population import PopulationParams, bootstrap
from genenet.stats import overlay_memory_factor, per_capita_time


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/time_evolution")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--per-capita", type=int, default=50)
    ap.add_argument("--points", type=int, default=50)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for size in (100, 1000):
        params = PopulationParams(max_size=size, parent_count=100, seed=args.seed, history_every=0)
        births = args.per_capita * size
        traj = bootstrap(params).run(births, snapshot_every=max(births // args.points, 1))
        scale = traj.points[-1].mean_match
        overlay = dict(overlay_memory_factor(traj, params.genome.p_mutate, scale, normalizer=params.parent_count))
        with open(out / f"N{size}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["clock", "per_capita", "mean_match", "min_match", "max_match", "memory_factor"])
            for p, t in zip(traj.points, per_capita_time(traj.clocks, size)):
                w.writerow([p.clock, t, round(p.mean_match, 3), p.min_match, p.max_match, round(overlay[p.clock], 3)])
        print(f"N={size}: mean match {traj.points[0].mean_match:.1f} -> {traj.points[-1].mean_match:.1f}")


if __name__ == "__main__":
    main()
