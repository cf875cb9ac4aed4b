"""Search-space sizes N_k and the relative/non-relative work ratio for guessing n gene elements."""
import argparse
from fractions import Fraction

from genenet.challenge import PosteriorModel, agreement_region, prefix_count, search_space_size, work_ratio
from genenet.genome import binomial_pmf


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--p-rel", type=Fraction, default=Fraction(1, 3))
    args = ap.parse_args()

    model = PosteriorModel(args.p_rel, 26)
    count, mass = agreement_region(2, model)
    print(f"two elements: {count} tuples share a value with the own pair, mass {float(mass):.4f}; "
          f"half the mass needs {prefix_count(2, model, Fraction(1, 2))} guesses")
    print(f"\n{'k':>3} {'N_k':>22} {'f(k; p_rel)':>12} {'f(k; 1/26)':>12}")
    for k in range(args.n + 1):
        print(f"{k:>3} {search_space_size(args.n, k, 26):>22} {binomial_pmf(k, args.n, float(args.p_rel)):>12.5f} "
              f"{binomial_pmf(k, args.n, 1 / 26):>12.5f}")
    for size in (26, 1024):
        wr = work_ratio(args.n, PosteriorModel(args.p_rel, size), Fraction(1, 2))
        print(f"\nI={size}: uniform {wr.uniform_count} vs relative {wr.relative_count} guesses, "
              f"ratio {float(wr.ratio):.4g}")


if __name__ == "__main__":
    main()
