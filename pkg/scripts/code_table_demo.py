"""Send a genome through a secret code table and permutation; recover both at a relative."""
import argparse

import numpy as np

from genenet.genome import Alphabet
from genenet.keyexchange import (CodeTable, IndexPermutation, conditional_table, derive_shared_key, encode,
                                 random_candidates, recover_permutation)
from genenet.population import PopulationParams, grow


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--candidates", type=int, default=100)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    pop = grow(PopulationParams(max_size=100, parent_count=10, seed=args.seed, history_every=0), 10_000)
    i, j = rng.choice(pop.size, size=2, replace=False)
    x, y = pop.genomes[i], pop.genomes[j]
    print(f"sender/receiver share {np.count_nonzero(x == y)} of {x.size} elements")

    g, phi = CodeTable.random(26, rng), IndexPermutation.random(x.size, rng)
    bundle = encode(x, g, phi)
    cands = random_candidates(x.size, args.candidates, rng, truth=phi)
    res = recover_permutation(bundle.payload, y, cands, bundle.verification_digest, size=26)
    print("top candidates (index, MI bits):", [(k, round(s, 3)) for k, s in res.ranking[:3]])
    print("verified:", res.verified, "| code table correct:", res.code_table == g)

    al = Alphabet()
    print(conditional_table(bundle.payload, y, phi, 26).to_csv(al))
    if res.verified:
        print("shared key:", derive_shared_key(res.code_table, res.phi).hex())


if __name__ == "__main__":
    main()
