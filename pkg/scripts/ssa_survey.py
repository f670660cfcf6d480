"""Distribution of I(A;C|B) over Hilbert-Schmidt random states, by dimensions and rank.

    python3 scripts/ssa_survey.py --samples 200
"""
import argparse
import itertools

import numpy as np

from qmarkov.entropy import cmi
from qmarkov.generate import random_density
from qmarkov.tensor import SystemLayout


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'dims':>8} {'rank':>5} {'min':>10} {'median':>10} {'max':>10}")
    for dims in itertools.product((2, 3), repeat=3):
        layout = SystemLayout(tuple(zip("ABC", dims)))
        n = layout.total_dim
        for rank in (1, 2, n):
            vals = [cmi(random_density(n, rank, rng, layout), "A", "C", "B") for _ in range(args.samples)]
            print(f"{'x'.join(map(str, dims)):>8} {rank:>5} {min(vals):10.2e} {np.median(vals):10.4f} {max(vals):10.4f}")


if __name__ == "__main__":
    main()
