"""Re-run the randomized acceptance criteria at shifted seed offsets.

    python3 scripts/seed_sweep.py --offsets 1000 5000 9000
"""
import argparse

from qmarkov import acceptance

RANDOMIZED = (3, 4, 5, 7, 8, 9)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--offsets", type=int, nargs="+", default=[1000, 5000, 9000])
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    failed = 0
    for offset in args.offsets:
        for n in RANDOMIZED:
            r = getattr(acceptance, f"criterion_{n}")(quick=args.quick, seed=offset)
            failed += not r.passed
            print(f"offset {offset}: {r.line()}")
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
