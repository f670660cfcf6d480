"""Generate a corpus of instances and check the CLI exit-code contract on each.

    python3 scripts/run_corpus.py --out corpus/ --count 20 --workers 4

Positive instances must exit 0; one-way and GHZ states exit 2 from
``double``; the rank-deficient four-party state exits 1 from ``thm2``.
"""
import argparse
import contextlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from qmarkov.cli import run_command
from qmarkov.generate import NEGATIVE_KINDS

CHECKS = {"markov": (["decompose", "--chain", "A-B-C"], "--state", 0),
          "double": (["double"], "--state", 0),
          "thm2": (["thm2"], "--state", 0),
          "lemma1": (["classical", "--lemma", "1"], "--pmf", 0),
          "lemma2": (["classical", "--lemma", "2"], "--pmf", 0)}
NEGATIVE_CHECKS = {"one_way_tripartite": ("double", 2), "entangled_not_markov": ("double", 2),
                   "thm2_rank_deficient": ("thm2", 1)}


def quiet(argv):
    with contextlib.redirect_stdout(io.StringIO()):
        return run_command(argv + ["--quiet"])[1]


def job(item):
    name, kind, seed, path, command, expected = item
    gen = quiet(["gen", "--kind", kind, "--seed", str(seed), "--out", str(path)])
    if gen.exit_code != 0:
        return name, expected, gen.exit_code, gen.error
    rep = quiet(command + ["--seed", str(seed)])
    return name, expected, rep.exit_code, rep.error


def plan(out: Path, count: int):
    items = []
    for kind, (command, flag, expected) in CHECKS.items():
        for seed in range(count):
            path = out / f"{kind}-{seed:03d}.{'qpmf' if kind.startswith('lemma') else 'qstate'}"
            items.append((path.stem, kind, seed, path, command + [flag, str(path)], expected))
    for neg in NEGATIVE_KINDS:
        command, expected = NEGATIVE_CHECKS[neg]
        path = out / f"{neg}.qstate"
        items.append((neg, f"negative:{neg}", 0, path, [command, "--state", str(path)], expected))
    return items


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("corpus"))
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    items = plan(args.out, args.count)
    with ProcessPoolExecutor(args.workers) as pool:
        results = list(pool.map(job, items))  # map keeps input order
    bad = [r for r in results if r[1] != r[2]]
    for name, expected, got, err in bad:
        print(f"{name}: expected exit {expected}, got {got} {json.dumps(err)}")
    print(f"{len(results)} instances, {len(bad)} exit-code violations")
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
