"""The ten acceptance criteria as runnable checks.

Each ``criterion_N`` returns a :class:`CriterionResult`; ``run_all`` runs them
in order.  ``quick=True`` shrinks the instance counts for smoke runs.
"""
from __future__ import annotations

import contextlib
import io as _io
import tempfile
import time
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import io
from .classical import JointPmf, classical_cmi, embed, lemma1_partition, lemma2_check
from .config import DEFAULT_TOLS
from .double_markov import (theorem1_certify, theorem2_certify, theorem2_converse_check,
                            verify_common_label)
from .entropy import MarkovChainSpec, cmi, von_neumann_entropy
from .errors import FullSupportError, MatchError, NotMarkovError, QMarkovError
from .generate import (gen_double_markov_state, gen_lemma1_pmf, gen_lemma2_pmf, gen_markov_state,
                       gen_negative, gen_nonunique_pair, gen_thm2_state, random_density,
                       random_unitary, sample_spec, NEGATIVE_KINDS)
from .structure import build_state, markov_decompose, match_decompositions, transform_decomposition
from .tensor import SystemLayout, trace_distance

__all__ = ["CriterionResult", "CRITERIA", "run_all"] + [f"criterion_{i}" for i in range(1, 11)]

LN2 = float(np.log(2))


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} [{status}] {self.title}: {self.detail} ({self.seconds:.2f}s)"

    def as_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed, "detail": self.detail}


def _count(n: int, quick: bool) -> int:
    return max(5, n // 10) if quick else n


@lru_cache(maxsize=None)
def markov_instance(seed: int):
    return gen_markov_state(sample_spec("markov", seed))


@lru_cache(maxsize=None)
def double_instance(seed: int):
    return gen_double_markov_state(sample_spec("double", seed))


@lru_cache(maxsize=None)
def thm2_instance(seed: int):
    return gen_thm2_state(sample_spec("thm2", seed))


def _multiset(dec) -> list[tuple[int, int, float]]:
    return sorted((d1, d2, p) for (d1, d2), p in zip(dec.dims, dec.weights))


def _same_blocks(a, b, tol=1e-8) -> bool:
    ma, mb = _multiset(a), _multiset(b)
    return len(ma) == len(mb) and all(x[:2] == y[:2] and abs(x[2] - y[2]) <= tol for x, y in zip(ma, mb))


def _timed(number, title, limit=None):
    def wrap(fn):
        def run(quick=False, seed=0):
            t0 = time.perf_counter()
            try:
                passed, detail = fn(quick, seed)
            except QMarkovError as exc:
                passed, detail = False, f"{type(exc).__name__}: {exc}"
            dt = time.perf_counter() - t0
            if limit is not None and dt >= limit:
                passed, detail = False, f"{detail}; runtime {dt:.1f}s over the {limit}s budget"
            return CriterionResult(number, title, passed, detail, dt)
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


@_timed(1, "strong subadditivity", limit=10)
def criterion_1(quick, seed):
    rng = np.random.default_rng([seed, 1])
    worst = np.inf
    n = _count(200, quick)
    for i in range(n):
        dims = tuple(int(d) for d in rng.integers(2, 4, size=3))
        layout = SystemLayout(tuple(zip("ABC", dims)))
        rho = random_density(layout.total_dim, seed=rng, layout=layout)
        worst = min(worst, cmi(rho, "A", "C", "B"))
    return worst >= -1e-9, f"{n} states, min I(A;C|B) = {worst:.2e}"


def _random_pmf(rng) -> JointPmf:
    dims = tuple(int(d) for d in rng.integers(1, 4, size=3))
    p = rng.random(dims) * (rng.random(dims) > 0.3)
    if p.sum() == 0:
        p.flat[0] = 1.0
    return JointPmf(tuple(zip("ABC", dims)), p / p.sum())


@_timed(2, "entropy oracles")
def criterion_2(quick, seed):
    worst_mixed = worst_pure = 0.0
    rng = np.random.default_rng([seed, 2])
    for d in range(1, 9):
        worst_mixed = max(worst_mixed, abs(von_neumann_entropy(np.eye(d) / d) - np.log(d)))
        pure = random_density(d, rank=1, seed=rng)
        worst_pure = max(worst_pure, abs(von_neumann_entropy(pure)))
    worst_cq = 0.0
    n = _count(100, quick)
    for _ in range(n):
        pmf = _random_pmf(rng)
        rho = embed(pmf)
        for a, c, b in (("A", "C", "B"), ("A", "B", "C"), ("B", "C", ())):
            worst_cq = max(worst_cq, abs(cmi(rho, a, c, b) - classical_cmi(pmf, a, c, b)))
    ok = worst_mixed <= 1e-10 and worst_pure <= 1e-10 and worst_cq <= 1e-10
    return ok, (f"|S(I/d) - ln d| <= {worst_mixed:.1e}, S(pure) <= {worst_pure:.1e}, "
                f"quantum vs classical CMI on {n} pmfs <= {worst_cq:.1e}")


@_timed(3, "HJP round trip", limit=60)
def criterion_3(quick, seed):
    n = _count(100, quick)
    bad, worst = [], 0.0
    chain = MarkovChainSpec("A", "B", "C")
    for s in range(seed, seed + n):
        rho, truth = markov_instance(s)
        dec = markov_decompose(rho, chain, rng_seed=s)
        resid = float(np.linalg.norm(build_state(dec).matrix - rho.matrix))
        worst = max(worst, resid)
        if not _same_blocks(dec, truth) or resid > 1e-7:
            bad.append(s)
    return not bad, f"{n} states, {len(bad)} mismatches {bad[:5]}, max reconstruction {worst:.1e}"


def _align_labels(cert, truth) -> list[int]:
    """Truth label matching each certificate label by the conditional state on A."""
    return [int(np.argmin([trace_distance(r, t) for t in truth.rho_a_given_j])) for r in cert.rho_a_given_j]


@lru_cache(maxsize=None)
def _double_certificate(s: int):
    rho, _ = double_instance(s)
    return theorem1_certify(rho, rng_seed=s)


@_timed(4, "common label, forward direction")
def criterion_4(quick, seed):
    n = _count(100, quick)
    bad, eq2, cmi_j = [], 0.0, 0.0
    for s in range(seed, seed + n):
        rho, truth = double_instance(s)
        cert = _double_certificate(s)
        eq2 = max(eq2, cert.diagnostics["eq2_residual"])
        cmi_j = max(cmi_j, cert.diagnostics["cmi_a_bc_given_j"])
        perm = _align_labels(cert, truth)
        ok = (cert.size == truth.size and sorted(perm) == list(range(truth.size))
              and np.allclose(cert.p_j, truth.p_j[perm], atol=1e-8, rtol=0)
              and all(np.linalg.norm(e - truth.pvm_b[j]) <= 1e-7 for e, j in zip(cert.pvm_b, perm))
              and all(np.linalg.norm(e - truth.pvm_c[j]) <= 1e-7 for e, j in zip(cert.pvm_c, perm)))
        if not ok:
            bad.append(s)
    ok = not bad and eq2 <= 1e-7 and cmi_j <= 1e-8
    return ok, f"{n} states, {len(bad)} label mismatches {bad[:5]}, max residual {eq2:.1e}, max I(A;BC|J) {cmi_j:.1e}"


@_timed(5, "common label, converse")
def criterion_5(quick, seed):
    n = _count(100, quick)
    worst = {"S(J|B)": 0.0, "S(J|C)": 0.0, "I(A;C|B)": 0.0, "I(A;B|C)": 0.0}
    failed = []
    for s in range(seed, seed + n):
        rho, _ = double_instance(s)
        v = verify_common_label(rho, _double_certificate(s))
        for key in worst:
            worst[key] = max(worst[key], abs(v.checks[key][0]))
        if not v.ok:
            failed.append((s, v.failures()))
    ok = not failed and all(x <= 1e-8 for x in worst.values())
    return ok, f"{n} certificates, failures {failed[:3]}, worst " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items())


@_timed(6, "common label, negatives")
def criterion_6(quick, seed):
    one_way = gen_negative("one_way_tripartite")
    i_acb, i_abc = cmi(one_way, "A", "C", "B"), cmi(one_way, "A", "B", "C")
    try:
        theorem1_certify(one_way)
        raised = False
    except NotMarkovError:
        raised = True
    ghz = gen_negative("entangled_not_markov")
    g1, g2 = cmi(ghz, "A", "C", "B"), cmi(ghz, "A", "B", "C")
    ok = (i_acb <= 1e-10 and abs(i_abc - LN2) <= 1e-9 and raised
          and abs(g1 - LN2) <= 1e-9 and abs(g2 - LN2) <= 1e-9)
    return ok, (f"one-way I(A;C|B)={i_acb:.1e}, I(A;B|C)-ln2={i_abc - LN2:.1e}, NotMarkovError={raised}; "
                f"GHZ deviations {g1 - LN2:.1e}, {g2 - LN2:.1e}")


@_timed(7, "D-only certificate", limit=120)
def criterion_7(quick, seed):
    n = _count(50, quick)
    bad, worst_cmi, worst_conv = [], 0.0, 0.0
    for s in range(seed, seed + n):
        rho, truth = thm2_instance(s)
        try:
            cert = theorem2_certify(rho, rng_seed=s)
        except QMarkovError as exc:
            bad.append((s, type(exc).__name__))
            continue
        conv = theorem2_converse_check(rho)
        c = cert.diagnostics["cmi_a_bc_given_d"]
        worst_cmi = max(worst_cmi, c)
        chains = max(conv.checks["I(A;C|BD)"][0], conv.checks["I(A;B|CD)"][0])
        worst_conv = max(worst_conv, chains)
        if not _same_blocks(cert.d_decomposition, truth.d_decomposition) or c > 1e-8 or chains > 1e-8 or not conv.ok:
            bad.append((s, "mismatch"))
    try:
        theorem2_certify(gen_negative("thm2_rank_deficient", seed=seed))
        negative = False
    except FullSupportError:
        negative = True
    ok = not bad and negative
    return ok, (f"{n} states, failures {bad[:3]}, max I(A;BC|D) {worst_cmi:.1e}, "
                f"max chain CMI {worst_conv:.1e}, rank-deficient -> FullSupportError={negative}")


@_timed(8, "uniqueness of minimal decompositions")
def criterion_8(quick, seed):
    n = _count(50, quick)
    chain = MarkovChainSpec("A", "B", "C")
    worst, bad = 0.0, []
    for s in range(seed, seed + n):
        rho, _ = markov_instance(s)
        d1 = markov_decompose(rho, chain, rng_seed=s)
        d2 = markov_decompose(rho, chain, rng_seed=s + 10_000)
        rng = np.random.default_rng([s, 8])
        perm = rng.permutation(len(d1.blocks))
        us = [(random_unitary(d1.blocks[k].d1, rng), random_unitary(d1.blocks[k].d2, rng)) for k in perm]
        d3 = transform_decomposition(d1, perm, us)
        try:
            worst = max(worst, match_decompositions(d1, d2).max_residual,
                        match_decompositions(d1, d3).max_residual)
        except MatchError as exc:
            bad.append((s, str(exc)))
    try:
        _, first, second = gen_nonunique_pair(seed)
        match_decompositions(first, second)
        negative = False
    except MatchError:
        negative = True
    ok = not bad and worst <= 1e-7 and negative
    return ok, f"{n} states, {len(bad)} unmatched, max residual {worst:.1e}, rank-deficient pair -> MatchError={negative}"


def _pvm_partition(pvm) -> set:
    return {frozenset(np.nonzero(np.diag(e).real > 0.5)[0].tolist()) for e in pvm}


@_timed(9, "classical and quantum agree")
def criterion_9(quick, seed):
    n = _count(50, quick)
    disagree2, disagree1 = [], []
    for s in range(seed, seed + n):
        pmf = gen_lemma2_pmf(s)
        classical_ok = lemma2_check(pmf).ok
        try:
            theorem2_certify(embed(pmf), rng_seed=s)
            quantum_ok = True
        except QMarkovError:
            quantum_ok = False
        if not (classical_ok and quantum_ok):
            disagree2.append(s)
    for s in range(seed, seed + n):
        pmf = gen_lemma1_pmf(s)
        lab = lemma1_partition(pmf)
        cert = theorem1_certify(embed(pmf), rng_seed=s)
        if (_pvm_partition(cert.pvm_b) != {frozenset(b) for b in lab.partition_b}
                or _pvm_partition(cert.pvm_c) != {frozenset(c) for c in lab.partition_c}):
            disagree1.append(s)
    ok = not disagree2 and not disagree1
    return ok, f"{n} positive pmfs: {len(disagree2)} disagreements; {n} label pmfs: {len(disagree1)} partition mismatches"


def corpus(quick=False, seed=0):
    """Every state and pmf the criteria generate, as ``(name, object)`` pairs."""
    out = []
    for s in range(seed, seed + _count(100, quick)):
        out.append((f"markov-{s}", markov_instance(s)[0]))
        out.append((f"double-{s}", double_instance(s)[0]))
    for s in range(seed, seed + _count(50, quick)):
        out.append((f"thm2-{s}", thm2_instance(s)[0]))
        out.append((f"lemma1-{s}", gen_lemma1_pmf(s)))
        out.append((f"lemma2-{s}", gen_lemma2_pmf(s)))
    for kind in NEGATIVE_KINDS:
        out.append((kind, gen_negative(kind, seed=seed)))
    return out


def _cli(argv) -> str:
    from .cli import run_command

    with contextlib.redirect_stdout(_io.StringIO()):
        _, report = run_command(list(argv) + ["--quiet"])
    return report.to_json()


@_timed(10, "determinism and file round trips")
def criterion_10(quick, seed):
    items = corpus(quick, seed)
    not_exact = []
    for name, obj in items:
        if isinstance(obj, JointPmf):
            back = io.parse_pmf(io.format_pmf(obj))
            same = np.array_equal(back.probs, obj.probs) and io.format_pmf(back) == io.format_pmf(obj)
        else:
            back = io.parse_state(io.format_state(obj))
            same = np.array_equal(back.matrix, obj.matrix) and io.format_state(back) == io.format_state(obj)
        if not same:
            not_exact.append(name)
    unstable = []
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        runs = []
        for kind in ("markov", "double", "thm2", "lemma2"):
            for s in (seed, seed + 1):
                path = tmp / f"{kind}-{s}.txt"
                first = _cli(["gen", "--kind", kind, "--seed", str(s), "--out", str(path)])
                text = path.read_text()
                if _cli(["gen", "--kind", kind, "--seed", str(s), "--out", str(path)]) != first \
                        or path.read_text() != text:
                    unstable.append(f"gen {kind} {s}")
                runs.append((kind, path, s))
        for kind, path, s in runs:
            argv = {"markov": ["decompose", "--state", str(path), "--chain", "A-B-C"],
                    "double": ["double", "--state", str(path)],
                    "thm2": ["thm2", "--state", str(path)],
                    "lemma2": ["classical", "--pmf", str(path), "--lemma", "2"]}[kind]
            argv += ["--seed", str(s)]
            if _cli(argv) != _cli(argv):
                unstable.append(" ".join(argv[:1]) + f" {kind} {s}")
    ok = not not_exact and not unstable
    return ok, (f"{len(items)} corpus items, {len(not_exact)} inexact round trips; "
                f"{len(unstable)} nondeterministic reports {unstable[:3]}")


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10)


def run_all(quick=False, seed=0) -> list[CriterionResult]:
    return [c(quick=quick, seed=seed) for c in CRITERIA]
