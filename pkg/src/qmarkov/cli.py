"""Command-line front end.

Exit codes: 0 the property holds, 2 it fails on well-formed input, 1 error.
Every run produces a JSON report (stdout, and ``--report`` if given).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .classical import lemma1_partition, lemma2_check
from .config import DEFAULT_TOLS, Tolerances
from .double_markov import (theorem1_certify, theorem2_certify, theorem2_converse_check,
                            verify_common_label)
from .entropy import cmi, parse_chain
from .errors import NotMarkovError, QMarkovError
from .generate import (GenSpec, gen_double_markov_state, gen_lemma1_pmf, gen_lemma2_pmf,
                       gen_markov_state, gen_negative, gen_thm2_state, sample_spec)
from .structure import hjp_decompose, markov_decompose

__all__ = ["Report", "run_command", "main", "build_parser"]

EXIT_OK, EXIT_ERROR, EXIT_FAILS = 0, 1, 2


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)) and not isinstance(x, bool):
        return int(x)
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


@dataclass
class Report:
    command: list
    verdict: str = "error"  # "holds", "fails" or "error"
    exit_code: int = EXIT_ERROR
    diagnostics: dict = field(default_factory=dict)
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    error: dict | None = None

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), sort_keys=True, indent=2)


def _tols(args) -> Tolerances:
    return DEFAULT_TOLS.with_(cmi=args.tol_cmi, recon=args.tol_recon, eig_cutoff=args.eig_cutoff,
                              pos_floor=args.pos_floor, group_tol=args.group_tol)


def _verdict(ok: bool) -> tuple[str, int]:
    return ("holds", EXIT_OK) if ok else ("fails", EXIT_FAILS)


def _cmd_check(args, tols):
    rho = io.read_state(args.state, tols)
    chain = parse_chain(args.chain)
    value = cmi(rho, chain.head, chain.tail, chain.pivot, tols.eig_cutoff)
    return value <= tols.cmi, {"chain": str(chain), "cmi": value}


def _cmd_decompose(args, tols):
    rho = io.read_state(args.state, tols)
    if args.chain:
        dec = markov_decompose(rho, parse_chain(args.chain), tols, args.seed)
    else:
        dec = hjp_decompose(rho, args.x.split(","), tols, args.seed)
    diag = {"x": dec.x_labels, "y": dec.y_labels, "tail": dec.tail_labels,
            "blocks": dec.summary(), "residual": dec.residual}
    if args.out:
        Path(args.out).write_text(json.dumps(_jsonable(diag), sort_keys=True, indent=2) + "\n")
    return True, diag


def _cmd_double(args, tols):
    rho = io.read_state(args.state, tols)
    cert = theorem1_certify(rho, tols, args.seed)
    verdict = verify_common_label(rho, cert, tols)
    diag = {"labels": cert.size, "p_j": cert.p_j, "pvm_b_ranks": [round(np.trace(e).real) for e in cert.pvm_b],
            "pvm_c_ranks": [round(np.trace(e).real) for e in cert.pvm_c],
            "certificate": cert.diagnostics, "verify": {k: v for k, (v, _) in verdict.checks.items()},
            "verify_failures": verdict.failures()}
    return verdict.ok, diag


def _cmd_thm2(args, tols):
    rho = io.read_state(args.state, tols)
    cert = theorem2_certify(rho, tols, args.seed)
    conv = theorem2_converse_check(rho, tols)
    diag = {"d_blocks": cert.d_decomposition.summary(), "block_map": cert.block_map,
            "certificate": cert.diagnostics, "converse": {k: v for k, (v, _) in conv.checks.items()},
            "converse_failures": conv.failures()}
    return conv.ok, diag


def _parse_blocks(text: str):
    return tuple(tuple(int(v) for v in item.split("x")) for item in text.split(","))


def _parse_dims(text: str) -> dict:
    return {k: int(v) for k, v in (item.split("=") for item in text.split(","))}


def _cmd_gen(args, tols):
    if not args.out:
        raise QMarkovError("gen needs --out")
    kind = args.kind
    truth: dict = {"kind": kind, "seed": args.seed}
    if kind in ("lemma1", "lemma2"):
        pmf = (gen_lemma1_pmf if kind == "lemma1" else gen_lemma2_pmf)(args.seed)
        io.write_pmf(args.out, pmf)
        truth["alphabets"] = pmf.alphabets
    elif kind.startswith("negative:"):
        rho = gen_negative(kind.split(":", 1)[1], seed=args.seed)
        io.write_state(args.out, rho)
        truth["systems"] = str(rho.layout)
    else:
        spec_kind = {"markov": "markov", "double": "double", "thm2": "thm2"}.get(kind)
        if spec_kind is None:
            raise QMarkovError(f"unknown kind {kind!r}")
        spec = sample_spec(spec_kind, args.seed)
        if args.blocks or args.dims:
            spec = GenSpec(_parse_dims(args.dims) if args.dims else spec.dims,
                           _parse_blocks(args.blocks) if args.blocks else spec.blocks, seed=args.seed)
        gen = {"markov": gen_markov_state, "double": gen_double_markov_state, "thm2": gen_thm2_state}[kind]
        rho, gt = gen(spec, tols)
        io.write_state(args.out, rho)
        truth.update(systems=str(rho.layout), blocks=spec.blocks)
        if kind == "double":
            truth.update(labels=gt.size, p_j=gt.p_j)
        else:
            dec = gt if kind == "markov" else gt.d_decomposition
            truth.update(weights=dec.weights, x=dec.x_labels, y=dec.y_labels, tail=dec.tail_labels)
    Path(str(args.out) + ".truth.json").write_text(json.dumps(_jsonable(truth), sort_keys=True, indent=2) + "\n")
    return True, {"out": str(args.out), "truth": truth}


def _cmd_classical(args, tols):
    pmf = io.read_pmf(args.pmf)
    if args.lemma == 1:
        lab = lemma1_partition(pmf, tol=tols.cmi)
        return True, {"labels": lab.size, "partition_b": lab.partition_b,
                      "partition_c": lab.partition_c, "p_j": lab.p_j, "cmi_given_j": lab.cmi_given_j}
    v = lemma2_check(pmf, pos_required=not args.allow_zeros, tol=tols.cmi)
    return v.ok, {"chain_cmi": v.chain_cmi, "chains_hold": v.chains_hold,
                  "max_deviation": v.max_deviation, "conclusion_holds": v.conclusion_holds}


def _cmd_selftest(args, tols):
    from .acceptance import run_all

    results = run_all(quick=args.quick, seed=args.seed)
    return all(r.passed for r in results), {"criteria": [r.as_dict() for r in results]}


_COMMANDS = {"check": _cmd_check, "decompose": _cmd_decompose, "double": _cmd_double,
             "thm2": _cmd_thm2, "gen": _cmd_gen, "classical": _cmd_classical, "selftest": _cmd_selftest}


def _default_seed() -> int:
    try:
        return int(os.environ.get("QMARKOV_SEED", "0"))
    except ValueError:
        return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-cmi", type=float, default=DEFAULT_TOLS.cmi)
    common.add_argument("--tol-recon", type=float, default=DEFAULT_TOLS.recon)
    common.add_argument("--eig-cutoff", type=float, default=DEFAULT_TOLS.eig_cutoff)
    common.add_argument("--pos-floor", type=float, default=DEFAULT_TOLS.pos_floor)
    common.add_argument("--group-tol", type=float, default=DEFAULT_TOLS.group_tol)
    common.add_argument("--seed", type=int, default=_default_seed())
    common.add_argument("--out", help="output file")
    common.add_argument("--report", help="also write the JSON report here")
    common.add_argument("--quiet", action="store_true", help="do not print the report")

    parser = argparse.ArgumentParser(prog="qmarkov", description="Quantum Markov chain structure tools.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check", parents=[common], help="CMI of a chain such as A-B-C or A-(B,D)-C")
    p.add_argument("--state", required=True)
    p.add_argument("--chain", required=True)
    p = sub.add_parser("decompose", parents=[common], help="block decomposition of a state")
    p.add_argument("--state", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--x", help="comma-separated X labels (remaining systems form Y)")
    g.add_argument("--chain", help="Markov chain whose pivot is decomposed")
    for name, helptext in (("double", "common-label certificate for A-B-C and A-C-B"),
                           ("thm2", "D-only certificate for A-(B,D)-C and A-(C,D)-B")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--state", required=True)
    p = sub.add_parser("gen", parents=[common], help="write a generated instance and its truth sidecar")
    p.add_argument("--kind", required=True,
                   help="markov, double, thm2, lemma1, lemma2 or negative:<kind>")
    p.add_argument("--blocks", help="block dims such as 1x2,2x1")
    p.add_argument("--dims", help="system dims such as A=2,C=2")
    p = sub.add_parser("classical", parents=[common], help="classical double-Markov checks on a pmf file")
    p.add_argument("--pmf", required=True)
    p.add_argument("--lemma", type=int, choices=(1, 2), required=True)
    p.add_argument("--allow-zeros", action="store_true", help="lemma 2 without the positivity requirement")
    p = sub.add_parser("selftest", parents=[common], help="run the acceptance criteria")
    p.add_argument("--quick", action="store_true", help="smaller instance counts")
    return parser


def run_command(argv) -> tuple[int, Report]:
    argv = list(argv)
    report = Report(command=argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        report.error = {"type": "UsageError", "message": f"argument parsing exited with {exc.code}"}
        return EXIT_ERROR, report
    tols = _tols(args)
    report.seed = args.seed
    report.tolerances = asdict(tols)
    try:
        ok, diag = _COMMANDS[args.command](args, tols)
        report.verdict, report.exit_code = _verdict(ok)
        report.diagnostics = diag
    except NotMarkovError as exc:
        # a well-formed state that lacks the Markov premise
        report.verdict, report.exit_code = "fails", EXIT_FAILS
        report.diagnostics = {"cmi": exc.cmi_values}
        report.error = {"type": type(exc).__name__, "message": str(exc)}
    except (QMarkovError, OSError) as exc:
        report.verdict, report.exit_code = "error", EXIT_ERROR
        report.error = {"type": type(exc).__name__, "message": str(exc)}
        for attr in ("residual", "diagnostics", "invariant", "line"):
            if getattr(exc, attr, None) is not None:
                report.diagnostics[attr] = getattr(exc, attr)
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n")
    if not args.quiet:
        print(report.to_json())
    return report.exit_code, report


def main(argv=None) -> int:
    code, _ = run_command(sys.argv[1:] if argv is None else argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
