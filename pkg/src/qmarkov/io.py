"""Text formats: QSTATE v1 for density operators and QPMF v1 for joint pmfs.

Floats are written with 18 significant digits, which round-trips every
double exactly.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .classical import JointPmf
from .config import DEFAULT_TOLS
from .errors import LayoutError, ParseError
from .tensor import DensityOperator, Operator, SystemLayout

__all__ = ["format_state", "parse_state", "read_state", "write_state",
           "format_pmf", "parse_pmf", "read_pmf", "write_pmf"]

_FLOAT = "{:.17e}"


def _lines(text: str):
    """Yield ``(line_number, content)`` for non-blank lines, comments stripped."""
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield n, line


def _layout(line: str, n: int, keyword: str) -> SystemLayout:
    head, *items = line.split()
    if head != keyword or not items:
        raise ParseError(f"expected '{keyword} <label>:<dim> ...'", n)
    pairs = []
    for item in items:
        lab, sep, dim = item.rpartition(":")
        if not sep or not lab:
            raise ParseError(f"bad system entry {item!r}", n)
        try:
            pairs.append((lab, int(dim)))
        except ValueError:
            raise ParseError(f"bad dimension in {item!r}", n) from None
    try:
        return SystemLayout(tuple(pairs))
    except LayoutError as exc:
        raise ParseError(str(exc), n) from None


def _header(lines, magic: str, keyword: str, section: str) -> SystemLayout:
    try:
        n, line = next(lines)
        if line != magic:
            raise ParseError(f"expected header '{magic}', got {line!r}", n)
        n, line = next(lines)
        layout = _layout(line, n, keyword)
        n, line = next(lines)
        if line != section:
            raise ParseError(f"expected '{section}', got {line!r}", n)
    except StopIteration:
        raise ParseError("file ends inside the header") from None
    return layout


def format_state(rho: Operator) -> str:
    out = ["qstate v1", "systems " + str(rho.layout), "matrix"]
    for z in np.asarray(rho.matrix).ravel():
        out.append(f"{_FLOAT.format(z.real)} {_FLOAT.format(z.imag)}")
    return "\n".join(out) + "\n"


def parse_state(text: str, tols=DEFAULT_TOLS) -> DensityOperator:
    lines = _lines(text)
    layout = _header(lines, "qstate v1", "systems", "matrix")
    n = layout.total_dim
    entries = np.empty(n * n, dtype=complex)
    count = 0
    for num, line in lines:
        if count == n * n:
            raise ParseError(f"more than {n * n} matrix entries", num)
        parts = line.split()
        if len(parts) != 2:
            raise ParseError("expected '<re> <im>'", num)
        try:
            entries[count] = complex(float(parts[0]), float(parts[1]))
        except ValueError:
            raise ParseError(f"bad number in {line!r}", num) from None
        count += 1
    if count != n * n:
        raise ParseError(f"expected {n * n} matrix entries, found {count}")
    return DensityOperator(layout, entries.reshape(n, n), tols)


def write_state(path, rho: Operator) -> None:
    Path(path).write_text(format_state(rho))


def read_state(path, tols=DEFAULT_TOLS) -> DensityOperator:
    return parse_state(Path(path).read_text(), tols)


def format_pmf(pmf: JointPmf) -> str:
    out = ["qpmf v1", "alphabets " + str(pmf.layout), "probs"]
    out += [_FLOAT.format(p) for p in pmf.probs.ravel()]
    return "\n".join(out) + "\n"


def parse_pmf(text: str) -> JointPmf:
    lines = _lines(text)
    layout = _header(lines, "qpmf v1", "alphabets", "probs")
    n = layout.total_dim
    probs = []
    for num, line in lines:
        if len(probs) == n:
            raise ParseError(f"more than {n} probabilities", num)
        try:
            probs.append(float(line))
        except ValueError:
            raise ParseError(f"bad number {line!r}", num) from None
    if len(probs) != n:
        raise ParseError(f"expected {n} probabilities, found {len(probs)}")
    return JointPmf(layout.systems, np.array(probs))


def write_pmf(path, pmf: JointPmf) -> None:
    Path(path).write_text(format_pmf(pmf))


def read_pmf(path) -> JointPmf:
    return parse_pmf(Path(path).read_text())
