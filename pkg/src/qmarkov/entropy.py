"""Von Neumann entropies and conditional mutual information (in nats)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .config import DEFAULT_TOLS
from .errors import LayoutError
from .tensor import Operator, partial_trace

__all__ = [
    "MarkovChainSpec",
    "MarkovVerdict",
    "von_neumann_entropy",
    "entropy_of",
    "conditional_entropy",
    "cmi",
    "assert_markov",
    "parse_chain",
]


def _labels(x) -> frozenset[str]:
    if isinstance(x, str):
        return frozenset([x])
    return frozenset(x)


@dataclass(frozen=True)
class MarkovChainSpec:
    """The chain ``head - pivot - tail``; each side is a set of labels."""

    head: frozenset
    pivot: frozenset
    tail: frozenset

    def __post_init__(self):
        for name in ("head", "pivot", "tail"):
            object.__setattr__(self, name, _labels(getattr(self, name)))
        if not (self.head and self.pivot and self.tail):
            raise LayoutError("chain sides must be nonempty")
        if self.head & self.pivot or self.head & self.tail or self.pivot & self.tail:
            raise LayoutError("chain sides must be disjoint")

    def __str__(self):
        def side(s):
            s = sorted(s)
            return s[0] if len(s) == 1 else "(" + ",".join(s) + ")"
        return f"{side(self.head)}-{side(self.pivot)}-{side(self.tail)}"


def parse_chain(text: str) -> MarkovChainSpec:
    """Parse ``"A-B-C"`` or ``"A-(B,D)-C"``."""
    parts, depth, cur = [], 0, ""
    for ch in text.strip():
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "-" and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    parts.append(cur)
    if len(parts) != 3 or depth != 0:
        raise LayoutError(f"cannot parse chain {text!r}")
    sides = []
    for p in parts:
        p = p.strip().strip("()")
        sides.append(frozenset(s.strip() for s in p.split(",") if s.strip()))
    return MarkovChainSpec(*sides)


@dataclass(frozen=True)
class MarkovVerdict:
    cmi_value: float
    tolerance: float
    holds: bool


def _spectral_entropy(w: np.ndarray, eig_cutoff: float) -> float:
    w = w[w > eig_cutoff]
    return float(-np.sum(w * np.log(w)))


def von_neumann_entropy(rho, eig_cutoff=DEFAULT_TOLS.eig_cutoff) -> float:
    m = rho.matrix if isinstance(rho, Operator) else np.asarray(rho)
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    return max(_spectral_entropy(w, eig_cutoff), 0.0)


def entropy_of(rho: Operator, labels: Iterable[str], eig_cutoff=DEFAULT_TOLS.eig_cutoff) -> float:
    """Entropy of the marginal on ``labels``; the empty set has entropy 0."""
    labels = list(labels)
    if not labels:
        return 0.0
    return von_neumann_entropy(partial_trace(rho, labels), eig_cutoff)


def _disjoint(*sets):
    seen = set()
    for s in sets:
        if seen & s:
            raise LayoutError(f"label sets overlap: {[sorted(x) for x in sets]}")
        seen |= s


def conditional_entropy(rho, target, given, eig_cutoff=DEFAULT_TOLS.eig_cutoff) -> float:
    target, given = _labels(target), _labels(given)
    _disjoint(target, given)
    return entropy_of(rho, target | given, eig_cutoff) - entropy_of(rho, given, eig_cutoff)


def cmi(rho, a, c, b=(), eig_cutoff=DEFAULT_TOLS.eig_cutoff) -> float:
    """I(a;c|b) = S(ab) + S(bc) - S(b) - S(abc); with empty ``b`` this is I(a;c)."""
    a, c, b = _labels(a), _labels(c), _labels(b)
    if not a or not c:
        raise LayoutError("cmi needs nonempty a and c")
    _disjoint(a, b, c)
    s = lambda labs: entropy_of(rho, labs, eig_cutoff)  # noqa: E731
    return s(a | b) + s(b | c) - s(b) - s(a | b | c)


def assert_markov(rho, spec: MarkovChainSpec, tol=DEFAULT_TOLS.cmi,
                  eig_cutoff=DEFAULT_TOLS.eig_cutoff) -> MarkovVerdict:
    value = cmi(rho, spec.head, spec.tail, spec.pivot, eig_cutoff)
    return MarkovVerdict(value, tol, value <= tol)
