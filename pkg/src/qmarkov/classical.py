"""Finite-alphabet double Markovity, used as an oracle for the quantum side."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import FullSupportError, LayoutError, NotMarkovError, StructureError, ValidationError
from .tensor import DensityOperator, SystemLayout

__all__ = [
    "JointPmf",
    "ClassicalLabel",
    "Lemma2Verdict",
    "classical_cmi",
    "embed",
    "lemma1_partition",
    "lemma2_check",
]


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Probabilities indexed like a state's diagonal: last alphabet fastest."""

    alphabets: tuple[tuple[str, int], ...]
    probs: np.ndarray

    def __post_init__(self):
        layout = SystemLayout(self.alphabets)
        object.__setattr__(self, "alphabets", layout.systems)
        p = np.array(self.probs, dtype=float).reshape(layout.dims)
        if np.any(p < 0):
            raise ValidationError("nonnegativity", f"min entry {p.min():.3e}")
        if abs(p.sum() - 1) > 1e-12:
            raise ValidationError("normalization", f"sum = {p.sum():.17g}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def layout(self) -> SystemLayout:
        return SystemLayout(self.alphabets)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.layout.labels

    def marginal(self, labels: Sequence[str]) -> np.ndarray:
        """Marginal with axes in the order given."""
        labels = list(labels)
        idx = [self.layout.index(lab) for lab in labels]
        drop = tuple(i for i in range(len(self.labels)) if i not in idx)
        m = self.probs.sum(axis=drop)
        kept = sorted(idx)
        return np.transpose(m, [kept.index(i) for i in idx])

    def grouped(self, groups: Sequence[Sequence[str]]) -> np.ndarray:
        """Joint array with one flattened axis per label group."""
        flat = [lab for g in groups for lab in g]
        m = self.marginal(flat)
        return m.reshape([self.layout.dim_of(g) for g in groups])


def _groups(pmf: JointPmf, n: int, labels) -> list[tuple[str, ...]]:
    if labels is None:
        if len(pmf.labels) != n:
            raise LayoutError(f"expected {n} alphabets, got {pmf.labels}; pass labels explicitly")
        return [(lab,) for lab in pmf.labels]
    return [(g,) if isinstance(g, str) else tuple(g) for g in labels]


def _as_group(x) -> tuple[str, ...]:
    return (x,) if isinstance(x, str) else tuple(x)


def classical_cmi(pmf: JointPmf, a, c, b=()) -> float:
    """I(a;c|b) in nats: sum p(a,b,c) ln[p(a,b,c) p(b) / (p(a,b) p(b,c))]."""
    a, c, b = _as_group(a), _as_group(c), _as_group(b)
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise LayoutError("label groups must be disjoint")
    p = pmf.grouped([a, b, c])
    p_ab = p.sum(axis=2, keepdims=True)
    p_bc = p.sum(axis=0, keepdims=True)
    p_b = p.sum(axis=(0, 2), keepdims=True)
    pos = p > 0
    num = (p * p_b)[pos]
    den = (p_ab * p_bc)[pos]
    return float(np.sum(p[pos] * (np.log(num) - np.log(den))))


def embed(pmf: JointPmf) -> DensityOperator:
    """Diagonal state with the pmf on its diagonal."""
    return DensityOperator.from_matrix(pmf.layout, np.diag(pmf.probs.ravel()).astype(complex))


@dataclass(frozen=True)
class ClassicalLabel:
    partition_b: tuple[tuple[int, ...], ...]
    partition_c: tuple[tuple[int, ...], ...]
    g1: dict = field(default_factory=dict)
    g2: dict = field(default_factory=dict)
    p_j: tuple[float, ...] = ()
    cmi_given_j: float = 0.0

    @property
    def size(self) -> int:
        return len(self.partition_b)


def _conditionals(joint: np.ndarray) -> dict[int, np.ndarray]:
    """p(A | X = x) for each x with positive mass; ``joint`` has axes (A, X)."""
    px = joint.sum(axis=0)
    return {x: joint[:, x] / px[x] for x in range(joint.shape[1]) if px[x] > 0}


def _tv(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


def lemma1_partition(pmf: JointPmf, eq_tol: float = 1e-10, tol: float = 1e-8, labels=None) -> ClassicalLabel:
    """Common function J = g1(B) = g2(C) making A independent of (B, C) given J."""
    a, b, c = _groups(pmf, 3, labels)
    values = {"A-B-C": classical_cmi(pmf, a, c, b), "A-C-B": classical_cmi(pmf, a, b, c)}
    if max(values.values()) > tol:
        raise NotMarkovError(f"double Markov condition fails: {values}", values)
    p = pmf.grouped([a, b, c])
    cond_b = _conditionals(p.sum(axis=2))
    cond_c = _conditionals(p.sum(axis=1))
    reps: list[np.ndarray] = []

    def assign(dist):
        for j, r in enumerate(reps):
            if _tv(dist, r) <= eq_tol:
                return j
        reps.append(dist)
        return len(reps) - 1

    g1 = {x: assign(d) for x, d in cond_b.items()}
    nb = len(reps)
    g2 = {x: assign(d) for x, d in cond_c.items()}
    if len(reps) != nb:
        raise StructureError("a C-value conditional matches no B-value conditional")
    pbc = p.sum(axis=0)
    for (x, y) in zip(*np.nonzero(pbc > 0)):
        if g1[int(x)] != g2[int(y)]:
            raise StructureError(f"positive pair (b={x}, c={y}) has g1 != g2")
    part_b = tuple(tuple(x for x in sorted(g1) if g1[x] == j) for j in range(nb))
    part_c = tuple(tuple(y for y in sorted(g2) if g2[y] == j) for j in range(nb))
    # I(A; BC | J) with J a function of B
    ext = np.zeros(p.shape + (nb,))
    for x, j in g1.items():
        ext[:, x, :, j] = p[:, x, :]
    ext_pmf = JointPmf((("A", p.shape[0]), ("B", p.shape[1]), ("C", p.shape[2]), ("J", nb)), ext)
    i_j = classical_cmi(ext_pmf, "A", ("B", "C"), "J")
    if i_j > tol:
        raise StructureError(f"I(A;BC|J) = {i_j:.3e} after grouping")
    p_j = tuple(float(ext[..., j].sum()) for j in range(nb))
    return ClassicalLabel(part_b, part_c, g1, g2, p_j, i_j)


@dataclass(frozen=True)
class Lemma2Verdict:
    chain_cmi: dict
    chains_hold: dict
    max_deviation: float
    conclusion_holds: bool

    @property
    def ok(self) -> bool:
        return all(self.chains_hold.values()) and self.conclusion_holds


def lemma2_check(pmf: JointPmf, pos_required: bool = True, tol: float = 1e-8,
                 dev_tol: float = 1e-10, labels=None) -> Lemma2Verdict:
    """Both chains A-(B,D)-C and A-(C,D)-B, then p(a|b,c,d) = p(a|d) on every cell."""
    a, b, c, d = _groups(pmf, 4, labels)
    p = pmf.grouped([a, b, c, d])
    if pos_required and np.any(p <= 0):
        raise FullSupportError(f"{int(np.sum(p <= 0))} zero cells in a pmf required to be positive")
    values = {"A-(B,D)-C": classical_cmi(pmf, a, c, b + d), "A-(C,D)-B": classical_cmi(pmf, a, b, c + d)}
    holds = {k: v <= tol for k, v in values.items()}
    p_bcd = p.sum(axis=0, keepdims=True)
    p_ad = p.sum(axis=(1, 2), keepdims=True)
    p_d = p.sum(axis=(0, 1, 2), keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        lhs = p / p_bcd
        rhs = np.broadcast_to(p_ad / p_d, p.shape)
    mask = np.broadcast_to(p_bcd > 0, p.shape)
    dev = float(np.max(np.abs(lhs - rhs)[mask])) if mask.any() else 0.0
    return Lemma2Verdict(values, holds, dev, dev <= dev_tol)
