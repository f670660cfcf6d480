"""Dense operators on labelled tensor-product spaces.

Composite basis indices follow the row-major convention: the last listed
subsystem varies fastest, so ``i = sum_s i_s * stride_s`` with
``stride_s = prod(dims[s+1:])``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence

import numpy as np

from .config import DEFAULT_TOLS
from .errors import LayoutError, NumericError, ValidationError

__all__ = [
    "SystemLayout",
    "Operator",
    "DensityOperator",
    "Spectrum",
    "kron",
    "partial_trace",
    "permute",
    "hermitian_eig",
    "support_projector",
    "frob_dist",
    "trace_distance",
    "identity",
]


@dataclass(frozen=True)
class SystemLayout:
    """Ordered ``(label, dim)`` pairs."""

    systems: tuple[tuple[str, int], ...]

    def __post_init__(self):
        systems = tuple((str(lab), int(dim)) for lab, dim in self.systems)
        object.__setattr__(self, "systems", systems)
        labels = [lab for lab, _ in systems]
        if any(not lab for lab in labels):
            raise LayoutError("system labels must be nonempty")
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate labels in {labels}")
        if any(dim < 1 for _, dim in systems):
            raise LayoutError(f"dimensions must be positive: {systems}")

    @classmethod
    def of(cls, *pairs, **dims) -> "SystemLayout":
        """``SystemLayout.of(("A", 2), ("B", 3))`` or ``SystemLayout.of(A=2, B=3)``."""
        return cls(tuple(pairs) + tuple(dims.items()))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.systems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.systems)

    @property
    def total_dim(self) -> int:
        return prod(self.dims)

    @property
    def strides(self) -> tuple[int, ...]:
        dims = self.dims
        return tuple(prod(dims[i + 1:]) for i in range(len(dims)))

    def dim_of(self, labels: Iterable[str]) -> int:
        lookup = dict(self.systems)
        return prod(lookup[lab] for lab in self._check(labels))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown label {label!r}; layout has {self.labels}") from None

    def sub(self, labels: Iterable[str]) -> "SystemLayout":
        """Sub-layout with ``labels`` kept in this layout's order."""
        keep = set(self._check(labels))
        return SystemLayout(tuple(s for s in self.systems if s[0] in keep))

    def ordered(self, labels: Iterable[str]) -> tuple[str, ...]:
        keep = set(self._check(labels))
        return tuple(lab for lab in self.labels if lab in keep)

    def _check(self, labels):
        labels = tuple(labels)
        for lab in labels:
            self.index(lab)
        if len(set(labels)) != len(labels):
            raise LayoutError(f"repeated labels {labels}")
        return labels

    def __add__(self, other: "SystemLayout") -> "SystemLayout":
        return SystemLayout(self.systems + other.systems)

    def __str__(self):
        return " ".join(f"{lab}:{dim}" for lab, dim in self.systems)


def _frozen(matrix) -> np.ndarray:
    arr = np.array(matrix, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Operator:
    layout: SystemLayout
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not isinstance(self.layout, SystemLayout):
            object.__setattr__(self, "layout", SystemLayout(tuple(self.layout)))
        mat = _frozen(self.matrix)
        n = self.layout.total_dim
        if mat.shape != (n, n):
            raise LayoutError(f"matrix shape {mat.shape} does not match layout dim {n}")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def dagger(self) -> "Operator":
        return Operator(self.layout, self.matrix.conj().T)

    def relabel(self, mapping: dict[str, str]) -> "Operator":
        layout = SystemLayout(tuple((mapping.get(lab, lab), d) for lab, d in self.layout.systems))
        return Operator(layout, self.matrix)


class DensityOperator(Operator):
    """Hermitian, positive semidefinite, unit-trace operator.

    Construction validates the invariants and raises
    :class:`ValidationError` naming the one that failed.
    """

    def __init__(self, layout, matrix, tols=DEFAULT_TOLS):
        super().__init__(layout, matrix)
        m = self.matrix
        herm = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
        if herm > tols.hermiticity:
            raise ValidationError("hermiticity", f"max |M - M^dagger| = {herm:.3e}")
        tr = np.trace(m)
        if abs(tr - 1) > tols.trace:
            raise ValidationError("trace", f"trace = {tr.real:.17g}")
        lmin = float(np.linalg.eigvalsh(m)[0])
        if lmin < -tols.psd_slack:
            raise ValidationError("positivity", f"min eigenvalue = {lmin:.3e}")

    @classmethod
    def from_matrix(cls, layout, matrix, tols=DEFAULT_TOLS) -> "DensityOperator":
        """Symmetrise and renormalise a numerically computed state."""
        m = np.asarray(matrix, dtype=complex)
        m = 0.5 * (m + m.conj().T)
        return cls(layout, m / np.trace(m).real, tols)

    @classmethod
    def of(cls, op: Operator, tols=DEFAULT_TOLS) -> "DensityOperator":
        if isinstance(op, DensityOperator):
            return op
        return cls(op.layout, op.matrix, tols)

    def relabel(self, mapping):
        op = super().relabel(mapping)
        return DensityOperator(op.layout, op.matrix)


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def identity(layout: SystemLayout) -> Operator:
    return Operator(layout, np.eye(layout.total_dim))


def kron(parts: Sequence[Operator]) -> Operator:
    if not parts:
        raise LayoutError("kron needs at least one operator")
    layout = parts[0].layout
    mat = parts[0].matrix
    for op in parts[1:]:
        layout = layout + op.layout
        mat = np.kron(mat, op.matrix)
    return Operator(layout, mat)


def _as_tensor(op: Operator) -> np.ndarray:
    dims = op.layout.dims
    return np.asarray(op.matrix).reshape(dims + dims)


def partial_trace(rho: Operator, keep: Iterable[str]) -> Operator:
    """Trace out every system not in ``keep``; kept systems stay in layout order."""
    layout = rho.layout
    keep = layout.ordered(keep)
    if not keep:
        raise LayoutError("partial_trace needs at least one kept label")
    if len(keep) == len(layout.labels):
        return rho
    n = len(layout.labels)
    kept_idx = [layout.index(lab) for lab in keep]
    row = list(range(n))
    col = [i + n if i in kept_idx else i for i in range(n)]
    out = kept_idx + [i + n for i in kept_idx]
    t = np.einsum(_as_tensor(rho), row + col, out)
    sub = layout.sub(keep)
    d = sub.total_dim
    mat = t.reshape(d, d)
    if isinstance(rho, DensityOperator):
        return DensityOperator.from_matrix(sub, mat)
    return Operator(sub, mat)


def permute(op: Operator, order: Sequence[str]) -> Operator:
    """Reorder the subsystems of ``op`` to ``order`` (a permutation of its labels)."""
    layout = op.layout
    if sorted(order) != sorted(layout.labels):
        raise LayoutError(f"{order} is not a permutation of {layout.labels}")
    order = tuple(order)
    if order == layout.labels:
        return op
    perm = [layout.index(lab) for lab in order]
    n = len(perm)
    t = _as_tensor(op).transpose(perm + [p + n for p in perm])
    new = SystemLayout(tuple((lab, layout.systems[layout.index(lab)][1]) for lab in order))
    mat = t.reshape(new.total_dim, new.total_dim)
    if isinstance(op, DensityOperator):
        return DensityOperator(new, mat)
    return Operator(new, mat)


def _matrix(op) -> np.ndarray:
    return op.matrix if isinstance(op, Operator) else np.asarray(op)


def hermitian_eig(op, hermiticity_tol=DEFAULT_TOLS.hermiticity) -> Spectrum:
    """Eigen-decomposition with eigenvalues in descending order."""
    m = _matrix(op)
    if m.size and np.max(np.abs(m - m.conj().T)) > hermiticity_tol:
        raise NumericError("hermitian_eig called on a non-Hermitian matrix")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return Spectrum(w[::-1].copy(), v[:, ::-1].copy())


def support_isometry(m: np.ndarray, eig_cutoff=DEFAULT_TOLS.eig_cutoff) -> np.ndarray:
    """Orthonormal columns spanning the eigenvectors with eigenvalue > cutoff."""
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return v[:, w > eig_cutoff][:, ::-1]


def support_projector(rho, eig_cutoff=DEFAULT_TOLS.eig_cutoff) -> Operator | np.ndarray:
    m = _matrix(rho)
    s = support_isometry(m, eig_cutoff)
    proj = s @ s.conj().T
    if isinstance(rho, Operator):
        return Operator(rho.layout, proj)
    return proj


def frob_dist(a, b) -> float:
    ma, mb = _matrix(a), _matrix(b)
    if ma.shape != mb.shape:
        raise LayoutError(f"dimension mismatch {ma.shape} vs {mb.shape}")
    return float(np.linalg.norm(ma - mb))


def trace_distance(a, b) -> float:
    diff = _matrix(a) - _matrix(b)
    w = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return 0.5 * float(np.sum(np.abs(w)))
