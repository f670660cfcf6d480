"""Block decompositions of bipartite states and quantum Markov states.

For a state on X (x) Y the minimal decomposition is

    H_Y = sum_k H_{Y1|k} (x) H_{Y2|k},   rho_XY = sum_k p_k rho_{X,Y1|k} (x) rho_{Y2|k},

computed on supp(rho_Y).  The Y1 factors carry all correlation with X; the
Y2 factors are uncorrelated with it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .algebra import wedderburn
from .config import DEFAULT_TOLS
from .entropy import MarkovChainSpec, assert_markov
from .errors import LayoutError, MatchError, NotMarkovError, StructureError
from .tensor import DensityOperator, Operator, SystemLayout, partial_trace, permute, support_isometry

__all__ = [
    "HjpBlock",
    "HjpDecomposition",
    "DecompositionMatch",
    "MinimalityVerdict",
    "hermitian_basis",
    "conditional_generators",
    "modular_components",
    "hjp_decompose",
    "decompose_with_isometries",
    "build_state",
    "markov_decompose",
    "is_minimal",
    "local_unitary_equivalence",
    "match_decompositions",
    "transform_decomposition",
]

# log-eigenvalue differences closer than this are treated as one modular frequency
FREQ_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class HjpBlock:
    isometry: np.ndarray  # (dim Y, d1*d2), columns indexed by (i, b) with b fastest
    d1: int
    d2: int
    weight: float
    factor_xy1: DensityOperator  # on X..., Y1
    factor_y2: DensityOperator  # on Y2, tail...

    @property
    def projector(self) -> np.ndarray:
        return self.isometry @ self.isometry.conj().T

    def block_operator(self) -> np.ndarray:
        """p * factor_xy1 (x) factor_y2 in block coordinates (X, Y1, Y2, tail)."""
        return self.weight * np.kron(self.factor_xy1.matrix, self.factor_y2.matrix)


@dataclass(frozen=True, eq=False)
class HjpDecomposition:
    source_layout: SystemLayout
    x_labels: tuple[str, ...]
    y_labels: tuple[str, ...]
    blocks: tuple[HjpBlock, ...]
    support: np.ndarray  # projector onto supp(rho_Y)
    tail_labels: tuple[str, ...] = ()
    residual: float = 0.0

    @property
    def dims(self) -> list[tuple[int, int]]:
        return [(b.d1, b.d2) for b in self.blocks]

    @property
    def weights(self) -> np.ndarray:
        return np.array([b.weight for b in self.blocks])

    @property
    def y1_label(self) -> str:
        return "".join(self.y_labels) + "_1"

    @property
    def y2_label(self) -> str:
        return "".join(self.y_labels) + "_2"

    @property
    def x_layout(self) -> SystemLayout:
        return self.source_layout.sub(self.x_labels)

    @property
    def y_layout(self) -> SystemLayout:
        return self.source_layout.sub(self.y_labels)

    @property
    def tail_layout(self) -> SystemLayout:
        return self.source_layout.sub(self.tail_labels)

    def summary(self) -> list[dict]:
        return [{"d1": b.d1, "d2": b.d2, "weight": b.weight} for b in self.blocks]


@dataclass(frozen=True, eq=False)
class DecompositionMatch:
    phi: tuple[int, ...]
    unitaries: tuple[tuple[np.ndarray, np.ndarray], ...]
    max_residual: float


@dataclass(frozen=True)
class MinimalityVerdict:
    minimal: bool
    condition: str | None = None  # "i" or "ii"
    witness: tuple = ()
    detail: str = ""


def hermitian_basis(n: int) -> list[np.ndarray]:
    """Hilbert-Schmidt orthonormal Hermitian basis of M_n; the first element is E_00."""
    out = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1
        out.append(e)
    s = 1 / np.sqrt(2)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = e[j, i] = s
            out.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[i, j], e[j, i] = -1j * s, 1j * s
            out.append(e)
    return out


def _split_xy(rho: Operator, x_labels) -> tuple[Operator, tuple, tuple]:
    layout = rho.layout
    x = layout.ordered(x_labels)
    y = tuple(lab for lab in layout.labels if lab not in x)
    if not x or not y:
        raise LayoutError(f"x_labels {x_labels} must be a proper nonempty subset of {layout.labels}")
    return permute(rho, x + y), x, y


def _pinv_sqrt(m: np.ndarray, eig_cutoff: float) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    keep = w > eig_cutoff
    return (v[:, keep] / np.sqrt(w[keep])) @ v[:, keep].conj().T


def _slices(mat: np.ndarray, dx: int, dy: int, fs: Sequence[np.ndarray]) -> np.ndarray:
    """Tr_X[(F (x) I) rho] for every F."""
    t = mat.reshape(dx, dy, dx, dy)
    return np.einsum("fab,byac->fyc", np.asarray(fs), t)


def conditional_generators(rho_xy: Operator, x_labels, eig_cutoff=DEFAULT_TOLS.eig_cutoff) -> list[np.ndarray]:
    """rho_Y^{-1/2} Tr_X[(F_i (x) I) rho_XY] rho_Y^{-1/2} over a Hermitian basis {F_i} of X."""
    rho, x, y = _split_xy(rho_xy, x_labels)
    dx, dy = rho.layout.dim_of(x), rho.layout.dim_of(y)
    mat = np.asarray(rho.matrix)
    rho_y = np.einsum("ayac->yc", mat.reshape(dx, dy, dx, dy))
    r = _pinv_sqrt(rho_y, eig_cutoff)
    return [r @ s @ r for s in _slices(mat, dx, dy, hermitian_basis(dx))]


def modular_components(ops: Iterable[np.ndarray], rho_y: np.ndarray,
                       eig_cutoff=DEFAULT_TOLS.eig_cutoff, freq_tol=FREQ_TOL) -> list[np.ndarray]:
    """Split each operator into eigencomponents of X -> [log rho_Y, X] on supp(rho_Y).

    An algebra is invariant under t -> rho_Y^{it} . rho_Y^{-it} iff it contains the
    spectral components of its elements, so adding these to a generating set
    yields the smallest modular-invariant algebra containing it.
    """
    w, v = np.linalg.eigh(0.5 * (rho_y + rho_y.conj().T))
    keep = w > eig_cutoff
    w, v = w[keep], v[:, keep]
    logw = np.log(w)
    freqs = logw[:, None] - logw[None, :]
    flat = np.sort(freqs.ravel())
    edges = flat[1:][np.diff(flat) > freq_tol]
    labels = np.searchsorted(edges, freqs, side="right")
    out = []
    for op in ops:
        o = v.conj().T @ op @ v
        for lab in np.unique(labels):
            comp = np.where(labels == lab, o, 0)
            if np.linalg.norm(comp) > 1e-12:
                out.append(v @ comp @ v.conj().T)
    return out


def _block_tensor(rho_p: np.ndarray, dx, dy, dt, iso: np.ndarray) -> np.ndarray:
    r = rho_p.reshape(dx, dy, dt, dx, dy, dt)
    return np.einsum("ya,xytuvs,vb->xatubs", iso.conj(), r, iso, optimize=True)


def _embed_block(op: np.ndarray, dx, dt, iso: np.ndarray) -> np.ndarray:
    m = iso.shape[1]
    k = op.reshape(dx, m, dt, dx, m, dt)
    return np.einsum("ya,xatubs,vb->xytuvs", iso, k, iso.conj(), optimize=True)


def decompose_with_isometries(rho: Operator, x_labels, y_labels, tail_labels,
                              isometries: Sequence[np.ndarray], dims: Sequence[tuple[int, int]],
                              tols=DEFAULT_TOLS) -> HjpDecomposition:
    """Extract weights and factors of ``rho`` for a given block split of Y.

    Raises :class:`StructureError` if a block is numerically empty or the
    product form fails to reproduce ``rho`` within ``tols.recon``.
    """
    layout = rho.layout
    x, y = layout.ordered(x_labels), layout.ordered(y_labels)
    tail = layout.ordered(tail_labels)
    if set(x) | set(y) | set(tail) != set(layout.labels):
        rho = partial_trace(rho, x + y + tail)
        layout = rho.layout
    order = x + y + tail
    rho_p = np.asarray(permute(rho, order).matrix)
    dx, dy, dt = layout.dim_of(x), layout.dim_of(y), layout.dim_of(tail)
    x_layout, t_layout = layout.sub(x), layout.sub(tail)
    name = "".join(y)
    blocks = []
    for iso, (d1, d2) in zip(isometries, dims):
        if iso.shape != (dy, d1 * d2):
            raise StructureError(f"isometry shape {iso.shape} inconsistent with dims ({d1}, {d2})")
        t = _block_tensor(rho_p, dx, dy, dt, iso).reshape(dx, d1, d2, dt, dx, d1, d2, dt)
        p = float(np.einsum("xiatxiat->", t).real)
        if p <= tols.weight_floor:
            raise StructureError(f"block with dims ({d1}, {d2}) has weight {p:.3e}")
        f1 = np.einsum("xiatujat->xiuj", t).reshape(dx * d1, dx * d1) / p
        f2 = np.einsum("xiatxjbs->atbs", t).reshape(d2 * dt, d2 * dt) / p
        blocks.append(HjpBlock(
            np.asarray(iso), d1, d2, p,
            DensityOperator.from_matrix(x_layout + SystemLayout(((name + "_1", d1),)), f1),
            DensityOperator.from_matrix(SystemLayout(((name + "_2", d2),)) + t_layout, f2),
        ))
    rho_y = partial_trace(rho, y).matrix
    sup = support_isometry(np.asarray(rho_y), tols.eig_cutoff)
    dec = HjpDecomposition(layout, x, y, tuple(blocks), sup @ sup.conj().T, tail)
    resid = float(np.linalg.norm(build_state(dec).matrix - rho.matrix))
    dec = HjpDecomposition(layout, x, y, tuple(blocks), dec.support, tail, resid)
    if resid > tols.recon:
        raise StructureError(f"block decomposition reconstructs the state with residual {resid:.3e}",
                             residual=resid)
    return dec


def build_state(dec: HjpDecomposition) -> DensityOperator:
    """Assemble sum_k p_k (embedding of factor_xy1 (x) factor_y2) in the source layout."""
    x_layout, y_layout = dec.x_layout, dec.y_layout
    t_layout = dec.tail_layout
    dx, dy = x_layout.total_dim, y_layout.total_dim
    dt = t_layout.total_dim
    out = np.zeros((dx, dy, dt, dx, dy, dt), dtype=complex)
    for b in dec.blocks:
        if (b.factor_xy1.dim != dx * b.d1 or b.factor_y2.dim != b.d2 * dt
                or b.isometry.shape != (dy, b.d1 * b.d2)):
            raise StructureError("block factors are inconsistent with the declared dimensions")
        out += _embed_block(b.block_operator(), dx, dt, b.isometry)
    n = dx * dy * dt
    layout = x_layout + y_layout + t_layout
    op = Operator(layout, out.reshape(n, n))
    op = permute(op, [lab for lab in dec.source_layout.labels if lab in layout.labels])
    return DensityOperator.from_matrix(op.layout, op.matrix)


def _structure_generators(rho: Operator, x_labels, eig_cutoff) -> tuple[list[np.ndarray], int]:
    rho_p, x, y = _split_xy(rho, x_labels)
    gens = conditional_generators(rho_p, x, eig_cutoff)
    dy = rho_p.layout.dim_of(y)
    rho_y = np.asarray(partial_trace(rho_p, y).matrix)
    return gens + modular_components(gens, rho_y, eig_cutoff), dy


def hjp_decompose(rho_xy: Operator, x_labels, tols=DEFAULT_TOLS, rng_seed=0) -> HjpDecomposition:
    """Minimal decomposition of the Y side of ``rho_xy`` with respect to X."""
    gens, dy = _structure_generators(rho_xy, x_labels, tols.eig_cutoff)
    st = wedderburn(gens, dy, tols, rng_seed)
    layout = rho_xy.layout
    x = layout.ordered(x_labels)
    y = tuple(lab for lab in layout.labels if lab not in x)
    return decompose_with_isometries(rho_xy, x, y, (), [b.isometry for b in st.blocks], st.dims, tols)


def markov_decompose(rho: Operator, chain: MarkovChainSpec, tols=DEFAULT_TOLS, rng_seed=0) -> HjpDecomposition:
    """Decompose the pivot of ``head - pivot - tail``; the tail is attached to the Y2 factors."""
    verdict = assert_markov(rho, chain, tols.cmi, tols.eig_cutoff)
    if not verdict.holds:
        raise NotMarkovError(f"chain {chain} fails: I = {verdict.cmi_value:.3e}",
                             {str(chain): verdict.cmi_value})
    layout = rho.layout
    head, pivot, tail = (layout.ordered(s) for s in (chain.head, chain.pivot, chain.tail))
    rho_ab = partial_trace(rho, head + pivot)
    dec = hjp_decompose(rho_ab, head, tols, rng_seed)
    return decompose_with_isometries(rho, head, pivot, tail,
                                     [b.isometry for b in dec.blocks], dec.dims, tols)


def _intertwiner(sigma: np.ndarray, tau: np.ndarray, dx: int, d1: int) -> tuple[np.ndarray, float]:
    """Unitary U minimising |(I (x) U) sigma - tau (I (x) U)|, polar-projected."""
    cols = []
    eye = np.eye(dx)
    for i in range(d1):
        for j in range(d1):
            e = np.zeros((d1, d1))
            e[i, j] = 1
            big = np.kron(eye, e)
            cols.append((big @ sigma - tau @ big).ravel())
    mat = np.array(cols).T
    _, s, vh = np.linalg.svd(mat, full_matrices=False)
    u = vh[-1].conj().reshape(d1, d1)
    u, _ = scipy.linalg.polar(u)
    big = np.kron(eye, u)
    return u, float(np.linalg.norm(big @ sigma @ big.conj().T - tau))


def local_unitary_equivalence(sigma: Operator, tau: Operator, x_dim: int,
                              tol=DEFAULT_TOLS.recon) -> tuple[bool, np.ndarray | None, float]:
    """Is tau = (I_X (x) U) sigma (I_X (x) U)^dagger for a unitary U on the second factor?

    Quick spectral filters first, then an explicit U solving the linear
    intertwining equation; a returned ``True`` always comes with a U that
    achieves the residual.
    """
    a, b = np.asarray(sigma.matrix), np.asarray(tau.matrix)
    if a.shape != b.shape:
        return False, None, np.inf
    d1 = a.shape[0] // x_dim
    if np.max(np.abs(np.linalg.eigvalsh(a) - np.linalg.eigvalsh(b))) > tol:
        return False, None, np.inf
    ax = np.einsum("xiyi->xy", a.reshape(x_dim, d1, x_dim, d1))
    bx = np.einsum("xiyi->xy", b.reshape(x_dim, d1, x_dim, d1))
    if np.max(np.abs(np.linalg.eigvalsh(ax) - np.linalg.eigvalsh(bx))) > tol:
        return False, None, np.inf
    u, resid = _intertwiner(a, b, x_dim, d1)
    return resid <= tol, u, resid


def is_minimal(dec: HjpDecomposition, tols=DEFAULT_TOLS, rng_seed=0) -> MinimalityVerdict:
    x = dec.x_labels
    dx = dec.x_layout.total_dim
    for k, blk in enumerate(dec.blocks):
        f = blk.factor_xy1
        y1 = f.layout.labels[-1]
        gens, dy1 = _structure_generators(f, x, tols.eig_cutoff)
        st = wedderburn(gens, dy1, tols, rng_seed)
        supp_rank = support_isometry(np.asarray(partial_trace(f, [y1]).matrix), tols.eig_cutoff).shape[1]
        if len(st.blocks) != 1 or st.blocks[0].d2 != 1 or st.blocks[0].d1 != supp_rank:
            return MinimalityVerdict(False, "i", (k,),
                                     f"block {k}: Y1 algebra splits as {st.dims} on a rank-{supp_rank} support")
    for k in range(len(dec.blocks)):
        for kk in range(k + 1, len(dec.blocks)):
            bk, bkk = dec.blocks[k], dec.blocks[kk]
            if bk.d1 != bkk.d1:
                continue
            equiv, _, resid = local_unitary_equivalence(bk.factor_xy1, bkk.factor_xy1, dx, tols.recon)
            if equiv:
                return MinimalityVerdict(False, "ii", (k, kk),
                                         f"blocks {k} and {kk} are related by I (x) U (residual {resid:.2e})")
    return MinimalityVerdict(True)


def _factor_product(t: np.ndarray, d1: int, d2: int) -> tuple[np.ndarray, np.ndarray]:
    """Nearest U1 (x) U2 to the unitary ``t`` (rank-one rearrangement, then polar)."""
    r = t.reshape(d1, d2, d1, d2).transpose(0, 2, 1, 3).reshape(d1 * d1, d2 * d2)
    u, s, vh = np.linalg.svd(r)
    u1, _ = scipy.linalg.polar(u[:, 0].reshape(d1, d1))
    u2, _ = scipy.linalg.polar(vh[0].reshape(d2, d2))
    return u1, u2


def _coords_op(blk: HjpBlock, dx: int, dt: int, u: np.ndarray) -> np.ndarray:
    big = np.kron(np.kron(np.eye(dx), u), np.eye(dt))
    return big @ blk.block_operator() @ big.conj().T


def match_decompositions(dec1: HjpDecomposition, dec2: HjpDecomposition, tols=DEFAULT_TOLS,
                         overlap_tol=1e-6) -> DecompositionMatch:
    """Pair the blocks of two decompositions of the same state and align their factorizations."""
    if (dec1.source_layout != dec2.source_layout or dec1.x_labels != dec2.x_labels
            or dec1.y_labels != dec2.y_labels or dec1.tail_labels != dec2.tail_labels):
        raise MatchError("decompositions live on different layouts")
    if len(dec1.blocks) != len(dec2.blocks):
        raise MatchError(f"block counts differ: {len(dec1.blocks)} vs {len(dec2.blocks)}")
    n = len(dec1.blocks)
    overlap = np.array([[np.linalg.norm(b1.isometry.conj().T @ b2.isometry) ** 2
                         for b2 in dec2.blocks] for b1 in dec1.blocks])
    phi = []
    for k, b1 in enumerate(dec1.blocks):
        r = b1.isometry.shape[1]
        hits = [kk for kk, b2 in enumerate(dec2.blocks)
                if b2.isometry.shape[1] == r and abs(overlap[k, kk] - r) <= overlap_tol * r]
        if len(hits) != 1:
            raise MatchError(f"block {k} overlaps {np.round(overlap[k], 6).tolist()}; no unique partner")
        phi.append(hits[0])
    if sorted(phi) != list(range(n)):
        raise MatchError(f"block correspondence {phi} is not a bijection")
    dx = dec1.x_layout.total_dim
    dt = dec1.tail_layout.total_dim
    unitaries, worst = [], 0.0
    for k, kk in enumerate(phi):
        b1, b2 = dec1.blocks[k], dec2.blocks[kk]
        if (b1.d1, b1.d2) != (b2.d1, b2.d2):
            raise MatchError(f"block {k} has dims {(b1.d1, b1.d2)} but partner has {(b2.d1, b2.d2)}")
        t = b2.isometry.conj().T @ b1.isometry
        u1, u2 = _factor_product(t, b1.d1, b1.d2)
        resid = float(np.linalg.norm(_coords_op(b1, dx, dt, np.kron(u1, u2)) - b2.block_operator()))
        worst = max(worst, resid)
        unitaries.append((u1, u2))
    if worst > tols.recon:
        raise MatchError(f"aligned blocks differ by {worst:.3e}")
    return DecompositionMatch(tuple(phi), tuple(unitaries), worst)


def transform_decomposition(dec: HjpDecomposition, perm: Sequence[int],
                            unitaries: Sequence[tuple[np.ndarray, np.ndarray]] | None = None) -> HjpDecomposition:
    """Same state, blocks listed as ``dec.blocks[perm[i]]`` and re-coordinatised by V (x) W."""
    dx = dec.x_layout.total_dim
    dt = dec.tail_layout.total_dim
    blocks = []
    for i, k in enumerate(perm):
        b = dec.blocks[k]
        v, w = unitaries[i] if unitaries is not None else (np.eye(b.d1), np.eye(b.d2))
        bv = np.kron(np.eye(dx), v)
        bw = np.kron(w, np.eye(dt))
        f1 = bv @ b.factor_xy1.matrix @ bv.conj().T
        f2 = bw @ b.factor_y2.matrix @ bw.conj().T
        blocks.append(HjpBlock(
            b.isometry @ np.kron(v, w).conj().T, b.d1, b.d2, b.weight,
            DensityOperator.from_matrix(b.factor_xy1.layout, f1),
            DensityOperator.from_matrix(b.factor_y2.layout, f2),
        ))
    return HjpDecomposition(dec.source_layout, dec.x_labels, dec.y_labels, tuple(blocks),
                            dec.support, dec.tail_labels, dec.residual)
