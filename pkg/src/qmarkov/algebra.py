"""Numerical Artin-Wedderburn decomposition of finite-dimensional *-algebras.

A *-algebra of d x d complex matrices with unit P (a projector) splits as

    range(P) = sum_k C^{d1_k} (x) C^{d2_k},   A = sum_k M_{d1_k} (x) I_{d2_k}.

The pipeline is ``span_closure -> central_projections -> factor_block``;
all randomness comes from explicit seeds so repeated calls are bit-identical.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import DEFAULT_TOLS, spawn_seeds
from .errors import DegeneracyError, StructureError
from .tensor import support_isometry

__all__ = [
    "AlgebraBasis",
    "WedderburnBlock",
    "WedderburnStructure",
    "span_closure",
    "central_projections",
    "factor_block",
    "wedderburn",
    "commutant",
    "center",
]

RETRY_BUDGET = 8
# elements of one eigenvalue cluster agree to roughly machine precision
_CLUSTER_TOL = 1e-9
_NULL_TOL = 1e-7
_FORM_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class AlgebraBasis:
    """Hilbert-Schmidt orthonormal basis of a *-algebra with unit ``unit``."""

    ambient_dim: int
    basis_ops: np.ndarray  # shape (n, d, d)
    unit: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.basis_ops)

    def gram(self) -> np.ndarray:
        flat = self.basis_ops.reshape(self.dim, -1)
        return flat.conj() @ flat.T

    def closure_residual(self) -> float:
        """Largest distance of a product or adjoint of basis elements from the span."""
        flat = self.basis_ops.reshape(self.dim, -1)
        worst = 0.0
        for x in self.basis_ops:
            cands = np.concatenate([np.einsum("ij,njk->nik", x, self.basis_ops),
                                    x.conj().T[None]]).reshape(-1, flat.shape[1])
            res = cands - (cands @ flat.conj().T) @ flat
            worst = max(worst, float(np.max(np.linalg.norm(res, axis=1))))
        return worst

    def random_element(self, rng, hermitian=False) -> np.ndarray:
        n = self.dim
        coef = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x = np.einsum("n,nij->ij", coef, self.basis_ops)
        return x + x.conj().T if hermitian else x


@dataclass(frozen=True, eq=False)
class WedderburnBlock:
    """One simple summand: ``isometry`` has orthonormal columns indexed by (i, b)
    with i < d1 and b < d2 (b fastest), spanning range(projector)."""

    projector: np.ndarray
    isometry: np.ndarray
    d1: int
    d2: int

    @property
    def block_unitary(self) -> np.ndarray:
        return self.isometry.conj().T

    def tensor_form(self, x: np.ndarray) -> tuple[np.ndarray, float]:
        """Return ``(M, residual)`` with ``W x W^dagger ~ M (x) I_d2``."""
        w = self.isometry.conj().T @ x @ self.isometry
        return _split_tensor_form(w, self.d1, self.d2)


def _split_tensor_form(w, d1, d2):
    t = w.reshape(d1, d2, d1, d2)
    m = np.einsum("iaja->ij", t) / d2
    return m, float(np.linalg.norm(w - np.kron(m, np.eye(d2))))


@dataclass(frozen=True, eq=False)
class WedderburnStructure:
    ambient_dim: int
    blocks: tuple[WedderburnBlock, ...]
    algebra: AlgebraBasis

    @property
    def dims(self) -> list[tuple[int, int]]:
        return [(b.d1, b.d2) for b in self.blocks]

    def max_form_residual(self, ops=None) -> float:
        ops = self.algebra.basis_ops if ops is None else ops
        worst = 0.0
        for blk in self.blocks:
            for x in ops:
                worst = max(worst, blk.tensor_form(x)[1])
        return worst

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        """Sum over blocks of W^dagger (M(x) (x) I) W."""
        out = np.zeros_like(x, dtype=complex)
        for blk in self.blocks:
            m, _ = blk.tensor_form(x)
            out += blk.isometry @ np.kron(m, np.eye(blk.d2)) @ blk.isometry.conj().T
        return out


def _orthonormal_extension(q: np.ndarray, cands: np.ndarray, tol: float) -> np.ndarray:
    """Rows orthonormal to ``q`` spanning the part of ``cands`` outside span(q)."""
    norms = np.linalg.norm(cands, axis=1)
    cands = cands[norms > tol] / norms[norms > tol, None]
    if not len(cands):
        return cands
    for _ in range(2):
        if len(q):
            cands = cands - (cands @ q.conj().T) @ q
    _, s, vh = np.linalg.svd(cands, full_matrices=False)
    new = vh[s > tol]
    if len(q) and len(new):
        new = new - (new @ q.conj().T) @ q
        new /= np.linalg.norm(new, axis=1)[:, None]
    return new


def _joint_support(gens: np.ndarray) -> np.ndarray:
    if not len(gens):
        return np.zeros((0, 0))
    s = np.einsum("nij,nkj->ik", gens, gens.conj()) + np.einsum("nji,njk->ik", gens.conj(), gens)
    scale = max(float(np.linalg.norm(s, 2)), 1e-300)
    iso = support_isometry(s / scale, 1e-10)
    return iso @ iso.conj().T


def span_closure(generators: Sequence[np.ndarray], ambient_dim: int,
                 residual_tol: float = DEFAULT_TOLS.residual_tol) -> AlgebraBasis:
    """Smallest *-algebra containing ``generators`` and the projector onto their joint support."""
    d = ambient_dim
    gens = np.asarray([np.asarray(g, dtype=complex) for g in generators]).reshape(-1, d, d)
    unit = _joint_support(gens) if len(gens) else np.zeros((d, d), dtype=complex)
    rank = int(round(np.trace(unit).real))
    if rank == 0:
        return AlgebraBasis(d, np.zeros((0, d, d), dtype=complex), unit)

    # words in T = gens u gens^dagger applied to the unit span the algebra
    t = np.concatenate([gens, gens.conj().transpose(0, 2, 1)])
    t = t[np.linalg.norm(t.reshape(len(t), -1), axis=1) > residual_tol]
    t_flat = _orthonormal_extension(np.zeros((0, d * d)), t.reshape(len(t), -1), residual_tol)
    t = t_flat.reshape(-1, d, d)

    q = (unit / np.sqrt(rank)).reshape(1, -1)
    frontier = q.reshape(-1, d, d)
    cap = rank * rank
    chunk = max(1, 2_000_000 // max(1, len(t) * d * d))
    while len(frontier) and len(q) < cap:
        added = []
        for start in range(0, len(frontier), chunk):
            f = frontier[start:start + chunk]
            prods = np.einsum("tij,fjk->tfik", t, f).reshape(-1, d * d)
            new = _orthonormal_extension(q, prods, residual_tol)
            if len(new):
                q = np.concatenate([q, new])
                added.append(new)
            if len(q) >= cap:
                break
        frontier = np.concatenate(added).reshape(-1, d, d) if added else np.zeros((0, d, d))
    return AlgebraBasis(d, q.reshape(-1, d, d), unit)


def _clusters(values: np.ndarray, scale: float) -> list[np.ndarray]:
    """Group sorted-ascending eigenvalue indices whose neighbours differ by < tol*scale."""
    order = np.argsort(values, kind="stable")
    groups, cur = [], [order[0]]
    for prev, idx in zip(order[:-1], order[1:]):
        if values[idx] - values[prev] > _CLUSTER_TOL * scale:
            groups.append(np.array(cur))
            cur = []
        cur.append(idx)
    groups.append(np.array(cur))
    return groups


def _min_cluster_gap(values, groups) -> float:
    centers = sorted(float(np.mean(values[g])) for g in groups)
    return min((b - a for a, b in zip(centers[:-1], centers[1:])), default=np.inf)


def _compressed(alg: AlgebraBasis, iso: np.ndarray) -> np.ndarray:
    return np.einsum("ia,nij,jb->nab", iso.conj(), alg.basis_ops, iso)


def _null_space_of_commutators(ops: np.ndarray, rs: Sequence[np.ndarray]) -> np.ndarray:
    """Coefficient vectors c with [r, sum_j c_j ops_j] = 0 for every r in ``rs``."""
    n = len(ops)
    cols = []
    for r in rs:
        comm = np.einsum("ij,njk->nik", r, ops) - np.einsum("nij,jk->nik", ops, r)
        cols.append(comm.reshape(n, -1).T)
    mat = np.concatenate(cols)
    _, s, vh = np.linalg.svd(mat, full_matrices=True)
    s_full = np.zeros(n)
    s_full[:len(s)] = s
    return vh[s_full <= _NULL_TOL].conj()


def center(alg: AlgebraBasis, rng) -> np.ndarray:
    """Basis (as matrices) of the center of ``alg``, verified against every basis element."""
    if alg.dim == 0:
        return np.zeros((0, alg.ambient_dim, alg.ambient_dim), dtype=complex)
    for _ in range(RETRY_BUDGET):
        rs = [alg.random_element(rng) for _ in range(3)]
        rs = [r / np.linalg.norm(r) for r in rs]
        coefs = _null_space_of_commutators(alg.basis_ops, rs)
        zs = np.einsum("cn,nij->cij", coefs, alg.basis_ops)
        worst = 0.0
        for z in zs:
            comm = np.einsum("ij,njk->nik", z, alg.basis_ops) - np.einsum("nij,jk->nik", alg.basis_ops, z)
            worst = max(worst, float(np.max(np.linalg.norm(comm, axis=(1, 2)))))
        if worst <= _NULL_TOL * 10:
            return zs
    raise DegeneracyError(f"could not isolate the center (commutator residual {worst:.3e})")


def central_projections(alg: AlgebraBasis, gap_tol: float = DEFAULT_TOLS.gap_tol,
                        rng_seed=0) -> list[np.ndarray]:
    """Minimal central projections, found by splitting a random Hermitian central element."""
    rng = np.random.default_rng(rng_seed)
    if alg.dim == 0:
        return []
    zs = center(alg, rng)
    unit_iso = support_isometry(alg.unit, 0.5)
    diag = {}
    for attempt in range(RETRY_BUDGET):
        # complex weights: the center basis is only a complex basis
        coef = rng.standard_normal(len(zs)) + 1j * rng.standard_normal(len(zs))
        h = np.einsum("c,cij->ij", coef, zs)
        h = unit_iso.conj().T @ (h + h.conj().T) @ unit_iso
        w, v = np.linalg.eigh(h)
        scale = max(float(np.max(np.abs(w))), 1e-300)
        groups = _clusters(w, scale)
        gap = _min_cluster_gap(w, groups) / scale
        diag = {"attempt": attempt, "clusters": len(groups), "center_dim": len(zs), "min_gap": gap}
        if len(groups) == len(zs) and gap >= gap_tol:
            projs = []
            for g in groups:
                vecs = unit_iso @ v[:, g]
                projs.append(vecs @ vecs.conj().T)
            return projs
    raise DegeneracyError(f"central element failed to separate the blocks: {diag}")


def factor_block(alg: AlgebraBasis, projector: np.ndarray, rng_seed=0,
                 gap_tol: float = DEFAULT_TOLS.gap_tol) -> tuple[int, int, np.ndarray]:
    """Tensor-factor one central block; returns ``(d1, d2, isometry)``.

    A random Hermitian element restricted to the block has d1 distinct
    eigenvalues of multiplicity d2 each.  The multiplicity spaces are then
    aligned with each other through a second random element, which in
    product coordinates acts as M (x) I and so maps one eigenspace onto
    another by a multiple of the same isometry.
    """
    rng = np.random.default_rng(rng_seed)
    q = support_isometry(projector, 0.5)
    r = q.shape[1]
    ops = _compressed(alg, q)
    sub = AlgebraBasis(r, ops, np.eye(r))
    last = "no attempt"
    for _ in range(RETRY_BUDGET):
        h = sub.random_element(rng, hermitian=True)
        w, v = np.linalg.eigh(h)
        scale = max(float(np.max(np.abs(w))), 1e-300)
        groups = _clusters(w, scale)
        sizes = {len(g) for g in groups}
        if len(sizes) != 1:
            last = f"eigenvalue multiplicities {sorted(len(g) for g in groups)} are not uniform"
            continue
        if _min_cluster_gap(w, groups) / scale < gap_tol:
            last = "eigenvalue gap below gap_tol"
            continue
        d2 = sizes.pop()
        d1 = len(groups)
        bases = [v[:, g] for g in groups]
        if d1 > 1:
            g_el = sub.random_element(rng)
            g_el /= np.linalg.norm(g_el)
            first = bases[0]
            aligned = [first]
            ok = True
            for e in bases[1:]:
                t = e @ (e.conj().T @ g_el @ first)
                u, s, vh = np.linalg.svd(t, full_matrices=False)
                if s[-1] < 1e-6 or (s[0] - s[-1]) > 1e-6 * s[0]:
                    ok = False
                    last = f"inconsistent transport singular values {s}"
                    break
                aligned.append(u @ vh)
            if not ok:
                continue
            bases = aligned
        local = np.concatenate(bases, axis=1)
        worst = max(_split_tensor_form(local.conj().T @ x @ local, d1, d2)[1] for x in ops)
        if worst > _FORM_TOL:
            last = f"tensor-form residual {worst:.3e}"
            continue
        return d1, d2, q @ local
    raise StructureError(f"block does not factor as M_d1 (x) I_d2: {last}")


def _canonical_key(blk: WedderburnBlock, ref: np.ndarray | None):
    spec = ()
    if ref is not None:
        m, _ = blk.tensor_form(ref)
        herm = 0.5 * (m + m.conj().T)
        spec = tuple(np.round(np.linalg.eigvalsh(herm), 6) + 0.0)
    return (-blk.d1, -blk.d2, spec)


def wedderburn(generators: Sequence[np.ndarray], ambient_dim: int, tols=DEFAULT_TOLS,
               rng_seed=0) -> WedderburnStructure:
    alg = span_closure(generators, ambient_dim, tols.residual_tol)
    seeds = spawn_seeds(rng_seed, 2)
    projs = central_projections(alg, tols.gap_tol, seeds[0])
    block_seeds = seeds[1].spawn(max(1, len(projs)))
    blocks = []
    for p, s in zip(projs, block_seeds):
        d1, d2, iso = factor_block(alg, p, s, tols.gap_tol)
        blocks.append(WedderburnBlock(p, iso, d1, d2))
    ref = np.asarray(generators[0]) if len(generators) else None
    blocks.sort(key=lambda b: _canonical_key(b, ref))
    return WedderburnStructure(ambient_dim, tuple(blocks), alg)


def commutant(alg: AlgebraBasis, rng_seed=0, residual_tol=DEFAULT_TOLS.residual_tol) -> AlgebraBasis:
    """Commutant of ``alg`` inside range(unit), as an algebra with the same unit."""
    rng = np.random.default_rng(rng_seed)
    iso = support_isometry(alg.unit, 0.5)
    r = iso.shape[1]
    ops = _compressed(alg, iso)
    sub = AlgebraBasis(r, ops, np.eye(r))
    units = np.eye(r * r, dtype=complex).reshape(r * r, r, r)
    for _ in range(RETRY_BUDGET):
        rs = [sub.random_element(rng) for _ in range(3)]
        coefs = _null_space_of_commutators(units, [x / np.linalg.norm(x) for x in rs])
        xs = coefs.reshape(-1, r, r)
        comm = max((float(np.linalg.norm(x @ o - o @ x)) for x in xs for o in ops), default=0.0)
        if comm <= _NULL_TOL * 10:
            lifted = np.einsum("ia,nab,jb->nij", iso, xs, iso.conj())
            return span_closure(list(lifted), alg.ambient_dim, residual_tol)
    raise DegeneracyError("could not compute the commutant")
