"""Seeded random instances with known structure.

Every generator is a pure function of its spec (which carries the seed).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.stats

from .classical import JointPmf
from .config import DEFAULT_TOLS
from .double_markov import CommonLabel, Theorem2Certificate
from .entropy import cmi
from .errors import GenError
from .structure import HjpBlock, HjpDecomposition, build_state, is_minimal
from .tensor import DensityOperator, SystemLayout, trace_distance

__all__ = [
    "GenSpec",
    "random_density",
    "random_unitary",
    "gen_markov_state",
    "gen_double_markov_state",
    "gen_thm2_state",
    "gen_negative",
    "gen_nonunique_pair",
    "sample_spec",
    "gen_lemma1_pmf",
    "gen_lemma2_pmf",
    "NEGATIVE_KINDS",
]

REJECTION_BUDGET = 64
NEGATIVE_KINDS = ("one_way_tripartite", "entangled_not_markov", "thm2_rank_deficient")


@dataclass(frozen=True)
class GenSpec:
    """Instance recipe.

    ``dims`` maps system labels to dimensions; a pivot dimension left out is
    taken to be sum(d1 * d2).  ``blocks`` lists ``(d1, d2)`` per block (for
    double-Markov instances: ``(dim E_B, dim E_C)`` per label).  ``weights``
    of ``None`` are sampled.
    """

    dims: tuple[tuple[str, int], ...]
    blocks: tuple[tuple[int, int], ...]
    weights: tuple[float, ...] | None = None
    full_support: bool = True
    delta: float = 0.1
    seed: int = 0
    pos_floor: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple((str(k), int(v)) for k, v in dict(self.dims).items()))
        object.__setattr__(self, "blocks", tuple((int(a), int(b)) for a, b in self.blocks))
        if not self.blocks or any(a < 1 or b < 1 for a, b in self.blocks):
            raise GenError(f"block dims must be positive: {self.blocks}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if len(w) != len(self.blocks) or np.any(w <= 0) or abs(w.sum() - 1) > 1e-12:
                raise GenError(f"weights must be positive, one per block, and sum to 1: {self.weights}")
            object.__setattr__(self, "weights", tuple(float(x) for x in w))

    def dim(self, label: str, default: int | None = None) -> int:
        d = dict(self.dims).get(label, default)
        if d is None:
            raise GenError(f"spec has no dimension for {label!r}")
        return d


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _ginibre_state(dim: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_density(dim: int, rank: int | None = None, seed=0, layout: SystemLayout | None = None) -> DensityOperator:
    """Hilbert-Schmidt-induced random state of exact rank ``rank`` (default full)."""
    rank = dim if rank is None else rank
    if not 1 <= rank <= dim:
        raise GenError(f"rank {rank} outside [1, {dim}]")
    rng = seed if isinstance(seed, np.random.Generator) else _rng(seed)
    layout = layout or SystemLayout((("S", dim),))
    return DensityOperator.from_matrix(layout, _ginibre_state(dim, rank, rng))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary."""
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()).reshape(1, 1)
    return scipy.stats.unitary_group.rvs(dim, random_state=rng)


def _weights(spec: GenSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.weights is not None:
        return np.array(spec.weights)
    n = len(spec.blocks)
    # Dirichlet mixed with uniform keeps every weight at least 0.3/n
    return 0.7 * rng.dirichlet(np.ones(n)) + 0.3 / n


def _block_isometries(blocks, unitary: np.ndarray) -> list[np.ndarray]:
    out, offset = [], 0
    for d1, d2 in blocks:
        m = d1 * d2
        out.append(unitary[:, offset:offset + m])
        offset += m
    return out


def _make_decomposition(layout, x, y, tail, blocks, weights, isos, f1s, f2s) -> HjpDecomposition:
    ylab = "".join(y)
    x_layout, t_layout = layout.sub(x), layout.sub(tail)
    hb = []
    for (d1, d2), p, iso, f1, f2 in zip(blocks, weights, isos, f1s, f2s):
        hb.append(HjpBlock(
            iso, d1, d2, float(p),
            DensityOperator.from_matrix(x_layout + SystemLayout(((ylab + "_1", d1),)), f1),
            DensityOperator.from_matrix(SystemLayout(((ylab + "_2", d2),)) + t_layout, f2),
        ))
    dy = layout.dim_of(y)
    proj = sum((iso @ iso.conj().T for iso in isos), np.zeros((dy, dy), dtype=complex))
    return HjpDecomposition(layout, tuple(x), tuple(y), tuple(hb), proj, tuple(tail), 0.0)


def _pivot_dim(spec: GenSpec, label: str) -> int:
    need = sum(a * b for a, b in spec.blocks)
    d = spec.dim(label, need)
    if d < need:
        raise GenError(f"blocks need dim {need} on {label} but it has {d}")
    return d


def gen_markov_state(spec: GenSpec, tols=DEFAULT_TOLS) -> tuple[DensityOperator, HjpDecomposition]:
    """A - B - C state sum_k p_k rho_{A B1|k} (x) rho_{B2 C|k} with B hidden by a Haar unitary.

    The returned ground truth is a minimal decomposition (checked, with
    resampling) with x = A, y = B and C attached to the second factors.
    """
    rng = _rng(spec.seed)
    da, dc = spec.dim("A"), spec.dim("C")
    db = _pivot_dim(spec, "B")
    layout = SystemLayout((("A", da), ("B", db), ("C", dc)))
    weights = _weights(spec, rng)
    for _ in range(REJECTION_BUDGET):
        u = random_unitary(db, rng)
        isos = _block_isometries(spec.blocks, u)
        f1 = [_ginibre_state(da * d1, da * d1, rng) for d1, _ in spec.blocks]
        f2 = [_ginibre_state(d2 * dc, d2 * dc, rng) for _, d2 in spec.blocks]
        truth = _make_decomposition(layout, ("A",), ("B",), ("C",), spec.blocks, weights, isos, f1, f2)
        if not is_minimal(truth, tols).minimal:
            continue
        rho = build_state(truth)
        if cmi(rho, "A", "C", "B", tols.eig_cutoff) <= 1e-9:
            return rho, truth
    raise GenError(f"no minimal Markov instance for blocks {spec.blocks} with dim A = {da} "
                   f"within {REJECTION_BUDGET} draws")


def _distinct_states(n: int, dim: int, delta: float, rng) -> list[np.ndarray]:
    for _ in range(REJECTION_BUDGET):
        states = [_ginibre_state(dim, dim, rng) for _ in range(n)]
        if all(trace_distance(states[i], states[j]) >= delta for i in range(n) for j in range(i + 1, n)):
            return states
    raise GenError(f"cannot draw {n} states on dim {dim} with pairwise trace distance >= {delta}")


def gen_double_markov_state(spec: GenSpec, tols=DEFAULT_TOLS) -> tuple[DensityOperator, CommonLabel]:
    """sum_j q_j rho_{A|j} (x) sigma_{BC|j}, sigma_{BC|j} full rank on E_{B,j} (x) E_{C,j}.

    ``spec.blocks`` gives ``(dim E_B, dim E_C)`` per label; B and C are
    hidden by independent Haar unitaries, which the ground-truth PVMs carry.
    """
    rng = _rng(spec.seed)
    da = spec.dim("A")
    need_b = sum(a for a, _ in spec.blocks)
    need_c = sum(c for _, c in spec.blocks)
    db, dc = spec.dim("B", need_b), spec.dim("C", need_c)
    if db < need_b or dc < need_c:
        raise GenError(f"label blocks need dims ({need_b}, {need_c}) but B, C have ({db}, {dc})")
    n = len(spec.blocks)
    if n > 1 and da == 1:
        raise GenError("distinct conditional states on A need dim A >= 2")
    q = _weights(spec, rng)
    rho_a = _distinct_states(n, da, spec.delta, rng)
    ub, uc = random_unitary(db, rng), random_unitary(dc, rng)
    ib = _block_isometries([(a, 1) for a, _ in spec.blocks], ub)
    ic = _block_isometries([(c, 1) for _, c in spec.blocks], uc)
    total = np.zeros((da * db * dc,) * 2, dtype=complex)
    for j in range(n):
        vb, vc = ib[j], ic[j]
        v = np.kron(vb, vc)
        sigma = v @ _ginibre_state(v.shape[1], v.shape[1], rng) @ v.conj().T
        total += q[j] * np.kron(rho_a[j], sigma)
    layout = SystemLayout((("A", da), ("B", db), ("C", dc)))
    rho = DensityOperator.from_matrix(layout, total)
    a_layout = layout.sub(["A"])
    truth = CommonLabel(
        ("A",), ("B",), ("C",), tuple(range(n)),
        tuple(v @ v.conj().T for v in ib), tuple(v @ v.conj().T for v in ic), np.array(q),
        tuple(DensityOperator.from_matrix(a_layout, r) for r in rho_a),
        {j: j for j in range(n)}, {j: j for j in range(n)},
    )
    worst = max(cmi(rho, "A", "C", "B", tols.eig_cutoff), cmi(rho, "A", "B", "C", tols.eig_cutoff))
    if worst > 1e-9:
        raise GenError(f"assembled double-Markov state has chain CMI {worst:.3e}")
    return rho, truth


def _thm2_layout(spec: GenSpec) -> SystemLayout:
    dd = _pivot_dim(spec, "D")
    return SystemLayout((("A", spec.dim("A")), ("B", spec.dim("B")), ("C", spec.dim("C")), ("D", dd)))


def _thm2_draw(spec: GenSpec, layout, rng, tols, ranks=None) -> tuple[DensityOperator, HjpDecomposition]:
    da, db, dc, dd = layout.dims
    weights = _weights(spec, rng)
    u = random_unitary(dd, rng)
    isos = _block_isometries(spec.blocks, u)
    f1 = [_ginibre_state(da * d1, da * d1, rng) for d1, _ in spec.blocks]
    f2 = []
    for k, (_, d2) in enumerate(spec.blocks):
        n = d2 * db * dc
        f2.append(_ginibre_state(n, n if ranks is None else ranks[k], rng))
    truth = _make_decomposition(layout, ("A",), ("D",), ("B", "C"), spec.blocks, weights, isos, f1, f2)
    return build_state(truth), truth


def gen_thm2_state(spec: GenSpec, tols=DEFAULT_TOLS) -> tuple[DensityOperator, Theorem2Certificate]:
    """Strictly positive A, B, C, D state with D = sum_k D1_k (x) D2_k carrying A-D-(B,C)."""
    if not spec.full_support:
        raise GenError("D-only certificate instances are generated with full support")
    layout = _thm2_layout(spec)
    dd = layout.dim_of(["D"])
    if sum(a * b for a, b in spec.blocks) != dd:
        raise GenError("full support needs sum(d1 * d2) == dim D")
    rng = _rng(spec.seed)
    for _ in range(REJECTION_BUDGET):
        rho, truth = _thm2_draw(spec, layout, rng, tols)
        if np.linalg.eigvalsh(np.asarray(rho.matrix))[0] < spec.pos_floor:
            continue
        if not is_minimal(truth, tols).minimal:
            continue
        if cmi(rho, "A", {"B", "C"}, "D", tols.eig_cutoff) <= 1e-9:
            return rho, Theorem2Certificate(truth)
    raise GenError(f"no strictly positive minimal instance (floor {spec.pos_floor:.1e}) "
                   f"within {REJECTION_BUDGET} draws")


def gen_negative(kind: str, dims: Sequence[int] | None = None, seed=0) -> DensityOperator:
    """Falsification instances; see ``NEGATIVE_KINDS``."""
    if kind == "one_way_tripartite":
        layout = SystemLayout((("A", 2), ("B", 2), ("C", 1)))
        m = np.zeros((4, 4))
        m[0, 0] = m[3, 3] = 0.5
        return DensityOperator(layout, m)
    if kind == "entangled_not_markov":
        layout = SystemLayout((("A", 2), ("B", 2), ("C", 2)))
        psi = np.zeros(8)
        psi[0] = psi[7] = 1 / np.sqrt(2)
        return DensityOperator.from_matrix(layout, np.outer(psi, psi))
    if kind == "thm2_rank_deficient":
        da, db, dc, dd = dims or (2, 2, 2, 2)
        spec = GenSpec(dict(A=da, B=db, C=dc, D=dd), ((1, dd),) if dd > 1 else ((1, 1),), seed=seed)
        layout = _thm2_layout(spec)
        rho, _ = _thm2_draw(spec, layout, _rng(seed), DEFAULT_TOLS, ranks=[1])
        return rho
    raise GenError(f"unknown negative kind {kind!r}; expected one of {NEGATIVE_KINDS}")


def gen_nonunique_pair(seed=0, tols=DEFAULT_TOLS) -> tuple[DensityOperator, HjpDecomposition, HjpDecomposition]:
    """A state on X (x) Y, dim Y = 3, whose zero-weight direction |2> can join either block.

    Both returned decompositions reproduce the state exactly, yet their block
    subspaces differ, so no block matching exists.
    """
    from .structure import decompose_with_isometries

    rng = _rng(seed)
    r0, r1 = _distinct_states(2, 2, 0.1, rng)
    e = np.eye(3)
    m = 0.5 * np.kron(r0, np.diag([1, 0, 0])) + 0.5 * np.kron(r1, np.diag([0, 1, 0]))
    layout = SystemLayout((("X", 2), ("Y", 3)))
    rho = DensityOperator.from_matrix(layout, m)
    first = decompose_with_isometries(rho, ["X"], ["Y"], [], [e[:, [0]], e[:, [1, 2]]], [(1, 1), (1, 2)], tols)
    second = decompose_with_isometries(rho, ["X"], ["Y"], [], [e[:, [0, 2]], e[:, [1]]], [(1, 2), (1, 1)], tols)
    return rho, first, second


def _split(total: int, rng, max_d1=2, max_d2=2, max_blocks=3) -> tuple[tuple[int, int], ...]:
    """Random ordered block dims with sum(d1 * d2) == total."""
    options = [(a, b) for a in range(1, max_d1 + 1) for b in range(1, max_d2 + 1)]
    for _ in range(1000):
        blocks, left = [], total
        while left > 0 and len(blocks) < max_blocks:
            fit = [o for o in options if o[0] * o[1] <= left]
            o = fit[rng.integers(len(fit))]
            blocks.append(o)
            left -= o[0] * o[1]
        if left == 0:
            return tuple(blocks)
    raise GenError(f"cannot split dimension {total}")


def sample_spec(kind: str, seed: int) -> GenSpec:
    """Random spec at desk scale for ``kind`` in {"markov", "double", "thm2"}."""
    rng = _rng([seed, 7])
    if kind == "markov":
        n = int(rng.integers(1, 4))
        blocks = tuple((int(rng.integers(1, 3)), int(rng.integers(1, 3))) for _ in range(n))
        da = int(rng.integers(2, 4))
        return GenSpec(dict(A=da, C=int(rng.integers(1, 4))), blocks, seed=seed)
    if kind == "double":
        n = int(rng.integers(1, 4))
        blocks = tuple((int(rng.integers(1, 3)), int(rng.integers(1, 3))) for _ in range(n))
        return GenSpec(dict(A=int(rng.integers(2, 4))), blocks, seed=seed)
    if kind == "thm2":
        dd = int(rng.integers(1, 5))
        return GenSpec(dict(A=int(rng.integers(2, 4)), B=int(rng.integers(1, 3)),
                            C=int(rng.integers(1, 3)), D=dd), _split(dd, rng), seed=seed)
    raise GenError(f"unknown spec kind {kind!r}")


def gen_lemma1_pmf(seed=0, max_labels=3, max_alpha=3) -> JointPmf:
    """p(j) p(a|j) p(b,c|j) with B and C values split into disjoint per-label ranges.

    Alphabets are A, B, C (J is hidden); labels get distinct p(a|j).
    """
    rng = _rng([seed, 11])
    n = int(rng.integers(1, max_labels + 1))
    da = int(rng.integers(2, max_alpha + 1)) if n > 1 else int(rng.integers(1, max_alpha + 1))
    sb = [int(rng.integers(1, 3)) for _ in range(n)]
    sc = [int(rng.integers(1, 3)) for _ in range(n)]
    pj = rng.dirichlet(np.ones(n)) * 0.7 + 0.3 / n
    pa = _distinct_pmfs(n, da, rng)
    p = np.zeros((da, sum(sb), sum(sc)))
    ob = np.concatenate([[0], np.cumsum(sb)])
    oc = np.concatenate([[0], np.cumsum(sc)])
    for j in range(n):
        bc = rng.dirichlet(np.ones(sb[j] * sc[j])).reshape(sb[j], sc[j])
        p[:, ob[j]:ob[j + 1], oc[j]:oc[j + 1]] = pj[j] * pa[j][:, None, None] * bc[None]
    perm_b, perm_c = rng.permutation(p.shape[1]), rng.permutation(p.shape[2])
    p = p[:, perm_b][:, :, perm_c]
    return JointPmf((("A", p.shape[0]), ("B", p.shape[1]), ("C", p.shape[2])), p / p.sum())


def _distinct_pmfs(n: int, dim: int, rng, delta: float = 0.1) -> list[np.ndarray]:
    for _ in range(REJECTION_BUDGET):
        out = [rng.dirichlet(np.ones(dim)) for _ in range(n)]
        if all(0.5 * np.abs(out[i] - out[j]).sum() >= delta for i in range(n) for j in range(i + 1, n)):
            return out
    raise GenError(f"cannot draw {n} distributions on {dim} letters at total variation >= {delta}")


def gen_lemma2_pmf(seed=0, max_alpha=3) -> JointPmf:
    """Strictly positive p(d) p(a|d) p(b,c|d) on alphabets A, B, C, D of size <= ``max_alpha``."""
    rng = _rng([seed, 13])
    da, db, dc, dd = (int(rng.integers(2 if i == 0 else 1, max_alpha + 1)) for i in range(4))
    pd = rng.dirichlet(np.ones(dd)) * 0.7 + 0.3 / dd
    pa = rng.dirichlet(np.ones(da), size=dd) * 0.8 + 0.2 / da
    pbc = rng.dirichlet(np.ones(db * dc), size=dd) * 0.8 + 0.2 / (db * dc)
    p = np.einsum("d,da,dx->axd", pd, pa, pbc).reshape(da, db, dc, dd)
    return JointPmf((("A", da), ("B", db), ("C", dc), ("D", dd)), p / p.sum())
