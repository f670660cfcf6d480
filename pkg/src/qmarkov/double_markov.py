"""Certificates for double Markovity.

``theorem1_certify`` turns simultaneous A-B-C and A-C-B into PVMs {E_B,j},
{E_C,j} with a common classical label J such that A-J-(B,C).
``theorem2_certify`` turns A-(B,D)-C and A-(C,D)-B on a full-rank state into
a block decomposition of D alone, i.e. A-D-(B,C).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import wedderburn
from .config import DEFAULT_TOLS, spawn_seeds
from .entropy import MarkovChainSpec, assert_markov, cmi, conditional_entropy
from .errors import (CertificateError, FullSupportError, LayoutError, MatchError, NotMarkovError,
                     StructureError)
from .structure import (HjpDecomposition, decompose_with_isometries, hjp_decompose,
                        markov_decompose, match_decompositions)
from .tensor import (DensityOperator, Operator, SystemLayout, partial_trace, permute,
                     support_projector, trace_distance)

__all__ = [
    "CommonLabel",
    "FineLabelTable",
    "Theorem2Certificate",
    "Verdict",
    "theorem1_certify",
    "verify_common_label",
    "label_extension",
    "theorem2_certify",
    "theorem2_converse_check",
]


@dataclass(frozen=True)
class Verdict:
    """Named checks, each ``(value, passed)``; ``ok`` is their conjunction."""

    checks: dict
    ok: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ok", all(passed for _, passed in self.checks.values()))

    def failures(self) -> list[str]:
        return [name for name, (_, passed) in self.checks.items() if not passed]


@dataclass(frozen=True, eq=False)
class FineLabelTable:
    p_kl: np.ndarray
    rho_a_given_kl: dict
    m_b: tuple[np.ndarray, ...]
    m_c: tuple[np.ndarray, ...]


@dataclass(frozen=True, eq=False)
class CommonLabel:
    a_labels: tuple[str, ...]
    b_labels: tuple[str, ...]
    c_labels: tuple[str, ...]
    labels: tuple[int, ...]
    pvm_b: tuple[np.ndarray, ...]
    pvm_c: tuple[np.ndarray, ...]
    p_j: np.ndarray
    rho_a_given_j: tuple[DensityOperator, ...]
    g1: dict = field(default_factory=dict)
    g2: dict = field(default_factory=dict)
    fine: FineLabelTable | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.labels)

    def permuted(self, perm: Sequence[int]) -> "CommonLabel":
        """Relabel: new label i carries old label ``perm[i]``."""
        inv = {old: new for new, old in enumerate(perm)}
        return CommonLabel(
            self.a_labels, self.b_labels, self.c_labels, tuple(range(len(perm))),
            tuple(self.pvm_b[p] for p in perm), tuple(self.pvm_c[p] for p in perm),
            np.asarray(self.p_j)[list(perm)], tuple(self.rho_a_given_j[p] for p in perm),
            {k: inv[j] for k, j in self.g1.items()}, {k: inv[j] for k, j in self.g2.items()},
            self.fine, dict(self.diagnostics),
        )


@dataclass(frozen=True, eq=False)
class Theorem2Certificate:
    d_decomposition: HjpDecomposition
    block_map: tuple[int, ...] = ()
    bd_decomposition: HjpDecomposition | None = None
    cd_decomposition: HjpDecomposition | None = None
    diagnostics: dict = field(default_factory=dict)


def _default_labels(layout: SystemLayout, n: int, given) -> list[tuple[str, ...]]:
    if given is None:
        if len(layout.labels) != n:
            raise LayoutError(f"expected {n} systems, layout has {layout.labels}; pass labels explicitly")
        return [(lab,) for lab in layout.labels]
    return [layout.ordered([g] if isinstance(g, str) else g) for g in given]


def _ordered_tensor(rho: Operator, groups):
    """rho permuted to group order, as a tensor with one axis pair per group."""
    order = [lab for g in groups for lab in g]
    rho = permute(partial_trace(rho, order), order)
    dims = [rho.layout.dim_of(g) for g in groups]
    return np.asarray(rho.matrix).reshape(dims + dims), dims


def _sandwich(t: np.ndarray, pb: np.ndarray, pc: np.ndarray) -> np.ndarray:
    """(I (x) pb (x) pc) rho (I (x) pb (x) pc) for a tensor with axes (a, b, c, a', b', c')."""
    return np.einsum("bB,cC,aBCdEF,Ee,Ff->abcdef", pb, pc, t, pb, pc, optimize=True)


def _reduce_a(t: np.ndarray) -> np.ndarray:
    return np.einsum("abcdbc->ad", t)


def label_extension(rho: Operator, cert: CommonLabel) -> DensityOperator:
    """rho_ABCJ = sum_j (I (x) E_Bj (x) E_Cj) rho (...) (x) |j><j|, layout A, B, C, J."""
    groups = (cert.a_labels, cert.b_labels, cert.c_labels)
    t, dims = _ordered_tensor(rho, groups)
    n = int(np.prod(dims))
    nj = max(cert.size, 1)
    out = np.zeros((n, nj, n, nj), dtype=complex)
    for j, (eb, ec) in enumerate(zip(cert.pvm_b, cert.pvm_c)):
        out[:, j, :, j] = _sandwich(t, eb, ec).reshape(n, n)
    order = [lab for g in groups for lab in g]
    layout = rho.layout.sub(order)
    layout = SystemLayout(tuple((lab, layout.dim_of([lab])) for lab in order) + (("J", nj),))
    return DensityOperator.from_matrix(layout, out.reshape(n * nj, n * nj))


def _single_link(states: list[np.ndarray], tol: float) -> list[int]:
    n = len(states)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dist[i, j] = dist[j, i] = trace_distance(states[i], states[j])
            if dist[i, j] <= tol:
                parent[find(i)] = find(j)
    roots, out = {}, []
    for i in range(n):
        out.append(roots.setdefault(find(i), len(roots)))
    for c in set(out):
        idx = [i for i in range(n) if out[i] == c]
        diam = max((dist[i, j] for i in idx for j in idx), default=0.0)
        if diam > 10 * tol:
            raise StructureError(f"label cluster has diameter {diam:.3e} > 10*group_tol", residual=diam)
    return out


def theorem1_certify(rho: Operator, tols=DEFAULT_TOLS, rng_seed=0, labels=None) -> CommonLabel:
    """Common classical label for a state with both A-B-C and A-C-B.

    ``labels`` is ``(a, b, c)`` as label sets; by default the three systems of
    the layout in order.
    """
    a, b, c = _default_labels(rho.layout, 3, labels)
    chain_b, chain_c = MarkovChainSpec(a, b, c), MarkovChainSpec(a, c, b)
    vb = assert_markov(rho, chain_b, tols.cmi, tols.eig_cutoff)
    vc = assert_markov(rho, chain_c, tols.cmi, tols.eig_cutoff)
    values = {str(chain_b): vb.cmi_value, str(chain_c): vc.cmi_value}
    if not (vb.holds and vc.holds):
        raise NotMarkovError(f"double Markov condition fails: {values}", values)
    seeds = spawn_seeds(rng_seed, 2)
    dec_b = markov_decompose(rho, chain_b, tols, seeds[0])
    dec_c = markov_decompose(rho, chain_c, tols, seeds[1])
    m_b = tuple(blk.projector for blk in dec_b.blocks)
    m_c = tuple(blk.projector for blk in dec_c.blocks)

    t, _ = _ordered_tensor(rho, (a, b, c))
    p_kl = np.zeros((len(m_b), len(m_c)))
    cond, pairs = {}, []
    for k, pb in enumerate(m_b):
        for l, pc in enumerate(m_c):
            ra = _reduce_a(_sandwich(t, pb, pc))
            p = float(np.trace(ra).real)
            p_kl[k, l] = max(p, 0.0)
            if p > tols.weight_floor:
                cond[(k, l)] = ra / p
                pairs.append((k, l))
    fine = FineLabelTable(p_kl, cond, m_b, m_c)

    cluster = _single_link([cond[kl] for kl in pairs], tols.group_tol)
    g1, g2 = {}, {}
    for (k, l), j in zip(pairs, cluster):
        if g1.setdefault(k, j) != j or g2.setdefault(l, j) != j:
            raise StructureError(f"fine pair {(k, l)} breaks label consistency g1(k) = g2(l)")
    if set(g1) != set(range(len(m_b))) or set(g2) != set(range(len(m_c))):
        raise StructureError("a block carries no surviving fine pair")
    nj = len(set(cluster))
    dim_b, dim_c = m_b[0].shape[0], m_c[0].shape[0]
    e_b = [sum((m_b[k] for k in g1 if g1[k] == j), np.zeros((dim_b, dim_b), dtype=complex)) for j in range(nj)]
    e_c = [sum((m_c[l] for l in g2 if g2[l] == j), np.zeros((dim_c, dim_c), dtype=complex)) for j in range(nj)]
    p_j, rho_a = [], []
    a_layout = rho.layout.sub(a)
    for eb, ec in zip(e_b, e_c):
        ra = _reduce_a(_sandwich(t, eb, ec))
        pj = float(np.trace(ra).real)
        p_j.append(pj)
        rho_a.append(DensityOperator.from_matrix(a_layout, ra / pj))
    cert = CommonLabel(a, b, c, tuple(range(nj)), tuple(e_b), tuple(e_c), np.array(p_j),
                       tuple(rho_a), g1, g2, fine)

    ext = label_extension(rho, cert)
    eq2 = _block_diag_residual(rho, cert, ext)
    cmi_j = cmi(ext, set(a), set(b) | set(c), {"J"}, tols.eig_cutoff)
    diagnostics = {"chain_cmi": values, "eq2_residual": eq2, "cmi_a_bc_given_j": cmi_j,
                   "b_blocks": dec_b.dims, "c_blocks": dec_c.dims}
    if eq2 > tols.recon or cmi_j > tols.cmi:
        raise CertificateError("assembled label fails its checks", diagnostics)
    return CommonLabel(a, b, c, cert.labels, cert.pvm_b, cert.pvm_c, cert.p_j, cert.rho_a_given_j,
                       g1, g2, fine, diagnostics)


def _block_diag_residual(rho: Operator, cert: CommonLabel, ext: DensityOperator) -> float:
    order = [lab for g in (cert.a_labels, cert.b_labels, cert.c_labels) for lab in g]
    original = permute(partial_trace(rho, order), order)
    pinched = partial_trace(ext, order)
    return float(np.linalg.norm(np.asarray(pinched.matrix) - np.asarray(original.matrix)))


def _projector_error(e: np.ndarray) -> float:
    return float(max(np.linalg.norm(e @ e - e), np.linalg.norm(e - e.conj().T)))


def verify_common_label(rho: Operator, cert: CommonLabel, tols=DEFAULT_TOLS) -> Verdict:
    """Re-check a certificate against ``rho``; failures are reported, never raised."""
    a, b, c = cert.a_labels, cert.b_labels, cert.c_labels
    checks = {}
    proj_err = max([_projector_error(e) for e in cert.pvm_b + cert.pvm_c], default=0.0)
    checks["projectors"] = (proj_err, proj_err <= 1e-9)
    for name, pvm, side in (("sum_b", cert.pvm_b, b), ("sum_c", cert.pvm_c, c)):
        supp = np.asarray(support_projector(partial_trace(rho, side), tols.eig_cutoff).matrix)
        err = float(np.linalg.norm(sum(pvm, np.zeros_like(supp)) - supp))
        checks[name] = (err, err <= 1e-9)
    ext = label_extension(rho, cert)
    eq2 = _block_diag_residual(rho, cert, ext)
    checks["block_diagonal"] = (eq2, eq2 <= tols.recon)
    dmin = min((trace_distance(r1, r2) for i, r1 in enumerate(cert.rho_a_given_j)
                for r2 in cert.rho_a_given_j[i + 1:]), default=np.inf)
    checks["distinct_conditionals"] = (dmin, dmin >= tols.group_tol)
    s_jb = conditional_entropy(ext, {"J"}, set(b), tols.eig_cutoff)
    s_jc = conditional_entropy(ext, {"J"}, set(c), tols.eig_cutoff)
    checks["S(J|B)"] = (s_jb, abs(s_jb) <= 1e-8)
    checks["S(J|C)"] = (s_jc, abs(s_jc) <= 1e-8)
    cmi_j = cmi(ext, set(a), set(b) | set(c), {"J"}, tols.eig_cutoff)
    checks["I(A;BC|J)"] = (cmi_j, cmi_j <= tols.cmi)
    i_acb = cmi(rho, set(a), set(c), set(b), tols.eig_cutoff)
    i_abc = cmi(rho, set(a), set(b), set(c), tols.eig_cutoff)
    checks["I(A;C|B)"] = (i_acb, i_acb <= tols.cmi)
    checks["I(A;B|C)"] = (i_abc, i_abc <= tols.cmi)
    return Verdict(checks)


def _extend_isometry(iso: np.ndarray, y_layout: SystemLayout, extra: SystemLayout,
                     full: SystemLayout) -> np.ndarray:
    """iso (x) I_extra with rows reordered to ``full`` and columns (i, b, extra) with extra fastest."""
    m = iso.shape[1]
    de = extra.total_dim
    t = np.einsum("ya,ce->ycae", iso, np.eye(de)).reshape(y_layout.dims + extra.dims + (m * de,))
    src = y_layout.labels + extra.labels
    perm = [src.index(lab) for lab in full.labels] + [len(src)]
    return t.transpose(perm).reshape(full.total_dim, m * de)


def _extended(rho, dec: HjpDecomposition, extra_labels, y_full, tols) -> HjpDecomposition:
    layout = rho.layout
    extra = layout.sub(extra_labels)
    isos = [_extend_isometry(b.isometry, dec.y_layout, extra, layout.sub(y_full)) for b in dec.blocks]
    dims = [(b.d1, b.d2 * extra.total_dim) for b in dec.blocks]
    return decompose_with_isometries(rho, dec.x_labels, y_full, (), isos, dims, tols)


def _d_parts(dec: HjpDecomposition, drop_labels, keep_labels) -> tuple[list[np.ndarray], float]:
    """Block-algebra matrix units written as I_drop (x) Z_keep, plus the worst leak residual."""
    y = dec.y_layout
    order = tuple(drop_labels) + tuple(keep_labels)
    dd = y.dim_of(drop_labels)
    dk = y.dim_of(keep_labels)
    parts, leak = [], 0.0
    for blk in dec.blocks:
        for i in range(blk.d1):
            for j in range(blk.d1):
                e = np.zeros((blk.d1, blk.d1))
                e[i, j] = 1
                op = blk.isometry @ np.kron(e, np.eye(blk.d2)) @ blk.isometry.conj().T
                op = np.asarray(permute(Operator(y, op), order).matrix)
                z = np.einsum("aiak->ik", op.reshape(dd, dk, dd, dk)) / dd
                leak = max(leak, float(np.linalg.norm(op - np.kron(np.eye(dd), z))))
                parts.append(z)
    return parts, leak


def theorem2_certify(rho: Operator, tols=DEFAULT_TOLS, rng_seed=0, labels=None) -> Theorem2Certificate:
    """Block decomposition of D certifying A-D-(B,C) for a full-rank state with
    A-(B,D)-C and A-(C,D)-B."""
    a, b, c, d = _default_labels(rho.layout, 4, labels)
    rho = partial_trace(rho, a + b + c + d)
    lmin = float(np.linalg.eigvalsh(np.asarray(rho.matrix))[0])
    if lmin < tols.pos_floor:
        raise FullSupportError(f"state is not strictly positive: min eigenvalue {lmin:.3e} < {tols.pos_floor:.1e}")
    chain_bd = MarkovChainSpec(a, set(b) | set(d), c)
    chain_cd = MarkovChainSpec(a, set(c) | set(d), b)
    v1 = assert_markov(rho, chain_bd, tols.cmi, tols.eig_cutoff)
    v2 = assert_markov(rho, chain_cd, tols.cmi, tols.eig_cutoff)
    values = {str(chain_bd): v1.cmi_value, str(chain_cd): v2.cmi_value}
    if not (v1.holds and v2.holds):
        raise NotMarkovError(f"conditional double Markov condition fails: {values}", values)

    seeds = spawn_seeds(rng_seed, 3)
    layout = rho.layout
    bd = layout.ordered(b + d)
    cd = layout.ordered(c + d)
    bcd = layout.ordered(b + c + d)
    dec_bd = hjp_decompose(partial_trace(rho, a + bd), a, tols, seeds[0])
    dec_cd = hjp_decompose(partial_trace(rho, a + cd), a, tols, seeds[1])
    ext_bd = _extended(rho, dec_bd, c, bcd, tols)
    ext_cd = _extended(rho, dec_cd, b, bcd, tols)
    try:
        match = match_decompositions(ext_bd, ext_cd, tols)
    except MatchError as exc:
        raise StructureError(f"(B,D) and (C,D) decompositions do not match: {exc}") from exc

    parts_b, leak_b = _d_parts(dec_bd, b, d)
    parts_c, leak_c = _d_parts(dec_cd, c, d)
    leak = max(leak_b, leak_c)
    if leak > tols.recon:
        raise StructureError(f"first factor is not carried by D alone (leak {leak:.3e})", residual=leak)
    dd = layout.dim_of(d)
    st = wedderburn(parts_b, dd, tols, seeds[2])
    d_dec = decompose_with_isometries(rho, a, d, b + c, [blk.isometry for blk in st.blocks], st.dims, tols)

    # D-blocks correspond to (B,D)-blocks through their projectors
    db = layout.dim_of(b)
    proj_bd = [np.einsum("aiak->ik", np.asarray(permute(Operator(dec_bd.y_layout, blk.projector), b + d).matrix)
                         .reshape(db, dd, db, dd)) / db for blk in dec_bd.blocks]
    d_of_bd = []
    for pk in proj_bd:
        hits = [i for i, blk in enumerate(d_dec.blocks) if np.linalg.norm(blk.projector - pk) <= 1e-6]
        if len(hits) != 1:
            raise StructureError("D blocks do not correspond one-to-one with (B,D) blocks")
        d_of_bd.append(hits[0])

    cmi_d = cmi(rho, set(a), set(b) | set(c), set(d), tols.eig_cutoff)
    diagnostics = {"chain_cmi": values, "match_residual": match.max_residual, "leak": leak,
                   "reconstruction": d_dec.residual, "cmi_a_bc_given_d": cmi_d,
                   "bd_blocks": dec_bd.dims, "cd_blocks": dec_cd.dims, "d_blocks": d_dec.dims,
                   "d_block_of_bd_block": d_of_bd}
    if cmi_d > tols.cmi:
        raise CertificateError("assembled D decomposition leaves I(A;BC|D) above tolerance", diagnostics)
    return Theorem2Certificate(d_dec, match.phi, dec_bd, dec_cd, diagnostics)


def theorem2_converse_check(rho: Operator, tols=DEFAULT_TOLS, labels=None) -> Verdict:
    """If I(A;BC|D) <= tol then both I(A;C|BD) and I(A;B|CD) must be <= tol + slack."""
    a, b, c, d = (set(s) for s in _default_labels(rho.layout, 4, labels))
    i_d = cmi(rho, a, b | c, d, tols.eig_cutoff)
    i_bd = cmi(rho, a, c, b | d, tols.eig_cutoff)
    i_cd = cmi(rho, a, b, c | d, tols.eig_cutoff)
    premise = i_d <= tols.cmi
    bound = tols.cmi + tols.slack
    return Verdict({
        "I(A;BC|D)": (i_d, True),
        "I(A;C|BD)": (i_bd, (not premise) or i_bd <= bound),
        "I(A;B|CD)": (i_cd, (not premise) or i_cd <= bound),
    })
