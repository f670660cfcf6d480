import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import block_diag

from qmarkov.algebra import (AlgebraBasis, central_projections, commutant, factor_block, span_closure,
                             wedderburn)
from qmarkov.errors import StructureError
from qmarkov.generate import random_unitary


def matrix_units(d):
    out = []
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d))
            e[i, j] = 1
            out.append(e)
    return out


def block_algebra_gens(sizes, rng, mult=None):
    """Random generators of a direct sum of M_{d_k} (x) I_{m_k}, scrambled by a unitary."""
    mult = mult or [1] * len(sizes)
    gens = []
    for _ in range(2):
        parts = [np.kron(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)), np.eye(m))
                 for d, m in zip(sizes, mult)]
        gens.append(block_diag(*parts))
    n = gens[0].shape[0]
    u = random_unitary(n, rng)
    return [u @ g @ u.conj().T for g in gens], u


def check_structure(st_, gens):
    alg = st_.algebra
    total = sum(b.projector for b in st_.blocks)
    np.testing.assert_allclose(total, alg.unit, atol=1e-9)
    for i, a in enumerate(st_.blocks):
        for b in st_.blocks[i + 1:]:
            assert np.linalg.norm(a.projector @ b.projector) <= 1e-9
    assert sum(b.d1 * b.d2 for b in st_.blocks) == round(np.trace(alg.unit).real)
    assert st_.max_form_residual() <= 1e-8
    for g in gens:
        np.testing.assert_allclose(st_.reconstruct(g), alg.unit @ g @ alg.unit, atol=1e-7)


def test_identity_generates_scalars():
    alg = span_closure([np.eye(3)], 3)
    assert alg.dim == 1
    np.testing.assert_allclose(alg.basis_ops[0], np.eye(3) / np.sqrt(3), atol=1e-12)


def test_full_algebra():
    assert span_closure(matrix_units(3), 3).dim == 9


def test_diagonal_algebra():
    alg = span_closure([np.diag([1.0, 2.0, 3.0])], 3)
    assert alg.dim == 3
    projs = central_projections(alg)
    assert len(projs) == 3 and all(round(np.trace(p).real) == 1 for p in projs)


def test_empty_generators():
    assert span_closure([], 3).dim == 0


@given(st.integers(0, 2**32 - 1))
def test_basis_orthonormal_and_closed(seed):
    rng = np.random.default_rng(seed)
    gens, _ = block_algebra_gens([2, 1], rng, [1, 2])
    alg = span_closure(gens, 4)
    np.testing.assert_allclose(alg.gram(), np.eye(alg.dim), atol=1e-9)
    assert alg.closure_residual() <= 1e-8
    assert alg.dim == 4 + 1
    # idempotent
    assert span_closure(list(alg.basis_ops), 4).dim == alg.dim


def test_m2_plus_m2_central_projections():
    rng = np.random.default_rng(0)
    gens = [block_diag(rng.standard_normal((2, 2)), rng.standard_normal((2, 2))) for _ in range(2)]
    projs = central_projections(span_closure(gens, 4))
    expect = [np.diag([1.0, 1, 0, 0]), np.diag([0.0, 0, 1, 1])]
    assert len(projs) == 2
    for p in projs:
        assert min(np.linalg.norm(p - e) for e in expect) <= 1e-9


def test_factor_block_cases():
    x = np.random.default_rng(1).standard_normal((2, 2))
    alg = span_closure([np.kron(x, np.eye(2)), np.kron(x.T, np.eye(2))], 4)
    d1, d2, iso = factor_block(alg, alg.unit)
    assert (d1, d2) == (2, 2)
    np.testing.assert_allclose(iso.conj().T @ iso, np.eye(4), atol=1e-10)
    assert factor_block(span_closure([np.eye(3)], 3), np.eye(3))[:2] == (1, 3)
    assert factor_block(span_closure(matrix_units(3), 3), np.eye(3))[:2] == (3, 1)


def test_factor_block_rejects_non_algebra():
    # not closed: a "block" whose elements have uneven multiplicities
    bogus = AlgebraBasis(3, np.array([np.diag([1.0, 1.0, 2.0]) / np.sqrt(6)]), np.eye(3))
    with pytest.raises(StructureError):
        factor_block(bogus, np.eye(3))


def test_wedderburn_examples():
    assert wedderburn([np.eye(4)], 4).dims == [(1, 4)]
    rng = np.random.default_rng(7)
    gens, _ = block_algebra_gens([2, 3], rng)
    st_ = wedderburn(gens, 5)
    assert st_.dims == [(3, 1), (2, 1)]
    check_structure(st_, gens)
    x = rng.standard_normal((2, 2))
    assert wedderburn([np.kron(x, np.eye(2)), np.eye(4)], 4).dims == [(2, 2)]


@given(st.integers(0, 2**32 - 1),
       st.lists(st.tuples(st.integers(1, 3), st.integers(1, 2)), min_size=1, max_size=3))
def test_wedderburn_recovers_constructed_blocks(seed, blocks):
    rng = np.random.default_rng(seed)
    sizes, mult = [b[0] for b in blocks], [b[1] for b in blocks]
    gens, u = block_algebra_gens(sizes, rng, mult)
    st_ = wedderburn(gens, sum(d * m for d, m in blocks), rng_seed=seed)
    # equal-dims blocks stay separate since their random generator parts differ
    assert sorted(st_.dims) == sorted(blocks)
    check_structure(st_, gens)


@given(st.integers(0, 2**32 - 1))
def test_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    gens, _ = block_algebra_gens([2, 1], rng, [1, 2])
    u = random_unitary(4, rng)
    a = wedderburn(gens, 4, rng_seed=1)
    b = wedderburn([u @ g @ u.conj().T for g in gens], 4, rng_seed=2)
    assert sorted(a.dims) == sorted(b.dims)
    for pa in a.blocks:
        moved = u @ pa.projector @ u.conj().T
        assert min(np.linalg.norm(moved - pb.projector) for pb in b.blocks) <= 1e-7


def test_commutant_duality():
    rng = np.random.default_rng(3)
    gens, _ = block_algebra_gens([2, 1], rng, [2, 3])
    st_ = wedderburn(gens, 7)
    com = commutant(st_.algebra)
    dual = wedderburn(list(com.basis_ops), 7)
    assert sorted(dual.dims) == sorted((d2, d1) for d1, d2 in st_.dims)


def test_deterministic():
    rng = np.random.default_rng(11)
    gens, _ = block_algebra_gens([2, 2], rng, [1, 2])
    a, b = wedderburn(gens, 6, rng_seed=5), wedderburn(gens, 6, rng_seed=5)
    for x, y in zip(a.blocks, b.blocks):
        assert np.array_equal(x.isometry, y.isometry)
