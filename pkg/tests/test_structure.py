import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmarkov.classical import JointPmf, embed
from qmarkov.entropy import MarkovChainSpec, cmi
from qmarkov.errors import MatchError, NotMarkovError, StructureError
from qmarkov.generate import (GenSpec, gen_markov_state, gen_nonunique_pair, random_density,
                              random_unitary, sample_spec)
from qmarkov.structure import (HjpBlock, HjpDecomposition, build_state, conditional_generators,
                               decompose_with_isometries, hjp_decompose, is_minimal,
                               local_unitary_equivalence, markov_decompose, match_decompositions,
                               transform_decomposition)
from qmarkov.tensor import DensityOperator, SystemLayout, kron, partial_trace

ABC = MarkovChainSpec("A", "B", "C")


def product(*dims, seed=0):
    rng = np.random.default_rng(seed)
    return kron([random_density(d, seed=rng, layout=SystemLayout(((lab, d),))) for lab, d in zip("ABCD", dims)])


def in_span(x, ops, tol=1e-9):
    m = np.array([o.ravel() for o in ops]).T
    coef, *_ = np.linalg.lstsq(m, x.ravel(), rcond=None)
    return np.linalg.norm(m @ coef - x.ravel()) <= tol


def test_generators_of_product_state_are_scalar():
    rho = DensityOperator.from_matrix(SystemLayout.of(A=2, B=3), product(2, 3).matrix)
    gens = conditional_generators(rho, ["A"])
    assert len(gens) == 4
    np.testing.assert_allclose(gens[0] + gens[1], np.eye(3), atol=1e-9)  # F = I_X
    for g in gens:
        assert np.linalg.norm(g - np.trace(g) / 3 * np.eye(3)) <= 1e-9


def test_generators_of_copy_and_bell():
    lay = SystemLayout.of(X=2, Y=2)
    copy = DensityOperator(lay, np.diag([0.5, 0, 0, 0.5]))
    for g in conditional_generators(copy, ["X"]):
        assert np.linalg.norm(g - np.diag(np.diag(g))) <= 1e-12
    psi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    bell = DensityOperator.from_matrix(lay, np.outer(psi, psi))
    gens = conditional_generators(bell, ["X"])
    e01 = np.array([[0, 1], [0, 0]])
    assert in_span(e01, gens) and in_span(e01.T, gens)


def test_product_state_single_block():
    rho = DensityOperator.from_matrix(SystemLayout.of(A=2, B=3), product(2, 3).matrix)
    dec = hjp_decompose(rho, ["A"])
    assert dec.dims == [(1, 3)]
    assert dec.residual <= 1e-10


def test_cq_state_blocks():
    rng = np.random.default_rng(2)
    q = [0.2, 0.3, 0.5]
    xs = [random_density(2, seed=rng).matrix for _ in q]
    m = sum(p * np.kron(x, np.diag(np.eye(3)[b])) for b, (p, x) in enumerate(zip(q, xs)))
    rho = DensityOperator.from_matrix(SystemLayout.of(X=2, Y=3), m)
    dec = hjp_decompose(rho, ["X"])
    assert dec.dims == [(1, 1)] * 3
    for blk in dec.blocks:
        b = int(np.argmax(np.abs(np.diag(blk.projector))))
        assert abs(blk.weight - q[b]) <= 1e-10
        np.testing.assert_allclose(blk.factor_xy1.matrix, xs[b], atol=1e-9)


def test_build_state_examples():
    lay = SystemLayout.of(X=1, Y=2)
    e = np.eye(2)
    one = DensityOperator(SystemLayout.of(X=1, Y_1=1), np.eye(1))
    y2 = DensityOperator(SystemLayout((("Y_2", 1),)), np.eye(1))
    blocks = tuple(HjpBlock(e[:, [k]], 1, 1, 0.5, one, y2) for k in range(2))
    dec = HjpDecomposition(lay, ("X",), ("Y",), blocks, np.eye(2))
    np.testing.assert_allclose(build_state(dec).matrix, np.eye(2) / 2, atol=1e-14)
    bad = HjpDecomposition(lay, ("X",), ("Y",), (HjpBlock(e, 1, 1, 1.0, one, y2),), np.eye(2))
    with pytest.raises(StructureError):
        build_state(bad)


def test_markov_decompose_product():
    rho = product(2, 2, 3, seed=4)
    dec = markov_decompose(rho, ABC)
    assert dec.dims == [(1, 2)]
    blk = dec.blocks[0]
    np.testing.assert_allclose(blk.factor_xy1.matrix, partial_trace(rho, ["A"]).matrix, atol=1e-9)
    np.testing.assert_allclose(blk.factor_y2.matrix, partial_trace(rho, ["B", "C"]).matrix, atol=1e-9)


def test_markov_decompose_not_markov():
    psi = np.zeros(8)
    psi[[0, 7]] = 1 / np.sqrt(2)
    ghz = DensityOperator.from_matrix(SystemLayout.of(A=2, B=2, C=2), np.outer(psi, psi))
    with pytest.raises(NotMarkovError):
        markov_decompose(ghz, ABC)


def test_classical_markov_chain():
    # A -> B -> C with B = (B_hi, B_lo): A depends on B_hi only, C on B_lo only
    rng = np.random.default_rng(6)
    pa_b = rng.dirichlet(np.ones(2), size=2)
    pc_b = rng.dirichlet(np.ones(2), size=2)
    p = np.zeros((2, 4, 2))
    for b in range(4):
        p[:, b, :] = 0.25 * np.outer(pa_b[b // 2], pc_b[b % 2])
    pmf = JointPmf((("A", 2), ("B", 4), ("C", 2)), p)
    dec = markov_decompose(embed(pmf), ABC)
    # two values of B_hi, each block holds the two B_lo values
    assert sorted(dec.dims) == [(1, 2), (1, 2)]
    for blk in dec.blocks:
        support = set(np.nonzero(np.diag(blk.projector).real > 0.5)[0])
        assert support in ({0, 1}, {2, 3})


@given(st.integers(0, 500))
def test_markov_round_trip(seed):
    rho, truth = gen_markov_state(sample_spec("markov", seed))
    dec = markov_decompose(rho, ABC, rng_seed=seed)
    assert sorted(dec.dims) == sorted(truth.dims)
    np.testing.assert_allclose(sorted(dec.weights), sorted(truth.weights), atol=1e-8)
    assert np.linalg.norm(build_state(dec).matrix - rho.matrix) <= 1e-7
    assert cmi(build_state(dec), "A", "C", "B") <= 1e-8
    assert abs(dec.weights.sum() - 1) <= 1e-10
    for i, a in enumerate(dec.blocks):
        for b in dec.blocks[i + 1:]:
            assert np.linalg.norm(a.isometry.conj().T @ b.isometry) <= 1e-9
    assert is_minimal(dec).minimal


def test_two_block_hidden_round_trip():
    spec = GenSpec(dict(A=2, C=2), ((2, 1), (1, 2)), weights=(0.4, 0.6), seed=3)
    rho, truth = gen_markov_state(spec)
    dec = markov_decompose(rho, ABC)
    assert dec.dims == [(2, 1), (1, 2)]
    np.testing.assert_allclose(dec.weights, [0.4, 0.6], atol=1e-10)
    match = match_decompositions(dec, truth)
    assert match.max_residual <= 1e-7


def test_rank_deficient_y_is_decomposed_on_support():
    rng = np.random.default_rng(8)
    r0, r1 = random_density(2, seed=rng).matrix, random_density(2, seed=rng).matrix
    m = 0.5 * np.kron(r0, np.diag([1, 0, 0])) + 0.5 * np.kron(r1, np.diag([0, 1, 0]))
    rho = DensityOperator.from_matrix(SystemLayout.of(X=2, Y=3), m)
    dec = hjp_decompose(rho, ["X"])
    assert dec.dims == [(1, 1), (1, 1)]
    np.testing.assert_allclose(dec.support, np.diag([1, 1, 0]), atol=1e-10)
    for blk in dec.blocks:
        assert abs(blk.projector[2, 2]) <= 1e-10


def split_block(dec, k):
    """Artificially split a (d1, d2 >= 2) block into two identical halves."""
    blk = dec.blocks[k]
    halves = []
    for half in (slice(0, 1), slice(1, 2)):
        cols = np.arange(blk.d1 * blk.d2).reshape(blk.d1, blk.d2)[:, half].ravel()
        halves.append(blk.isometry[:, cols])
    isos = [b.isometry for i, b in enumerate(dec.blocks) if i != k] + halves
    dims = [(b.d1, b.d2) for i, b in enumerate(dec.blocks) if i != k] + [(blk.d1, 1), (blk.d1, 1)]
    return isos, dims


def test_minimality_condition_ii_violation():
    # A and B1 correlated, B2 maximally mixed: one (2, 2) block
    rng = np.random.default_rng(9)
    f1 = random_density(4, seed=rng).matrix
    m = np.kron(f1, np.eye(2) / 2)
    rho = DensityOperator.from_matrix(SystemLayout.of(A=2, B=4), m)
    dec = hjp_decompose(rho, ["A"])
    assert dec.dims == [(2, 2)]
    isos, dims = split_block(dec, 0)
    split = decompose_with_isometries(rho, ["A"], ["B"], [], isos, dims)
    v = is_minimal(split)
    assert not v.minimal and v.condition == "ii" and v.witness == (0, 1)


def test_minimality_condition_i_violation():
    # cq-state written as a single block: the first factor is block diagonal
    rng = np.random.default_rng(10)
    r0, r1 = random_density(2, seed=rng).matrix, random_density(2, seed=rng).matrix
    m = 0.5 * np.kron(r0, np.diag([1, 0])) + 0.5 * np.kron(r1, np.diag([0, 1]))
    rho = DensityOperator.from_matrix(SystemLayout.of(A=2, B=2), m)
    coarse = decompose_with_isometries(rho, ["A"], ["B"], [], [np.eye(2)], [(2, 1)])
    v = is_minimal(coarse)
    assert not v.minimal and v.condition == "i" and v.witness == (0,)
    assert is_minimal(hjp_decompose(rho, ["A"])).minimal


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_local_unitary_equivalence(seed, d1):
    rng = np.random.default_rng(seed)
    sigma = random_density(2 * d1, seed=rng)
    u = random_unitary(d1, rng)
    big = np.kron(np.eye(2), u)
    tau = DensityOperator.from_matrix(sigma.layout, big @ sigma.matrix @ big.conj().T)
    ok, w, resid = local_unitary_equivalence(sigma, tau, 2)
    assert ok and resid <= 1e-7
    other = random_density(2 * d1, seed=rng)
    assert not local_unitary_equivalence(sigma, other, 2)[0]


@given(st.integers(0, 300))
def test_match_transformed_and_reseeded(seed):
    rho, _ = gen_markov_state(sample_spec("markov", seed))
    d1 = markov_decompose(rho, ABC, rng_seed=1)
    d2 = markov_decompose(rho, ABC, rng_seed=2)
    assert match_decompositions(d1, d2).max_residual <= 1e-7
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(d1.blocks))
    us = [(random_unitary(d1.blocks[k].d1, rng), random_unitary(d1.blocks[k].d2, rng)) for k in perm]
    d3 = transform_decomposition(d1, perm, us)
    assert np.linalg.norm(build_state(d3).matrix - rho.matrix) <= 1e-9
    m = match_decompositions(d1, d3)
    assert m.max_residual <= 1e-7
    assert [perm[j] for j in m.phi] == list(range(len(perm)))


def test_match_permutation_gives_identity_unitaries():
    rho, _ = gen_markov_state(GenSpec(dict(A=2, C=2), ((1, 1), (1, 2), (2, 1)), seed=5))
    d1 = markov_decompose(rho, ABC)
    perm = [2, 0, 1]
    m = match_decompositions(d1, transform_decomposition(d1, perm))
    assert [perm[j] for j in m.phi] == [0, 1, 2]
    for u1, u2 in m.unitaries:
        # identity up to a global phase split between the factors
        assert abs(abs(np.trace(np.kron(u1, u2))) - u1.shape[0] * u2.shape[0]) <= 1e-9


def test_match_fails_on_rank_deficient_pair():
    rho, first, second = gen_nonunique_pair(seed=0)
    for dec in (first, second):
        assert np.linalg.norm(build_state(dec).matrix - rho.matrix) <= 1e-12
    with pytest.raises(MatchError):
        match_decompositions(first, second)
