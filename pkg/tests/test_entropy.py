import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from qmarkov.entropy import (MarkovChainSpec, assert_markov, cmi, conditional_entropy, entropy_of,
                             parse_chain, von_neumann_entropy)
from qmarkov.errors import LayoutError
from qmarkov.generate import random_density, random_unitary
from qmarkov.tensor import DensityOperator, SystemLayout, kron

LN2 = np.log(2)


def logm_entropy(m):
    """-Tr rho log rho through the matrix logarithm (full-rank input only)."""
    return float(-np.trace(m @ scipy.linalg.logm(m)).real)


def ghz(mixed):
    lay = SystemLayout.of(A=2, B=2, C=2)
    if mixed:
        return DensityOperator(lay, np.diag([0.5, 0, 0, 0, 0, 0, 0, 0.5]))
    psi = np.zeros(8)
    psi[[0, 7]] = 1 / np.sqrt(2)
    return DensityOperator.from_matrix(lay, np.outer(psi, psi))


@pytest.mark.parametrize("d", range(1, 9))
def test_maximally_mixed_and_pure(d):
    assert abs(von_neumann_entropy(np.eye(d) / d) - np.log(d)) <= 1e-10
    assert abs(von_neumann_entropy(random_density(d, rank=1, seed=d))) <= 1e-10


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_entropy_matches_logm(d, seed):
    rho = random_density(d, seed=seed)
    assert abs(von_neumann_entropy(rho) - logm_entropy(np.asarray(rho.matrix))) <= 1e-9


def test_ghz_values():
    assert abs(cmi(ghz(True), "A", "C", "B")) <= 1e-12
    assert abs(cmi(ghz(False), "A", "C", "B") - LN2) <= 1e-12
    assert abs(cmi(ghz(False), "A", "C") - LN2) <= 1e-12  # I(A;C) of pure GHZ
    assert abs(conditional_entropy(ghz(False), "A", ["B", "C"]) + LN2) <= 1e-12


def test_product_state_cmi_zero():
    rng = np.random.default_rng(5)
    parts = [random_density(d, seed=rng, layout=SystemLayout(((lab, d),))) for lab, d in zip("ABC", (2, 3, 2))]
    rho = kron(parts)
    assert abs(cmi(rho, "A", "C", "B")) <= 1e-12
    assert abs(cmi(rho, "A", ["B", "C"])) <= 1e-12


@given(st.tuples(*(st.integers(1, 3),) * 3), st.integers(0, 2**32 - 1))
def test_strong_subadditivity(dims, seed):
    lay = SystemLayout(tuple(zip("ABC", dims)))
    rho = random_density(lay.total_dim, seed=seed, layout=lay)
    assert cmi(rho, "A", "C", "B") >= -1e-9
    assert cmi(rho, "A", "C") >= -1e-9


@given(st.integers(0, 2**32 - 1))
def test_cmi_local_unitary_invariant(seed):
    rng = np.random.default_rng(seed)
    lay = SystemLayout.of(A=2, B=3, C=2)
    rho = random_density(12, seed=rng, layout=lay)
    u = np.kron(np.kron(random_unitary(2, rng), random_unitary(3, rng)), random_unitary(2, rng))
    rot = DensityOperator.from_matrix(lay, u @ rho.matrix @ u.conj().T)
    assert abs(cmi(rho, "A", "C", "B") - cmi(rot, "A", "C", "B")) <= 1e-10


def test_chain_rule():
    rho = random_density(24, seed=9, layout=SystemLayout.of(A=2, B=3, C=2, D=2))
    # I(A; CD | B) = I(A; C | B) + I(A; D | BC)
    lhs = cmi(rho, "A", ["C", "D"], "B")
    rhs = cmi(rho, "A", "C", "B") + cmi(rho, "A", "D", ["B", "C"])
    assert abs(lhs - rhs) <= 1e-10


def test_overlap_rejected():
    rho = ghz(True)
    with pytest.raises(LayoutError):
        cmi(rho, "A", "A", "B")
    with pytest.raises(LayoutError):
        cmi(rho, "A", "C", ["A", "B"])


def test_entropy_of_empty_is_zero():
    assert entropy_of(ghz(True), []) == 0.0


def test_parse_chain():
    c = parse_chain("A-(B,D)-C")
    assert c.head == {"A"} and c.pivot == {"B", "D"} and c.tail == {"C"}
    assert str(c) == "A-(B,D)-C"
    assert parse_chain(" A - B - C ") == MarkovChainSpec("A", "B", "C")
    with pytest.raises(LayoutError):
        parse_chain("A-B")
    with pytest.raises(LayoutError):
        parse_chain("A-A-C")


def test_assert_markov_verdicts():
    assert assert_markov(ghz(True), parse_chain("A-B-C")).holds
    v = assert_markov(ghz(False), parse_chain("A-B-C"))
    assert not v.holds and abs(v.cmi_value - LN2) <= 1e-12
