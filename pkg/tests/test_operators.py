import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridfilter.operators import (
    DensityMatrixError,
    DimensionError,
    FockTruncation,
    TruncationError,
    annihilation,
    check_density_matrix,
    coherent_leakage,
    coherent_state,
    commutator,
    dag,
    dissipator,
    identity,
    is_hermitian,
    lindblad,
    lindblad_state,
    minimal_cutoff,
    pauli,
    project_density_matrix,
    tensor,
    trace_distance,
)

from conftest import random_density, random_hermitian, random_operator

SX, SY, SZ = pauli("x"), pauli("y"), pauli("z")
I2 = identity(2)


def test_pauli_matrices():
    assert np.array_equal(SX, [[0, 1], [1, 0]])
    assert np.array_equal(SY, [[0, -1j], [1j, 0]])
    assert np.array_equal(SZ, [[1, 0], [0, -1]])
    assert np.array_equal(pauli("minus"), [[0, 0], [1, 0]])
    assert np.array_equal(pauli("plus"), [[0, 1], [0, 0]])
    with pytest.raises(ValueError):
        pauli("w")


def test_pauli_commutators_exact():
    assert np.array_equal(commutator(SX, SY), 2j * SZ)
    assert np.array_equal(commutator(SZ, SX), 2j * SY)
    assert np.array_equal(commutator(SY, SZ), 2j * SX)


def test_pauli_squares_exact():
    for s in (SX, SY, SZ):
        assert np.array_equal(s @ s, I2)


def test_ladder_operators_are_adjoint():
    assert np.array_equal(dag(pauli("minus")), pauli("plus"))
    assert np.array_equal(pauli("plus") + pauli("minus"), SX)


def test_annihilation_small_cutoffs():
    assert np.array_equal(annihilation(FockTruncation(2)), [[0, 1], [0, 0]])
    a = annihilation(3)
    expected = np.zeros((3, 3))
    expected[0, 1] = 1
    expected[1, 2] = math.sqrt(2)
    assert np.array_equal(a, expected)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_canonical_commutator_away_from_cutoff(n):
    a = annihilation(n)
    c = commutator(a, dag(a))
    assert np.allclose(c[: n - 1, : n - 1], np.eye(n - 1), atol=1e-14)
    # the truncation error sits in the last level
    assert c[n - 1, n - 1] == pytest.approx(-(n - 1))


def test_truncation_rejects_tiny_cutoff():
    with pytest.raises(ValueError):
        FockTruncation(1)


def test_tensor_examples():
    assert np.array_equal(tensor(identity(2), identity(3)), identity(6))
    assert np.array_equal(np.diag(tensor(SZ, identity(2))).real, [1, 1, -1, -1])


def test_tensor_trace_multiplicative_and_associative(rng):
    for _ in range(10):
        A, B, C = random_operator(rng, 2), random_operator(rng, 3), random_operator(rng, 2)
        assert np.trace(tensor(A, B)) == pytest.approx(np.trace(A) * np.trace(B), rel=1e-12)
        assert np.allclose(tensor(tensor(A, B), C), tensor(A, tensor(B, C)), atol=1e-12)


def test_dimension_mismatch_is_rejected():
    with pytest.raises(DimensionError):
        commutator(SX, identity(3))
    with pytest.raises(DimensionError):
        lindblad(SX, SX, identity(3))


@pytest.mark.parametrize("k1", [0.55, 1.0, 2.3])
def test_lindblad_decay_of_pauli_observables(k1):
    L = math.sqrt(k1) * pauli("minus")
    H = np.zeros((2, 2))
    assert np.allclose(lindblad(L, H, SX), -(k1 / 2) * SX, atol=1e-15)
    assert np.allclose(lindblad(L, H, SY), -(k1 / 2) * SY, atol=1e-15)
    assert np.allclose(lindblad(L, H, SZ), -k1 * (I2 + SZ), atol=1e-15)


def test_lindblad_closed_system_limit(rng):
    H = random_hermitian(rng, 3)
    X = random_operator(rng, 3)
    assert np.allclose(lindblad(np.zeros((3, 3)), H, X), 1j * commutator(H, X), atol=1e-14)


def test_dissipator_is_lindblad_state_without_hamiltonian(rng):
    L, rho = random_operator(rng, 4), random_density(rng, 4)
    assert np.allclose(dissipator(L, rho), lindblad_state(L, np.zeros((4, 4)), rho), atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 6))
def test_lindblad_state_preserves_trace(seed, d):
    rng = np.random.default_rng(seed)
    L, H, rho = random_operator(rng, d), random_hermitian(rng, d), random_density(rng, d)
    scale = max(1.0, np.abs(L).max() ** 2)
    assert abs(np.trace(lindblad_state(L, H, rho))) <= 10 * np.finfo(float).eps * d * d * scale


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 6))
def test_heisenberg_and_state_generators_are_adjoint(seed, d):
    rng = np.random.default_rng(seed)
    L, H = random_operator(rng, d), random_hermitian(rng, d)
    X, rho = random_operator(rng, d), random_density(rng, d)
    lhs = np.trace(lindblad(L, H, X) @ rho)
    rhs = np.trace(X @ lindblad_state(L, H, rho))
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_vacuum_coherent_state():
    rho = coherent_state(0.0, FockTruncation(4))
    expected = np.zeros((4, 4))
    expected[0, 0] = 1
    assert np.allclose(rho, expected, atol=0)


def test_coherent_state_quadrature_mean():
    rho = coherent_state(0.25, FockTruncation(8))
    a = annihilation(8)
    assert np.trace(rho @ (a + dag(a)) / 2).real == pytest.approx(0.25, abs=1e-6)


def test_coherent_state_prenormalization_norm():
    # oracle: the truncated Poisson series, summed directly
    series = math.exp(-0.0625) * sum(0.0625**n / math.factorial(n) for n in range(8))
    assert 1 - coherent_leakage(0.25, 8) == pytest.approx(series, rel=1e-15)


@pytest.mark.parametrize("beta", [0.25, 0.5 - 0.3j, 1.2j])
def test_coherent_state_is_a_pure_density_matrix(beta):
    n = minimal_cutoff(beta)
    rho = coherent_state(beta, FockTruncation(n))
    check_density_matrix(rho)
    assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-12)
    a = annihilation(n)
    assert np.trace(rho @ a) == pytest.approx(beta, abs=1e-3)


def test_coherent_state_rejects_leaky_truncation():
    # |beta|^8/4! e^-|beta|^2 ~ 6e-7 is the first tail below 1e-6
    with pytest.raises(TruncationError, match=r"n' >= 4"):
        coherent_state(0.25, FockTruncation(2))
    assert minimal_cutoff(0.25) == 4
    # a looser bound accepts the same cutoff
    coherent_state(0.25, FockTruncation(2), eps=1e-2)


def test_density_matrix_checks(rng):
    rho = random_density(rng, 3)
    check_density_matrix(rho)
    with pytest.raises(DensityMatrixError):
        check_density_matrix(rho + 1e-6 * np.diag([1, 0, 0]))
    with pytest.raises(DensityMatrixError):
        check_density_matrix(rho + 1e-6j * np.triu(np.ones((3, 3)), 1))
    with pytest.raises(DensityMatrixError):
        check_density_matrix(np.diag([1.1, -0.1]))
    with pytest.raises(DensityMatrixError):
        check_density_matrix(np.ones(3) / 3)


def test_projection_repairs_small_defects(rng):
    rho = random_density(rng, 4, rank=1)
    bad = rho + 1e-4 * random_hermitian(rng, 4) + 1e-6j * random_operator(rng, 4)
    fixed, change = project_density_matrix(bad)
    check_density_matrix(fixed)
    assert change < 1e-2
    assert trace_distance(fixed, rho) < 1e-3
    same, change = project_density_matrix(rho)
    assert np.allclose(same, rho, atol=1e-12)
    assert change < 1e-12


def test_trace_distance_bounds(rng):
    a, b = random_density(rng, 3), random_density(rng, 3)
    assert trace_distance(a, a) == pytest.approx(0, abs=1e-14)
    assert 0 <= trace_distance(a, b) <= 1
    up, down = np.diag([1.0, 0]), np.diag([0, 1.0])
    assert trace_distance(up, down) == pytest.approx(1.0)


def test_is_hermitian():
    assert is_hermitian(SY)
    assert not is_hermitian(pauli("minus"))
