import numpy as np
import pytest

from opensystem.errors import ResourceLimitError
from opensystem.hamiltonian import coupled_harmonic
from opensystem.lattice import gaussian_packet, make_grid
from opensystem.oracle import (
    ExactPropagator,
    dense_momentum_operator,
    enumerate_unraveling,
    exact_displacement,
    exact_propagate,
    partial_trace,
)
from opensystem.states import distance, product_state, random_state, reduced_density
from opensystem.streams import STATES, stream


@pytest.fixture
def grid1():
    return make_grid(16, 10.0)


@pytest.fixture
def grid2():
    return make_grid(8, 8.0)


@pytest.fixture
def phi(grid1, grid2):
    return random_state(grid1, grid2, stream(11, STATES, 0))


def test_exact_propagator__expect_unitary(grid1, grid2):
    oracle = ExactPropagator(coupled_harmonic(coupling=0.5), grid1, grid2)

    unitary = oracle.unitary(0.8)

    assert np.allclose(unitary @ unitary.conj().T, np.eye(grid1.n * grid2.n))


def test_exact_propagator_with_opposite_signs__expect_inverse(phi):
    oracle = ExactPropagator(coupled_harmonic(coupling=0.5), phi.grid1, phi.grid2)

    restored = oracle.propagate(oracle.propagate(phi, 1.3), 1.3, sign=1)

    assert distance(restored, phi) < 1e-12


def test_exact_propagate__expect_group_property(phi):
    spec = coupled_harmonic(coupling=0.5)
    oracle = ExactPropagator(spec, phi.grid1, phi.grid2)

    first = exact_propagate(phi, spec, 0.4, propagator=oracle)
    twice = exact_propagate(first, spec, 0.6, propagator=oracle)

    assert distance(twice, oracle.propagate(phi, 1.0)) < 1e-12


def test_exact_propagator_over_cap__expect_resource_limit_error(grid1, grid2):
    with pytest.raises(ResourceLimitError):
        ExactPropagator(coupled_harmonic(), grid1, grid2, cap=100)


def test_dense_momentum_operator__expect_hermitian_and_plane_wave_eigenvector():
    grid = make_grid(16, 2 * np.pi)
    operator = dense_momentum_operator(grid)
    wave = np.exp(1j * grid.momenta[3] * grid.points)

    assert np.allclose(operator, operator.conj().T)
    assert np.allclose(operator @ wave, grid.momenta[3] * wave)


def test_exact_displacement__expect_unitary_and_shifted_packet():
    grid = make_grid(64, 16.0)
    psi = gaussian_packet(grid, width=0.8)

    displaced = exact_displacement(grid, 0.0, 1.5) @ psi

    expected = gaussian_packet(grid, center=1.5, width=0.8)
    assert np.allclose(displaced, expected, atol=1e-8)


def test_exact_displacement_over_cap__expect_resource_limit_error():
    with pytest.raises(ResourceLimitError):
        exact_displacement(make_grid(64, 10.0), 0.1, 0.1, cap=32)


def test_partial_trace__expect_same_as_reduced_density(phi):
    assert partial_trace(phi).hilbert_schmidt(reduced_density(phi)) < 1e-12


def test_partial_trace_over_cap__expect_resource_limit_error(phi):
    with pytest.raises(ResourceLimitError):
        partial_trace(phi, cap=64)


def test_enumerate_unraveling__expect_reduced_density(phi):
    assert enumerate_unraveling(phi).hilbert_schmidt(reduced_density(phi)) < 1e-12


def test_enumerate_unraveling_of_product__expect_pure_state(grid1, grid2):
    psi1 = gaussian_packet(grid1, center=1.0)
    phi = product_state(psi1, grid1, gaussian_packet(grid2), grid2)

    rho = enumerate_unraveling(phi)

    assert rho.hilbert_schmidt(np.outer(psi1, psi1.conj())) < 1e-12
