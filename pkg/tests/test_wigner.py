import math

import numpy as np
import pytest

from opensystem.errors import DomainError, ResourceLimitError, ShapeError
from opensystem.lattice import gaussian_packet, make_grid
from opensystem.oracle import exact_displacement
from opensystem.states import (
    CompositeState,
    marginal_density_1,
    mixture,
    momentum_density,
    product_state,
    projector,
    purity,
    reduced_density,
)
from opensystem.wigner import (
    CHARACTERISTIC_CAP,
    WignerTable,
    joint_wigner,
    marginalize_wigner,
    overlap,
    slice_4d,
    weyl_characteristic,
    wigner_from_characteristic,
    wigner_from_density,
    wigner_marginals,
)


@pytest.fixture
def grid():
    return make_grid(64, 16.0)


@pytest.fixture
def small():
    return make_grid(32, 12.0)


@pytest.fixture
def entangled(small):
    left = np.outer(gaussian_packet(small, -2.0), gaussian_packet(small, -1.5))
    right = np.outer(gaussian_packet(small, 2.0), gaussian_packet(small, 1.5))
    return CompositeState.normalized(small, small, left + right)


def test_wigner_from_density_of_ground_state__expect_gaussian_peak(grid):
    table = wigner_from_density(projector(gaussian_packet(grid), grid))

    center = grid.n // 2
    assert grid.points[center] == 0.0
    assert grid.sorted_momenta[center] == 0.0
    assert table.values[center, center] == pytest.approx(1 / math.pi, abs=1e-8)
    assert table.mass() == pytest.approx(1.0, abs=1e-10)
    assert table.imag_residue < 1e-10


def test_wigner_from_density_of_boosted_packet__expect_peak_at_momentum(grid):
    psi = gaussian_packet(grid, center=-1.0, momentum=2.0)

    table = wigner_from_density(projector(psi, grid))

    k, j = np.unravel_index(np.argmax(table.values), table.values.shape)
    assert grid.points[k] == pytest.approx(-1.0)
    assert abs(grid.sorted_momenta[j] - 2.0) <= grid.momentum_step / 2


def test_wigner_from_density_of_cat_state__expect_negative_values(grid):
    psi = gaussian_packet(grid, center=-3.0) + gaussian_packet(grid, center=3.0)
    rho = projector(psi / np.sqrt(np.sum(np.abs(psi) ** 2) * grid.step), grid)

    table = wigner_from_density(rho)

    assert table.values.min() < -0.1
    assert table.mass() == pytest.approx(1.0, abs=1e-10)


def test_wigner_marginals__expect_position_and_momentum_densities(entangled):
    rho = reduced_density(entangled)

    position, momentum = wigner_marginals(wigner_from_density(rho))

    assert np.allclose(position, marginal_density_1(entangled).weights, atol=1e-10)
    assert np.allclose(momentum, momentum_density(rho), atol=1e-10)


def test_marginalize_wigner__expect_same_as_reduced_path(entangled):
    direct = wigner_from_density(reduced_density(entangled))

    through_joint = marginalize_wigner(joint_wigner(entangled))

    assert np.max(np.abs(direct.values - through_joint.values)) < 1e-10


def test_joint_wigner_of_product__expect_product_of_tables(small):
    psi1 = gaussian_packet(small, center=1.0, width=0.8)
    psi2 = gaussian_packet(small, momentum=1.0)
    phi = product_state(psi1, small, psi2, small)

    joint = joint_wigner(phi)

    w1 = wigner_from_density(projector(psi1, small)).values
    w2 = wigner_from_density(projector(psi2, small)).values
    assert np.allclose(joint.values, np.multiply.outer(w1, w2), atol=1e-12)
    assert joint.mass() == pytest.approx(1.0, abs=1e-10)


def test_joint_wigner_over_cap__expect_resource_limit_error(entangled):
    with pytest.raises(ResourceLimitError):
        joint_wigner(entangled, memory_cap=1000)


def test_marginalize_wigner_of_single_table__expect_domain_error(grid):
    table = wigner_from_density(projector(gaussian_packet(grid), grid))

    with pytest.raises(DomainError):
        marginalize_wigner(table)


def test_wigner_marginals_of_joint_table__expect_domain_error(entangled):
    with pytest.raises(DomainError):
        wigner_marginals(joint_wigner(entangled))


def test_slice_4d__expect_environment_cell_plane(entangled, small):
    joint = joint_wigner(entangled)

    plane = slice_4d(joint, 3, 5)

    assert plane.grids == (small,)
    assert np.array_equal(plane.values, joint.values[:, :, 3, 5])


def test_slice_4d_out_of_range__expect_shape_error(entangled):
    with pytest.raises(ShapeError):
        slice_4d(joint_wigner(entangled), 0, 32)


def test_wigner_table_with_wrong_shape__expect_shape_error(grid):
    with pytest.raises(ShapeError):
        WignerTable((grid,), np.zeros((grid.n, grid.n + 1)))


def test_overlap__expect_trace_of_product(grid):
    a = projector(gaussian_packet(grid, center=-0.5, width=0.7), grid)
    b = projector(gaussian_packet(grid, center=0.5, momentum=0.5, width=1.0), grid)

    value = overlap(wigner_from_density(a), wigner_from_density(b))

    exact = float(np.trace(a.matrix @ b.matrix).real)
    assert value == pytest.approx(exact, abs=1e-8)


def test_overlap_with_itself__expect_purity(grid):
    a = projector(gaussian_packet(grid, center=-1.0, width=0.8), grid)
    b = projector(gaussian_packet(grid, center=1.0, momentum=1.0), grid)
    rho = mixture([a, b], [0.3, 0.7])
    table = wigner_from_density(rho)

    assert overlap(table, table) == pytest.approx(purity(rho), abs=1e-8)


def test_overlap_with_mismatched_tables__expect_shape_error(grid, small):
    a = wigner_from_density(projector(gaussian_packet(grid), grid))
    b = wigner_from_density(projector(gaussian_packet(small), small))

    with pytest.raises(ShapeError):
        overlap(a, b)


def test_wigner_from_density_of_mixture__expect_linear_in_density(grid):
    a = projector(gaussian_packet(grid, center=-1.0, width=0.8), grid)
    b = projector(gaussian_packet(grid, center=1.5, momentum=-0.5), grid)
    mixed = wigner_from_density(mixture([a, b], [0.25, 0.75]))

    combined = 0.25 * wigner_from_density(a).values
    combined += 0.75 * wigner_from_density(b).values
    assert np.max(np.abs(mixed.values - combined)) < 1e-12


def test_weyl_characteristic_at_origin__expect_unit_trace(grid):
    chi = weyl_characteristic(projector(gaussian_packet(grid, center=1.0), grid))

    origin = (grid.n // 2, grid.n // 2)
    assert chi.u[origin[0]] == 0.0
    assert chi.v[origin[1]] == 0.0
    assert chi.values[origin] == pytest.approx(1.0, abs=1e-10)


def test_weyl_characteristic__expect_same_as_exact_displacement(small):
    displaced = projector(gaussian_packet(small, center=1.0, momentum=0.5), small)
    a = projector(gaussian_packet(small, center=-1.5, width=0.8), small)
    b = projector(gaussian_packet(small, center=2.0, momentum=-1.0), small)
    mixed = mixture([a, b], [0.4, 0.6])

    for rho in (displaced, mixed):
        chi = weyl_characteristic(rho)
        exact = np.array(
            [
                [np.trace(rho.matrix @ exact_displacement(small, u, v)) for v in chi.v]
                for u in chi.u
            ]
        )
        assert np.max(np.abs(chi.values - exact)) < 1e-8


def test_weyl_characteristic_at_opposite_shift__expect_conjugate(small):
    a = projector(gaussian_packet(small, center=-1.0, momentum=1.0), small)
    b = projector(gaussian_packet(small, center=2.0, width=0.7), small)
    chi = weyl_characteristic(mixture([a, b], [0.5, 0.5]), u_count=31, v_count=31)

    # odd counts give lattices symmetric about zero
    assert np.allclose(chi.u[::-1], -chi.u)
    assert np.max(np.abs(chi.values[::-1, ::-1] - chi.values.conj())) < 1e-10


def test_weyl_characteristic_of_mixture__expect_modulus_at_most_one(small):
    a = projector(gaussian_packet(small, center=-2.0), small)
    b = projector(gaussian_packet(small, center=2.0, momentum=2.0), small)
    chi = weyl_characteristic(mixture([a, b], [0.3, 0.7]))

    assert np.all(np.abs(chi.values) <= 1.0 + 1e-9)


def test_weyl_characteristic_of_ground_state__expect_gaussian_modulus(grid):
    chi = weyl_characteristic(projector(gaussian_packet(grid), grid))

    u, v = np.meshgrid(chi.u, chi.v, indexing="ij")
    expected = np.exp(-(u**2 + v**2) / 4.0)
    assert np.max(np.abs(np.abs(chi.values) - expected)) < 1e-6


def test_wigner_from_characteristic__expect_same_as_direct_path(grid):
    rho = projector(gaussian_packet(grid, center=0.5, width=0.8, momentum=-1.0), grid)

    direct = wigner_from_density(rho)
    inverse = wigner_from_characteristic(weyl_characteristic(rho))

    assert np.max(np.abs(direct.values - inverse.values)) < 1e-8
    assert inverse.mass() == pytest.approx(1.0, abs=1e-8)


def test_weyl_characteristic_with_too_many_shifts__expect_resource_limit_error(
    small,
):
    rho = projector(gaussian_packet(small), small)

    with pytest.raises(ResourceLimitError):
        weyl_characteristic(rho, u_count=small.n + 1)


def test_weyl_characteristic_over_grid_cap__expect_resource_limit_error():
    large = make_grid(CHARACTERISTIC_CAP * 2, 40.0)
    rho = projector(gaussian_packet(large), large)

    with pytest.raises(ResourceLimitError):
        weyl_characteristic(rho)
