import math

import numpy as np
import pytest

from opensystem.errors import ConfigError, DomainError, ShapeError
from opensystem.lattice import (
    GaussianMeasureSpec,
    dft_matrix,
    embed_gaussian,
    from_momentum,
    gaussian_density,
    gaussian_packet,
    gaussian_quadrature_norm,
    hermite_function,
    kinetic_multiplier,
    make_grid,
    quadrature_inner,
    quadrature_norm,
    to_momentum,
    unembed_gaussian,
)


@pytest.fixture
def grid():
    return make_grid(64, 16.0)


@pytest.fixture
def reference():
    return GaussianMeasureSpec(mean=0.0, variance=0.5)


def test_make_grid__expect_points_steps_and_reciprocity():
    grid = make_grid(8, 4.0, center=1.0)

    assert grid.step == pytest.approx(0.5)
    assert grid.points[0] == pytest.approx(-1.0)
    assert grid.points[-1] == pytest.approx(2.5)
    assert grid.step * grid.momentum_step * grid.n == pytest.approx(2 * math.pi)


@pytest.mark.parametrize("n", [0, 1, 3, 12, 2.0, True])
def test_make_grid_with_invalid_count__expect_config_error(n):
    with pytest.raises(ConfigError):
        make_grid(n, 10.0)


@pytest.mark.parametrize("length", [0.0, -1.0])
def test_make_grid_with_non_positive_length__expect_config_error(length):
    with pytest.raises(ConfigError):
        make_grid(16, length)


def test_grid_points__expect_read_only(grid):
    with pytest.raises(ValueError):
        grid.points[0] = 1.0


def test_grid_sorted_momenta__expect_ascending_and_same_set(grid):
    ordered = grid.sorted_momenta

    assert np.all(np.diff(ordered) > 0)
    assert np.allclose(np.sort(grid.momenta), ordered)


def test_to_momentum__expect_norm_preserved(grid):
    rng = np.random.default_rng(0)
    values = rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)

    transformed = to_momentum(values, grid)

    assert np.linalg.norm(transformed) == pytest.approx(np.linalg.norm(values))


def test_from_momentum__expect_inverse_of_to_momentum(grid):
    rng = np.random.default_rng(1)
    values = rng.standard_normal((grid.n, 3)) + 1j * rng.standard_normal((grid.n, 3))

    restored = from_momentum(to_momentum(values, grid, axis=0), grid, axis=0)

    assert np.allclose(restored, values, atol=1e-13)


def test_to_momentum__expect_plane_wave_maps_to_positive_spike(grid):
    index = 5
    wave = np.exp(1j * grid.momenta[index] * grid.points)

    transformed = to_momentum(wave, grid)

    assert np.argmax(np.abs(transformed)) == index
    assert transformed[index].real == pytest.approx(math.sqrt(grid.n))
    assert abs(transformed[index].imag) < 1e-10


def test_to_momentum_with_wrong_axis_length__expect_shape_error(grid):
    with pytest.raises(ShapeError):
        to_momentum(np.ones(grid.n + 1), grid)


def test_dft_matrix__expect_same_as_fft_path(grid):
    rng = np.random.default_rng(2)
    values = rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)

    assert np.allclose(dft_matrix(grid) @ values, to_momentum(values, grid), atol=1e-12)


def test_kinetic_multiplier__expect_unit_modulus_and_sign(grid):
    forward = kinetic_multiplier(grid, 1.0, 0.1)
    backward = kinetic_multiplier(grid, 1.0, 0.1, sign=1)

    assert np.allclose(np.abs(forward), 1.0)
    assert np.allclose(forward * backward, 1.0)


def test_quadrature_inner_with_mismatched_shapes__expect_shape_error(grid):
    with pytest.raises(ShapeError):
        quadrature_inner(np.ones(grid.n), np.ones(grid.n - 1), grid)


def test_gaussian_packet__expect_unit_norm_and_centered(grid):
    psi = gaussian_packet(grid, center=1.5, width=0.8, momentum=2.0)
    density = np.abs(psi) ** 2

    assert quadrature_norm(psi, grid) == pytest.approx(1.0, abs=1e-12)
    assert np.sum(grid.points * density) * grid.step == pytest.approx(1.5, abs=1e-8)


def test_gaussian_packet_with_non_positive_width__expect_domain_error(grid):
    with pytest.raises(DomainError):
        gaussian_packet(grid, width=0.0)


def test_gaussian_density__expect_unit_mass(grid, reference):
    density = gaussian_density(reference, grid)

    assert np.sum(density) * grid.step == pytest.approx(1.0, abs=1e-10)


def test_gaussian_measure_spec_with_non_positive_variance__expect_domain_error():
    with pytest.raises(DomainError):
        GaussianMeasureSpec(variance=0.0)


def test_embed_gaussian__expect_weighted_norm_becomes_flat_norm(grid, reference):
    f = hermite_function([0.3, 1.0, -0.5], reference)(grid.points)

    embedded = embed_gaussian(f, reference, grid)

    assert quadrature_norm(embedded, grid) == pytest.approx(
        gaussian_quadrature_norm(f, reference, grid), rel=1e-12
    )


def test_unembed_gaussian__expect_inverse_on_support(grid, reference):
    f = hermite_function([1.0, 0.5], reference)(grid.points)

    restored = unembed_gaussian(embed_gaussian(f, reference, grid), reference, grid)

    support = gaussian_density(reference, grid) > 1e-30
    assert np.allclose(restored[support], f[support], rtol=1e-10)
    assert np.all(restored[~support] == 0)


def test_hermite_function_with_constant__expect_one(grid, reference):
    assert np.allclose(hermite_function([1.0], reference)(grid.points), 1.0)


def test_hermite_function__expect_orthonormal_under_reference(grid, reference):
    basis = [
        hermite_function([0.0] * k + [1.0], reference)(grid.points) for k in range(4)
    ]
    weights = gaussian_density(reference, grid) * grid.step

    gram = np.array([[np.sum(a.conj() * b * weights) for b in basis] for a in basis])

    assert np.allclose(gram, np.eye(4), atol=1e-8)
