"""Composite pure states, marginals, conditional states and reduced densities.

Every array here lives in flat lattice coordinates: integrals become sums
weighted by the grid step, and a kernel `K` is a density when
`trace(K) * step == 1`.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from .errors import DomainError, InvalidDensityError, ShapeError, ZeroProbabilityError
from .lattice import ComplexArray, Grid, RealArray, quadrature_norm, to_momentum

logger = logging.getLogger(__name__)

NORM_TOLERANCE: float = 1e-10
RENORMALIZE_LIMIT: float = 1e-8
HERMITIAN_TOLERANCE: float = 1e-10
PSD_FLOOR: float = -1e-9
ZERO_MASS: float = 1e-30


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class CompositeState:
    """Pure state of system and environment, `amplitudes[k, l] = phi(q1_k, q2_l)`.

    The quadrature norm is checked on construction. Drift below `1e-8` is
    renormalized away, anything larger raises `DomainError`.
    """

    grid1: Grid
    grid2: Grid
    amplitudes: ComplexArray

    def __post_init__(self) -> None:
        amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        expected = (self.grid1.n, self.grid2.n)

        if amplitudes.shape != expected:
            raise ShapeError("composite amplitudes", expected, amplitudes.shape)

        norm = math.sqrt(_composite_norm_squared(amplitudes, self.grid1, self.grid2))
        drift = abs(norm - 1.0)

        if drift > RENORMALIZE_LIMIT:
            raise DomainError(f"composite state is not normalized (norm={norm!r})")
        if drift > NORM_TOLERANCE:
            logger.debug("renormalizing composite state, drift=%.3e", drift)
        amplitudes = amplitudes / norm

        object.__setattr__(self, "amplitudes", _frozen(amplitudes))

    @classmethod
    def normalized(
        cls, grid1: Grid, grid2: Grid, amplitudes: ArrayLike
    ) -> "CompositeState":
        """Build a state from arbitrary nonzero amplitudes, scaling them to norm 1."""
        values = np.asarray(amplitudes, dtype=np.complex128)
        norm_squared = _composite_norm_squared(values, grid1, grid2)

        if not norm_squared > 0:
            raise DomainError("cannot normalize the zero state")

        return cls(grid1, grid2, values / math.sqrt(norm_squared))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.grid1.n, self.grid2.n)

    @property
    def norm(self) -> float:
        squared = _composite_norm_squared(self.amplitudes, self.grid1, self.grid2)
        return math.sqrt(squared)


def _composite_norm_squared(amplitudes: np.ndarray, grid1: Grid, grid2: Grid) -> float:
    return float(np.sum(np.abs(amplitudes) ** 2) * grid1.step * grid2.step)


@dataclass(frozen=True)
class DensityOperator:
    """Integral kernel of a density operator on one subsystem lattice.

    Checked on construction: Hermitian within `1e-10`, `trace * step == 1`
    within `1e-10`, smallest eigenvalue above `-1e-9`.
    """

    grid: Grid
    kernel: ComplexArray

    def __post_init__(self) -> None:
        kernel = np.asarray(self.kernel, dtype=np.complex128)
        expected = (self.grid.n, self.grid.n)

        if kernel.shape != expected:
            raise ShapeError("density kernel", expected, kernel.shape)

        object.__setattr__(self, "kernel", _frozen(kernel))
        self.validate()

    def validate(self) -> None:
        """Raise `InvalidDensityError` unless the kernel is a density."""
        kernel = self.kernel

        asymmetry = float(np.max(np.abs(kernel - kernel.conj().T)))
        if asymmetry > HERMITIAN_TOLERANCE:
            raise InvalidDensityError(f"kernel is not Hermitian ({asymmetry:.3e})")

        trace = float(np.trace(kernel).real) * self.grid.step
        if abs(trace - 1.0) > NORM_TOLERANCE:
            raise InvalidDensityError(f"kernel trace is {trace!r}, expected 1")

        smallest = float(np.linalg.eigvalsh(kernel * self.grid.step)[0])
        if smallest < PSD_FLOOR:
            raise InvalidDensityError(f"negative eigenvalue {smallest:.3e}")

    @property
    def matrix(self) -> ComplexArray:
        """The unit-trace matrix `kernel * step`."""
        return self.kernel * self.grid.step

    def eigenvalues(self) -> RealArray:
        """Eigenvalues of `kernel * step` in descending order."""
        return np.linalg.eigvalsh(self.matrix)[::-1]

    def hilbert_schmidt(self, other: "DensityOperator | ComplexArray") -> float:
        """Hilbert-Schmidt distance to a density or raw kernel on the same grid."""
        if isinstance(other, DensityOperator):
            kernel = other.kernel
        else:
            kernel = np.asarray(other)
        return float(np.linalg.norm(self.kernel - kernel) * self.grid.step)


@dataclass(frozen=True)
class MarginalDensity:
    """Probability density on a lattice, `sum(weights) * step == 1`."""

    grid: Grid
    weights: RealArray

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=np.float64)

        if weights.shape != (self.grid.n,):
            raise ShapeError("marginal weights", (self.grid.n,), weights.shape)
        if np.any(weights < 0):
            raise DomainError("marginal density has negative weights")

        mass = float(np.sum(weights)) * self.grid.step
        if abs(mass - 1.0) > NORM_TOLERANCE:
            raise DomainError(f"marginal density has mass {mass!r}, expected 1")

        object.__setattr__(self, "weights", _frozen(weights))

    @property
    def probabilities(self) -> RealArray:
        return self.weights * self.grid.step


def product_state(
    psi1: ArrayLike, grid1: Grid, psi2: ArrayLike, grid2: Grid
) -> CompositeState:
    """The product state `psi1(q1) * psi2(q2)`.

    ## Example

    ```python
    phi = product_state(gaussian_packet(g1, 1.0), g1, gaussian_packet(g2), g2)
    purity(reduced_density(phi))  # 1.0
    ```
    """
    a = np.asarray(psi1, dtype=np.complex128)
    b = np.asarray(psi2, dtype=np.complex128)

    for name, values, grid in (("psi1", a, grid1), ("psi2", b, grid2)):
        if values.shape != (grid.n,):
            raise ShapeError(name, (grid.n,), values.shape)
        norm = quadrature_norm(values, grid)
        if abs(norm - 1.0) > RENORMALIZE_LIMIT:
            raise DomainError(f"{name} is not normalized (norm={norm!r})")

    return CompositeState(grid1, grid2, np.outer(a, b))


def marginal_density_1(phi: CompositeState) -> MarginalDensity:
    weights = np.sum(np.abs(phi.amplitudes) ** 2, axis=1) * phi.grid2.step
    return MarginalDensity(phi.grid1, weights)


def marginal_density_2(phi: CompositeState) -> MarginalDensity:
    """Law of the environment coordinate for the state `phi`."""
    weights = np.sum(np.abs(phi.amplitudes) ** 2, axis=0) * phi.grid1.step
    return MarginalDensity(phi.grid2, weights)


def conditional_state(phi: CompositeState, index: int) -> tuple[ComplexArray, float]:
    """Normalized system state given the environment sits at `q2[index]`.

    Returns the state together with its probability `rho2(q2) * step2`.
    Raises `ZeroProbabilityError` for an empty column.
    """
    if not 0 <= index < phi.grid2.n:
        raise ShapeError("environment index", f"0..{phi.grid2.n - 1}", index)

    column = phi.amplitudes[:, index]
    mass = float(np.sum(np.abs(column) ** 2)) * phi.grid1.step

    if mass <= ZERO_MASS:
        raise ZeroProbabilityError(index)

    return column / math.sqrt(mass), mass * phi.grid2.step


def conditional_density(phi: CompositeState, index: int) -> RealArray:
    """Conditional position density of the system given `q2[index]`."""
    state, _ = conditional_state(phi, index)
    return np.abs(state) ** 2


def reduced_density(phi: CompositeState) -> DensityOperator:
    """Partial trace over the environment.

    `K[k, j] = sum_l phi[k, l] * conj(phi[j, l]) * step2`.
    """
    amplitudes = phi.amplitudes
    kernel = amplitudes @ amplitudes.conj().T * phi.grid2.step
    return DensityOperator(phi.grid1, 0.5 * (kernel + kernel.conj().T))


def reduced_density_environment(phi: CompositeState) -> DensityOperator:
    """Partial trace over the system."""
    amplitudes = phi.amplitudes
    kernel = amplitudes.T @ amplitudes.conj() * phi.grid1.step
    return DensityOperator(phi.grid2, 0.5 * (kernel + kernel.conj().T))


def check_observable(observable: ArrayLike, grid: Grid) -> ComplexArray:
    matrix = np.asarray(observable, dtype=np.complex128)
    expected = (grid.n, grid.n)

    if matrix.shape != expected:
        raise ShapeError("observable", expected, matrix.shape)

    residual = float(np.max(np.abs(matrix - matrix.conj().T)))
    if residual > HERMITIAN_TOLERANCE:
        raise DomainError(f"observable is not Hermitian (residual {residual:.3e})")

    return matrix


def expectation(rho: DensityOperator, observable: ArrayLike) -> float:
    """`tr(rho A)` with the quadrature trace convention."""
    matrix = check_observable(observable, rho.grid)
    value = np.trace(rho.kernel @ matrix) * rho.grid.step

    if abs(value.imag) > NORM_TOLERANCE:
        logger.warning("expectation has imaginary residue %.3e", abs(value.imag))

    return float(value.real)


def purity(rho: DensityOperator) -> float:
    return float(np.sum(np.abs(rho.kernel) ** 2) * rho.grid.step**2)


def chapman_kolmogorov_check(phi: CompositeState) -> float:
    """Max deviation between `rho1` and the average of conditional densities.

    Columns with zero probability are skipped, they carry no mass.
    """
    direct = marginal_density_1(phi).weights
    averaged = np.zeros(phi.grid1.n)

    for index in range(phi.grid2.n):
        try:
            state, weight = conditional_state(phi, index)
        except ZeroProbabilityError:
            continue
        averaged += np.abs(state) ** 2 * weight

    return float(np.max(np.abs(direct - averaged)))


def position_observable(grid: Grid, power: int = 1) -> ComplexArray:
    """Diagonal matrix of `q**power` on the grid."""
    return np.diag(grid.points.astype(np.complex128) ** power)


def momentum_density(rho: DensityOperator) -> RealArray:
    """Momentum density of `rho`, ordered like `grid.sorted_momenta`."""
    grid = rho.grid
    left = to_momentum(rho.matrix, grid, axis=0)
    transformed = to_momentum(left.conj().T, grid, axis=0)
    return np.fft.fftshift(np.real(np.diag(transformed)) / grid.momentum_step)


def projector(psi: ArrayLike, grid: Grid) -> DensityOperator:
    values = np.asarray(psi, dtype=np.complex128)
    norm = quadrature_norm(values, grid)

    if abs(norm - 1.0) > RENORMALIZE_LIMIT:
        raise DomainError(f"state is not normalized (norm={norm!r})")

    values = values / norm
    return DensityOperator(grid, np.outer(values, values.conj()))


def mixture(
    densities: Sequence[DensityOperator], weights: Sequence[float]
) -> DensityOperator:
    """Convex combination of density operators on a common grid."""
    if len(densities) != len(weights) or not densities:
        raise ShapeError("mixture weights", len(densities), len(weights))

    probabilities = np.asarray(weights, dtype=np.float64)
    if np.any(probabilities < 0) or abs(probabilities.sum() - 1.0) > NORM_TOLERANCE:
        raise DomainError("mixture weights must be a probability vector")

    grid = densities[0].grid
    kernel = sum(p * rho.kernel for p, rho in zip(probabilities, densities))
    return DensityOperator(grid, kernel)


def fidelity(a: CompositeState, b: CompositeState) -> float:
    """`|<a|b>|^2` for two composite states on the same grids."""
    overlap = np.vdot(a.amplitudes, b.amplitudes) * a.grid1.step * a.grid2.step
    return float(abs(overlap) ** 2)


def distance(a: CompositeState, b: CompositeState) -> float:
    """Quadrature L2 distance between two composite states."""
    difference = a.amplitudes - b.amplitudes
    return math.sqrt(_composite_norm_squared(difference, a.grid1, a.grid2))


def random_state(grid1: Grid, grid2: Grid, rng: np.random.Generator) -> CompositeState:
    """A random composite state with complex Gaussian amplitudes."""
    shape = (grid1.n, grid2.n)
    values = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return CompositeState.normalized(grid1, grid2, values)
