import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import hermite_e
from numpy.typing import ArrayLike, NDArray

from .errors import ConfigError, DomainError, ShapeError

ComplexArray = NDArray[np.complex128]
RealArray = NDArray[np.float64]

#: Gaussian density below this value is treated as the zero set when unembedding.
DENSITY_FLOOR: float = 1e-30


@dataclass(frozen=True)
class Grid:
    """A uniform position lattice with its reciprocal momentum lattice.

    Points are `q_k = center - length/2 + k*step` for `k = 0..n-1`. Momenta
    are kept in DFT frequency order internally (`numpy.fft.fftfreq`), so that
    `step * momentum_step * n == 2*pi`. Use `sorted_momenta` for anything
    shown to a user.

    ## Example

    ```python
    grid = make_grid(64, 20.0)
    grid.points[0]       # -10.0
    grid.sorted_momenta  # ascending momenta
    ```
    """

    n: int
    length: float
    center: float = 0.0

    @property
    def step(self) -> float:
        return self.length / self.n

    @property
    def momentum_step(self) -> float:
        return 2.0 * math.pi / self.length

    @property
    def origin(self) -> float:
        return self.center - self.length / 2.0

    @cached_property
    def points(self) -> RealArray:
        values = self.origin + np.arange(self.n) * self.step
        values.setflags(write=False)
        return values

    @cached_property
    def momenta(self) -> RealArray:
        values = 2.0 * math.pi * np.fft.fftfreq(self.n, d=self.step)
        values.setflags(write=False)
        return values

    @cached_property
    def sorted_momenta(self) -> RealArray:
        values = np.fft.fftshift(self.momenta)
        values.setflags(write=False)
        return values

    def metadata(self) -> dict[str, float]:
        return {
            "n": self.n,
            "length": self.length,
            "center": self.center,
            "step": self.step,
        }


@dataclass(frozen=True)
class GaussianMeasureSpec:
    """The environment reference measure, a normal law on the real line."""

    mean: float = 0.0
    variance: float = 0.5

    def __post_init__(self) -> None:
        if not self.variance > 0:
            raise DomainError(f"variance must be positive, got {self.variance}")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


def make_grid(n: int, length: float, center: float = 0.0) -> Grid:
    """Build a `Grid`, validating the point count and box length.

    Raises `ConfigError` when `n` is not a power of two at least 2, or when
    `length` is not positive.
    """
    if isinstance(n, bool) or not isinstance(n, int) or n < 2 or n & (n - 1):
        raise ConfigError("grid.n", f"must be a power of two >= 2, got {n!r}")
    if not length > 0:
        raise ConfigError("grid.length", f"must be positive, got {length!r}")

    return Grid(n=n, length=float(length), center=float(center))


def _check_axis(values: np.ndarray, grid: Grid, axis: int) -> None:
    if values.ndim == 0 or values.shape[axis] != grid.n:
        raise ShapeError("array along grid axis", grid.n, values.shape)


def to_momentum(values: ArrayLike, grid: Grid, *, axis: int = 0) -> ComplexArray:
    """Unitary transform from position to momentum amplitudes.

    Uses the orthonormal DFT with the phase `exp(-i p q_0)` of the box origin
    folded in, so a plane wave `exp(i p_j q)` maps onto a real positive spike
    at `p_j`. Output momenta follow `grid.momenta` (DFT order).
    """
    array = np.asarray(values, dtype=np.complex128)
    _check_axis(array, grid, axis)

    phase = np.exp(-1j * grid.momenta * grid.origin)
    shape = [1] * array.ndim
    shape[axis] = grid.n

    return np.fft.fft(array, axis=axis, norm="ortho") * phase.reshape(shape)


def from_momentum(values: ArrayLike, grid: Grid, *, axis: int = 0) -> ComplexArray:
    """Inverse of `to_momentum`."""
    array = np.asarray(values, dtype=np.complex128)
    _check_axis(array, grid, axis)

    phase = np.exp(1j * grid.momenta * grid.origin)
    shape = [1] * array.ndim
    shape[axis] = grid.n

    return np.fft.ifft(array * phase.reshape(shape), axis=axis, norm="ortho")


def dft_matrix(grid: Grid) -> ComplexArray:
    """Dense matrix of `to_momentum`, built entry by entry.

    Row `j`, column `k` is `exp(-i p_j q_k) / sqrt(n)`.
    """
    return np.exp(-1j * np.outer(grid.momenta, grid.points)) / math.sqrt(grid.n)


def kinetic_multiplier(
    grid: Grid, mass: float, dt: float, *, sign: int = -1
) -> ComplexArray:
    """Fourier multiplier `exp(sign * i * dt * p^2 / 2m)` in DFT order."""
    return np.exp(sign * 1j * dt * grid.momenta**2 / (2.0 * mass))


def quadrature_inner(f: ArrayLike, g: ArrayLike, grid: Grid) -> complex:
    """Lattice inner product `sum(conj(f) * g) * step`."""
    a = np.asarray(f, dtype=np.complex128)
    b = np.asarray(g, dtype=np.complex128)

    if a.shape != b.shape:
        raise ShapeError("inner product operands", a.shape, b.shape)
    _check_axis(a, grid, 0)

    return complex(np.vdot(a, b) * grid.step)


def quadrature_norm(f: ArrayLike, grid: Grid) -> float:
    return math.sqrt(quadrature_inner(f, f, grid).real)


def gaussian_density(spec: GaussianMeasureSpec, grid: Grid) -> RealArray:
    """The density of `spec` sampled on the grid points."""
    z = (grid.points - spec.mean) / spec.std
    return np.exp(-0.5 * z**2) / math.sqrt(2.0 * math.pi * spec.variance)


def embed_gaussian(
    f: ArrayLike, spec: GaussianMeasureSpec, grid: Grid
) -> ComplexArray:
    """Carry a function of `L2(nu)` into flat coordinates, `f * sqrt(dnu/dq)`.

    The map is unitary between the two quadrature norms, so the weighted norm
    of `f` equals the flat norm of the result.
    """
    values = np.asarray(f, dtype=np.complex128)
    _check_axis(values, grid, 0)
    return values * np.sqrt(gaussian_density(spec, grid))


def unembed_gaussian(
    g: ArrayLike, spec: GaussianMeasureSpec, grid: Grid
) -> ComplexArray:
    """Inverse of `embed_gaussian` off the zero set of the density."""
    values = np.asarray(g, dtype=np.complex128)
    _check_axis(values, grid, 0)

    density = gaussian_density(spec, grid)
    support = density > DENSITY_FLOOR
    out = np.zeros_like(values)
    out[support] = values[support] / np.sqrt(density[support])
    return out


def gaussian_quadrature_norm(
    f: ArrayLike, spec: GaussianMeasureSpec, grid: Grid
) -> float:
    """Norm of `f` in `L2(nu)`, integrated on the lattice."""
    values = np.asarray(f, dtype=np.complex128)
    weights = gaussian_density(spec, grid) * grid.step
    return math.sqrt(float(np.sum(np.abs(values) ** 2 * weights)))


def hermite_function(
    coefficients: Sequence[float], spec: GaussianMeasureSpec
) -> Callable[[ArrayLike], ComplexArray]:
    """Expansion in the Hermite polynomials orthonormal under `spec`.

    The k-th basis element is `He_k((q - mean)/std) / sqrt(k!)`, so
    `coefficients=[1.0]` is the constant function 1.
    """
    scaled = np.array(
        [c / math.sqrt(math.factorial(k)) for k, c in enumerate(coefficients)],
        dtype=np.complex128,
    )

    def evaluate(q: ArrayLike) -> ComplexArray:
        z = (np.asarray(q, dtype=np.float64) - spec.mean) / spec.std
        return np.asarray(hermite_e.hermeval(z, scaled), dtype=np.complex128)

    return evaluate


def gaussian_packet(
    grid: Grid, center: float = 0.0, width: float = 1.0, momentum: float = 0.0
) -> ComplexArray:
    """A normalized Gaussian wave packet `exp(-(q-c)^2/(2w^2) + i p0 q)`.

    The packet is renormalized on the lattice so its quadrature norm is 1.
    """
    if not width > 0:
        raise DomainError(f"width must be positive, got {width}")

    q = grid.points
    psi = np.exp(-((q - center) ** 2) / (2.0 * width**2) + 1j * momentum * q)
    return psi / quadrature_norm(psi, grid)
