"""Gaussian measures on the system state space with a prescribed correlation operator.

A circularly symmetric complex Gaussian vector `z` with `E[z z^H] = K` is
another representation of the reduced density kernel `K`; the empirical
covariance of its samples converges back to `K`.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.linalg

from .errors import DomainError, InvalidDensityError
from .lattice import ComplexArray, Grid, RealArray
from .states import PSD_FLOOR, DensityOperator, purity
from .streams import GAUSSIAN, stream

logger = logging.getLogger(__name__)

#: Relative size below which an eigenvalue is treated as zero.
RELATIVE_EIGEN_FLOOR: float = 1e-15
#: Multiple of `1/sqrt(N)` accepted as Monte Carlo fluctuation.
BAND_FACTOR: float = 5.0


@dataclass(frozen=True, eq=False)
class GaussianStateMeasure:
    """Zero-mean complex Gaussian with covariance `covariance.kernel`.

    `eigenvalues` are kernel eigenvalues (they sum to `1/step`) and the
    columns of `eigenvectors` are orthonormal under the plain dot product.
    """

    covariance: DensityOperator
    eigenvalues: RealArray
    eigenvectors: ComplexArray

    @property
    def grid(self) -> Grid:
        return self.covariance.grid

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.eigenvalues))


def from_density(rho: DensityOperator) -> GaussianStateMeasure:
    """Eigendecompose `rho` into the sampler's spectral data.

    Eigenvalues of the unit-trace operator between `-1e-9` and 0 are clipped
    to 0; anything more negative raises `InvalidDensityError`.
    """
    values, vectors = scipy.linalg.eigh(rho.kernel)
    operator_values = values * rho.grid.step

    if operator_values.min() < PSD_FLOOR:
        smallest = float(operator_values.min())
        raise InvalidDensityError(f"correlation operator eigenvalue {smallest:.3e}")

    values = np.clip(values, 0.0, None)
    values[values < RELATIVE_EIGEN_FLOOR * values.max()] = 0.0

    values.setflags(write=False)
    vectors.setflags(write=False)
    return GaussianStateMeasure(rho, values, vectors)


def sample_states(
    measure: GaussianStateMeasure, rng: np.random.Generator, count: int
) -> ComplexArray:
    """Draw `count` vectors `sum_k sqrt(l_k) xi_k e_k`, one per row.

    ## Example

    ```python
    samples = sample_states(from_density(rho), stream(3, GAUSSIAN, 0), 10_000)
    empirical_covariance(samples)  # close to rho.kernel
    ```
    """
    if isinstance(count, bool) or not isinstance(count, (int, np.integer)) or count < 1:
        raise DomainError(f"sample count must be >= 1, got {count!r}")

    n = measure.grid.n
    real = rng.standard_normal((count, n))
    imag = rng.standard_normal((count, n))
    xi = (real + 1j * imag) / math.sqrt(2.0)
    return (xi * np.sqrt(measure.eigenvalues)[None, :]) @ measure.eigenvectors.T


def empirical_covariance(samples: ComplexArray) -> ComplexArray:
    """`(1/N) sum z z^H`, Hermitian by construction."""
    array = np.asarray(samples, dtype=np.complex128)
    if array.ndim != 2 or array.shape[0] < 2:
        raise DomainError("empirical covariance needs at least two samples")

    covariance = array.T @ array.conj() / array.shape[0]
    return 0.5 * (covariance + covariance.conj().T)


@dataclass(frozen=True)
class ResidualRecord:
    t: float
    n: int
    frobenius_residual: float
    purity_exact: float
    band: float

    @property
    def within_band(self) -> bool:
        return self.frobenius_residual <= self.band


def monte_carlo_band(count: int) -> float:
    return BAND_FACTOR / math.sqrt(count)


def track_evolution(
    densities: Iterable[tuple[float, DensityOperator]], seed: int, count: int
) -> list[ResidualRecord]:
    """Sample each `T(t)` and compare the empirical covariance against it.

    The samples at the `i`-th time come from the stream `(seed, GAUSSIAN, i)`.
    """
    records = []

    for position, (t, rho) in enumerate(densities):
        measure = from_density(rho)
        samples = sample_states(measure, stream(seed, GAUSSIAN, position), count)
        residual = rho.hilbert_schmidt(empirical_covariance(samples))

        records.append(
            ResidualRecord(
                t=t,
                n=count,
                frobenius_residual=residual,
                purity_exact=purity(rho),
                band=monte_carlo_band(count),
            )
        )
        logger.debug("t=%g covariance residual %.3e", t, residual)

    return records
