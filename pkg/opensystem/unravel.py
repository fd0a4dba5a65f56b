"""Random pure states of the system obtained by measuring the environment.

Sampling an environment lattice point from the environment law and
conditioning the composite state on it yields a random normalized system
state; the average of its projector is the reduced density.
"""

import logging
import math
from dataclasses import dataclass
from typing import Literal, Mapping, Optional, Sequence

import numpy as np
import scipy.special
from numpy.typing import ArrayLike, NDArray

from .errors import (
    DomainError,
    SamplingInconsistencyError,
    SnapshotError,
    ZeroProbabilityError,
)
from .evolve import EvolutionResult
from .lattice import ComplexArray, GaussianMeasureSpec, RealArray, to_momentum
from .states import (
    CompositeState,
    DensityOperator,
    MarginalDensity,
    check_observable,
    conditional_state,
    marginal_density_2,
    purity,
)
from .streams import UNRAVEL, stream

logger = logging.getLogger(__name__)

Basis = Literal["position", "momentum"]
Process = Literal["coordinate", "reference"]


@dataclass(frozen=True)
class EnvironmentSample:
    """One sampled environment point.

    In the momentum basis `env_index` indexes `grid2.momenta`.
    """

    time: float
    env_index: int
    weight: float
    rng_stream_id: int


@dataclass(frozen=True)
class TimeSlice:
    """Samples drawn at one time, one row of `states` per sample."""

    time: float
    stream_id: int
    indices: NDArray[np.intp]
    weights: RealArray
    states: ComplexArray

    @property
    def count(self) -> int:
        return int(self.indices.shape[0])

    def samples(self) -> list[EnvironmentSample]:
        return [
            EnvironmentSample(self.time, int(index), float(weight), self.stream_id)
            for index, weight in zip(self.indices, self.weights)
        ]


@dataclass(frozen=True)
class TrajectoryEnsemble:
    seed: int
    count: int
    basis: str
    slices: tuple[TimeSlice, ...]

    @property
    def times(self) -> list[float]:
        return [item.time for item in self.slices]


@dataclass(frozen=True)
class EnsembleRow:
    time: float
    n: int
    purity_mc: float
    purity_exact: float
    frobenius_error: float
    stderr: float

    def as_tuple(self) -> tuple[float, int, float, float, float, float]:
        return (
            self.time,
            self.n,
            self.purity_mc,
            self.purity_exact,
            self.frobenius_error,
            self.stderr,
        )


def environment_distribution(phi_t: CompositeState) -> MarginalDensity:
    return marginal_density_2(phi_t)


def environment_basis(phi: CompositeState, basis: Basis = "position") -> CompositeState:
    """Express the environment axis in the requested basis before conditioning.

    In the momentum basis column `j` holds the amplitude of momentum
    `grid2.momenta[j]` and the grid is kept only for its step sizes.
    """
    if basis == "position":
        return phi
    if basis == "momentum":
        amplitudes = to_momentum(phi.amplitudes, phi.grid2, axis=1)
        return CompositeState(phi.grid1, phi.grid2, amplitudes)
    raise DomainError(f"unknown basis '{basis}'")


def lattice_inverse_cdf(probabilities: ArrayLike, u: ArrayLike) -> NDArray[np.intp]:
    """Map uniforms in `[0, 1)` to lattice indices; zero-mass points are never hit."""
    cdf = np.cumsum(np.asarray(probabilities, dtype=np.float64))
    cdf /= cdf[-1]
    indices = np.searchsorted(cdf, np.asarray(u, dtype=np.float64), side="right")
    return np.minimum(indices, cdf.shape[0] - 1).astype(np.intp)


def _check_count(count: int, minimum: int = 1) -> None:
    integral = isinstance(count, (int, np.integer)) and not isinstance(count, bool)
    if not integral or count < minimum:
        raise DomainError(f"sample count must be >= {minimum}, got {count!r}")


def sample_environment(
    dist: MarginalDensity, rng: np.random.Generator, count: int
) -> NDArray[np.intp]:
    """Draw `count` lattice indices from `dist` by inverse CDF."""
    _check_count(count)
    return lattice_inverse_cdf(dist.probabilities, rng.random(count))


def sample_reference_process(
    dist: MarginalDensity,
    reference: GaussianMeasureSpec,
    rng: np.random.Generator,
    count: int,
) -> NDArray[np.intp]:
    """Draw from the reference Gaussian and carry the draws onto `dist`.

    A Gaussian draw `x` is mapped to `F_dist^-1(F_ref(x))`; the result has the
    same law as `sample_environment`.
    """
    _check_count(count)
    draws = rng.normal(reference.mean, reference.std, size=count)
    uniforms = scipy.special.ndtr((draws - reference.mean) / reference.std)
    uniforms = np.minimum(uniforms, np.nextafter(1.0, 0.0))
    return lattice_inverse_cdf(dist.probabilities, uniforms)


def random_pure_state(phi_t: CompositeState, index: int) -> ComplexArray:
    """The normalized system state conditioned on environment point `index`."""
    try:
        state, _ = conditional_state(phi_t, int(index))
    except ZeroProbabilityError:
        raise SamplingInconsistencyError(int(index)) from None
    return state


def enumerate_outcomes(
    phi: CompositeState, basis: Basis = "position"
) -> list[tuple[int, float, ComplexArray]]:
    """Every environment outcome with nonzero weight, as `(index, weight, state)`."""
    represented = environment_basis(phi, basis)
    outcomes = []

    for index in range(represented.grid2.n):
        try:
            state, weight = conditional_state(represented, index)
        except ZeroProbabilityError:
            continue
        outcomes.append((index, weight, state))

    return outcomes


def _conditional_states(
    phi: CompositeState, indices: NDArray[np.intp]
) -> tuple[ComplexArray, RealArray]:
    unique = np.unique(indices)
    states = np.empty((phi.grid2.n, phi.grid1.n), dtype=np.complex128)
    weights = np.zeros(phi.grid2.n)

    for index in unique:
        state = random_pure_state(phi, int(index))
        states[index] = state
        weights[index] = float(np.sum(np.abs(phi.amplitudes[:, index]) ** 2)) * (
            phi.grid1.step * phi.grid2.step
        )

    return states[indices], weights[indices]


def _projector_moments(states: ComplexArray) -> tuple[ComplexArray, RealArray]:
    count = states.shape[0]
    mean = np.einsum("sk,sl->kl", states, states.conj()) / count
    second = np.einsum("sk,sl->kl", np.abs(states) ** 2, np.abs(states) ** 2) / count
    variance = np.maximum(second - np.abs(mean) ** 2, 0.0) * count / max(count - 1, 1)
    return mean, np.sqrt(variance / count)


def mc_density_estimate(
    phi_t: CompositeState,
    rng: np.random.Generator,
    count: int,
    *,
    basis: Basis = "position",
) -> tuple[DensityOperator, RealArray]:
    """Average of `|psi><psi|` over `count` sampled conditional states.

    Returns the estimate and the entrywise standard error of the mean.

    ## Example

    ```python
    estimate, stderr = mc_density_estimate(phi, stream(7, UNRAVEL, 0), 1000)
    estimate.hilbert_schmidt(reduced_density(phi))
    ```
    """
    _check_count(count, minimum=2)

    represented = environment_basis(phi_t, basis)
    indices = sample_environment(marginal_density_2(represented), rng, count)
    states, _ = _conditional_states(represented, indices)

    mean, stderr = _projector_moments(states)
    estimate = DensityOperator(phi_t.grid1, 0.5 * (mean + mean.conj().T))
    return estimate, stderr


def mc_expectation(
    phi_t: CompositeState,
    observable: ArrayLike,
    rng: np.random.Generator,
    count: int,
    *,
    basis: Basis = "position",
) -> tuple[float, float]:
    """Sample mean and standard error of `<psi|A|psi>` over conditional states."""
    _check_count(count, minimum=2)
    matrix = check_observable(observable, phi_t.grid1)

    represented = environment_basis(phi_t, basis)
    indices = sample_environment(marginal_density_2(represented), rng, count)
    states, _ = _conditional_states(represented, indices)

    values = np.einsum("sk,kl,sl->s", states.conj(), matrix, states).real
    values *= phi_t.grid1.step
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(count))


def process_snapshot(
    trajectory: EvolutionResult,
    times: Sequence[float],
    seed: int,
    count: int,
    *,
    basis: Basis = "position",
    process: Process = "coordinate",
    reference: Optional[GaussianMeasureSpec] = None,
) -> TrajectoryEnsemble:
    """Sample `count` conditional states independently at every requested time.

    The draws at the `i`-th time come from the stream `(seed, UNRAVEL, i)`,
    so the ensemble depends only on the seed and the inputs.
    """
    _check_count(count)
    if process not in ("coordinate", "reference"):
        raise DomainError(f"unknown process '{process}'")

    slices = []
    for position, time in enumerate(times):
        snapshot = trajectory.snapshot_at(time)
        if snapshot.state is None:
            raise SnapshotError(time)

        represented = environment_basis(snapshot.state, basis)
        dist = marginal_density_2(represented)
        rng = stream(seed, UNRAVEL, position)

        if process == "coordinate":
            indices = sample_environment(dist, rng, count)
        else:
            measure = reference or GaussianMeasureSpec()
            indices = sample_reference_process(dist, measure, rng, count)

        states, weights = _conditional_states(represented, indices)
        slices.append(TimeSlice(snapshot.time, position, indices, weights, states))
        logger.debug("sampled %d conditional states at t=%g", count, snapshot.time)

    return TrajectoryEnsemble(seed=seed, count=count, basis=basis, slices=tuple(slices))


def summarize_ensemble(
    ensemble: TrajectoryEnsemble, exact: Mapping[float, DensityOperator]
) -> list[EnsembleRow]:
    """Compare each time slice's estimate against the exact reduced density."""
    rows = []

    for item in ensemble.slices:
        rho = exact[item.time]
        mean, stderr = _projector_moments(item.states)
        estimate = DensityOperator(rho.grid, 0.5 * (mean + mean.conj().T))

        rows.append(
            EnsembleRow(
                time=item.time,
                n=item.count,
                purity_mc=purity(estimate),
                purity_exact=purity(rho),
                frobenius_error=estimate.hilbert_schmidt(rho),
                stderr=float(np.linalg.norm(stderr)) * rho.grid.step,
            )
        )

    return rows
