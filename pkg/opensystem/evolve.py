"""Trotter product propagation of a composite state.

One step multiplies the state by the exponentials of the three terms of
the Hamiltonian in turn: the system factor, the environment factor and the
coupling phase. Each factor is applied exactly (eigendecomposition of the
subsystem Hamiltonian) unless `factor_method="split"` asks for the cheaper
symmetric kinetic/potential splitting inside a factor.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DomainError,
    NumericalInstabilityError,
    ResourceLimitError,
    SnapshotError,
)
from .hamiltonian import HamiltonianSpec, subsystem_hamiltonian, tabulate
from .lattice import ComplexArray, Grid, from_momentum, kinetic_multiplier, to_momentum
from .oracle import exact_propagate
from .states import CompositeState, DensityOperator, distance, purity, reduced_density

logger = logging.getLogger(__name__)

Splitting = Literal["lie", "strang"]
FactorMethod = Literal["exact", "split"]
Factor = Callable[[np.ndarray], np.ndarray]

#: Norm drift tolerated over a whole run, summed over steps, before it is aborted.
RUN_DRIFT_LIMIT: float = 1e-8
#: Largest subsystem grid whose factor is exponentiated by eigendecomposition.
EXACT_FACTOR_CAP: int = 1024
#: Composite size up to which snapshots keep the full amplitudes.
SNAPSHOT_AMPLITUDE_CAP: int = 2**20


def _check_sign(sign: int) -> int:
    if sign not in (-1, 1):
        raise DomainError(f"sign must be -1 or +1, got {sign!r}")
    return sign


class TrotterPropagator:
    """Cached factor exponentials for one `(spec, grids, dt, options)` tuple.

    With `sign=-1` a Lie step applies the system factor, then the environment
    factor, then the coupling phase, each as `exp(-i dt H_x)`. With `sign=+1`
    the factors are `exp(+i dt H_x)` applied coupling first, which makes the
    step the exact adjoint of the `sign=-1` step.

    ## Example

    ```python
    propagator = TrotterPropagator(spec, grid1, grid2, dt=0.01)
    phi = propagator.step(phi)
    ```
    """

    def __init__(
        self,
        spec: HamiltonianSpec,
        grid1: Grid,
        grid2: Grid,
        dt: float,
        *,
        sign: int = -1,
        splitting: Splitting = "lie",
        factor_method: FactorMethod = "exact",
    ):
        if not math.isfinite(dt):
            raise DomainError(f"time step must be finite, got {dt!r}")
        if splitting not in ("lie", "strang"):
            raise DomainError(f"unknown splitting '{splitting}'")
        if factor_method not in ("exact", "split"):
            raise DomainError(f"unknown factor method '{factor_method}'")

        self.spec = spec
        self.grid1 = grid1
        self.grid2 = grid2
        self.dt = dt
        self.sign = _check_sign(sign)
        self.splitting = splitting
        self.factor_method = factor_method

        self._potentials = tabulate(spec, grid1, grid2)
        self._eigen: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._factors = self._build()

    def _subsystem_eigen(self, axis: int) -> tuple[np.ndarray, np.ndarray]:
        if axis not in self._eigen:
            grid = self.grid1 if axis == 1 else self.grid2
            if grid.n > EXACT_FACTOR_CAP:
                raise ResourceLimitError(
                    "exact subsystem factor", limit=EXACT_FACTOR_CAP, requested=grid.n
                )

            mass = self.spec.m1 if axis == 1 else self.spec.m2
            potential = self._potentials.v1 if axis == 1 else self._potentials.v2
            hamiltonian = subsystem_hamiltonian(grid, mass, potential)
            energies, vectors = scipy.linalg.eigh(hamiltonian)
            self._eigen[axis] = (energies, vectors)

        return self._eigen[axis]

    def _exact_factor(self, axis: int, tau: float) -> Factor:
        energies, vectors = self._subsystem_eigen(axis)
        unitary = (vectors * np.exp(self.sign * 1j * tau * energies)) @ vectors.conj().T

        if axis == 1:
            return lambda a: unitary @ a
        transposed = unitary.T
        return lambda a: a @ transposed

    def _split_factor(self, axis: int, tau: float) -> Factor:
        grid = self.grid1 if axis == 1 else self.grid2
        mass = self.spec.m1 if axis == 1 else self.spec.m2
        potential = self._potentials.v1 if axis == 1 else self._potentials.v2

        half = np.exp(self.sign * 0.5j * tau * potential)
        kinetic = kinetic_multiplier(grid, mass, tau, sign=self.sign)
        array_axis = axis - 1

        if array_axis == 0:
            half, kinetic = half[:, None], kinetic[:, None]
        else:
            half, kinetic = half[None, :], kinetic[None, :]

        def apply(a: np.ndarray) -> np.ndarray:
            a = to_momentum(a * half, grid, axis=array_axis)
            return from_momentum(a * kinetic, grid, axis=array_axis) * half

        return apply

    def _coupling_factor(self, tau: float) -> Factor:
        phase = np.exp(self.sign * 1j * tau * self._potentials.v12)
        return lambda a: a * phase

    def _factor(self, name: str, tau: float) -> Factor:
        if name == "coupling":
            return self._coupling_factor(tau)

        axis = 1 if name == "system" else 2
        if self.factor_method == "exact":
            return self._exact_factor(axis, tau)
        return self._split_factor(axis, tau)

    def _build(self) -> list[Factor]:
        dt = self.dt

        if self.splitting == "strang":
            schedule = [
                ("system", dt / 2),
                ("environment", dt / 2),
                ("coupling", dt),
                ("environment", dt / 2),
                ("system", dt / 2),
            ]
        elif self.sign < 0:
            schedule = [("system", dt), ("environment", dt), ("coupling", dt)]
        else:
            schedule = [("coupling", dt), ("environment", dt), ("system", dt)]

        if not self.spec.coupled:
            schedule = [entry for entry in schedule if entry[0] != "coupling"]

        cache: dict[tuple[str, float], Factor] = {}
        factors = []
        for name, tau in schedule:
            if (name, tau) not in cache:
                cache[(name, tau)] = self._factor(name, tau)
            factors.append(cache[(name, tau)])

        return factors

    def apply(self, amplitudes: np.ndarray) -> ComplexArray:
        """Advance raw amplitudes by one step without any norm bookkeeping."""
        out = np.asarray(amplitudes, dtype=np.complex128)
        for factor in self._factors:
            out = factor(out)
        return out

    def step(self, phi: CompositeState) -> CompositeState:
        return CompositeState(phi.grid1, phi.grid2, self.apply(phi.amplitudes))


def trotter_step(
    phi: CompositeState,
    spec: HamiltonianSpec,
    dt: float,
    *,
    sign: int = -1,
    splitting: Splitting = "lie",
    factor_method: FactorMethod = "exact",
) -> CompositeState:
    """One product-formula step of length `dt`."""
    propagator = TrotterPropagator(
        spec,
        phi.grid1,
        phi.grid2,
        dt,
        sign=sign,
        splitting=splitting,
        factor_method=factor_method,
    )
    return propagator.step(phi)


@dataclass(frozen=True)
class Snapshot:
    """Derived quantities at one step; `state` is `None` above the amplitude cap."""

    step: int
    time: float
    state: Optional[CompositeState]
    reduced: DensityOperator
    purity: float


@dataclass(frozen=True)
class EvolutionResult:
    state: CompositeState
    snapshots: tuple[Snapshot, ...]

    @property
    def times(self) -> list[float]:
        return [snapshot.time for snapshot in self.snapshots]

    def snapshot_at(self, time: float, *, tolerance: float = 1e-9) -> Snapshot:
        """The snapshot taken at `time`, else `SnapshotError`."""
        for snapshot in self.snapshots:
            if abs(snapshot.time - time) <= tolerance:
                return snapshot
        raise SnapshotError(time)


def _snapshot(
    step: int, time: float, amplitudes: np.ndarray, grid1: Grid, grid2: Grid
) -> Snapshot:
    state = CompositeState(grid1, grid2, amplitudes)
    reduced = reduced_density(state)
    keep = state if grid1.n * grid2.n <= SNAPSHOT_AMPLITUDE_CAP else None
    return Snapshot(
        step=step, time=time, state=keep, reduced=reduced, purity=purity(reduced)
    )


def evolve(
    phi0: CompositeState,
    spec: HamiltonianSpec,
    t: float,
    n: int,
    *,
    sign: int = -1,
    splitting: Splitting = "lie",
    factor_method: FactorMethod = "exact",
    snapshot_every: int = 0,
) -> EvolutionResult:
    """Apply `n` Trotter steps of length `t / n` to `phi0`.

    The norm is renormalized after every step and its drift is summed over the
    run. Once the sum exceeds `1e-8`, `NumericalInstabilityError` is raised
    naming the step. With `snapshot_every=k > 0` a snapshot is kept at step 0,
    every `k` steps and at the final step.
    """
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise DomainError(f"step count must be a positive integer, got {n!r}")
    if not (math.isfinite(t) and t >= 0):
        raise DomainError(f"evolution time must be finite and non-negative, got {t!r}")
    if snapshot_every < 0:
        raise DomainError(f"snapshot cadence must be >= 0, got {snapshot_every!r}")

    grid1, grid2 = phi0.grid1, phi0.grid2
    dt = t / n
    cell = grid1.step * grid2.step

    propagator = TrotterPropagator(
        spec,
        grid1,
        grid2,
        dt,
        sign=sign,
        splitting=splitting,
        factor_method=factor_method,
    )
    logger.debug(
        "evolving %s to t=%g in %d steps (sign=%+d, %s, %s)",
        spec.preset,
        t,
        n,
        sign,
        splitting,
        factor_method,
    )

    amplitudes = np.array(phi0.amplitudes)
    snapshots = []
    if snapshot_every:
        snapshots.append(_snapshot(0, 0.0, amplitudes, grid1, grid2))

    total_drift = 0.0
    for step in range(1, n + 1):
        amplitudes = propagator.apply(amplitudes)

        norm = math.sqrt(float(np.sum(np.abs(amplitudes) ** 2)) * cell)
        total_drift += abs(norm - 1.0)
        if not total_drift <= RUN_DRIFT_LIMIT:
            raise NumericalInstabilityError(step, total_drift)
        amplitudes /= norm

        if snapshot_every and (step % snapshot_every == 0 or step == n):
            snapshots.append(_snapshot(step, step * dt, amplitudes, grid1, grid2))

    return EvolutionResult(
        state=CompositeState(grid1, grid2, amplitudes), snapshots=tuple(snapshots)
    )


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    dt: float
    l2_error: float
    observed_order: float


@dataclass(frozen=True)
class ConvergenceTable:
    """Trotter errors against the exact propagator for increasing step counts."""

    entries: tuple[ConvergenceRow, ...]

    @property
    def fitted_order(self) -> float:
        """Least-squares slope of `-log(error)` against `log(n)`."""
        usable = [row for row in self.entries if row.l2_error > 0]
        if len(usable) < 2:
            return math.nan

        x = np.log([row.n for row in usable])
        y = -np.log([row.l2_error for row in usable])
        slope, _ = np.polyfit(x, y, 1)
        return float(slope)

    def is_monotone(self, tolerance: float = 0.05) -> bool:
        """Errors non-increasing in `n`, up to a relative `tolerance`."""
        errors = [row.l2_error for row in self.entries]
        return all(b <= a * (1.0 + tolerance) for a, b in zip(errors, errors[1:]))

    def rows(self) -> list[tuple[int, float, float, float]]:
        return [(r.n, r.dt, r.l2_error, r.observed_order) for r in self.entries]


def convergence_study(
    phi0: CompositeState,
    spec: HamiltonianSpec,
    t: float,
    n_list: Iterable[int],
    *,
    sign: int = -1,
    splitting: Splitting = "lie",
    factor_method: FactorMethod = "exact",
    reference: Optional[CompositeState] = None,
) -> ConvergenceTable:
    """Measure the global Trotter error for each step count in `n_list`.

    The reference state defaults to the exact propagator's result and is
    subject to its size cap.
    """
    counts: Sequence[int] = sorted(n_list)
    if not counts:
        raise DomainError("convergence study needs at least one step count")

    if reference is None:
        reference = exact_propagate(phi0, spec, t, sign=sign)

    entries = []
    previous: Optional[tuple[int, float]] = None
    for n in counts:
        result = evolve(
            phi0,
            spec,
            t,
            n,
            sign=sign,
            splitting=splitting,
            factor_method=factor_method,
        )
        error = distance(result.state, reference)

        order = math.nan
        if previous is not None and previous[1] > 0 and error > 0:
            order = math.log(previous[1] / error) / math.log(n / previous[0])

        row = ConvergenceRow(n=n, dt=t / n, l2_error=error, observed_order=order)
        entries.append(row)
        logger.debug("n=%d error=%.3e order=%.3f", n, error, order)
        previous = (n, error)

    return ConvergenceTable(tuple(entries))
