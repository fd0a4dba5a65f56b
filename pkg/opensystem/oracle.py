"""Brute-force reference computations on dense matrices.

Nothing here shares code with the fast paths beyond grid construction and
the dense Hamiltonian assembly; these are the ground truth the fast paths
are checked against.
"""

import logging
import math
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import OracleError, ResourceLimitError
from .hamiltonian import DENSE_CAP, HamiltonianSpec, build_dense_hamiltonian
from .lattice import ComplexArray, Grid, dft_matrix
from .states import CompositeState, DensityOperator, ZERO_MASS

logger = logging.getLogger(__name__)

#: Largest subsystem grid for dense displacement operators.
DISPLACEMENT_CAP: int = 256
#: Largest composite dimension for the full `|phi><phi|` partial trace.
PARTIAL_TRACE_CAP: int = 1024


class ExactPropagator:
    """`exp(sign * i * t * H)` from a single cached eigendecomposition.

    ## Example

    ```python
    oracle = ExactPropagator(spec, grid1, grid2)
    exact = oracle.propagate(phi0, 1.0)
    ```
    """

    def __init__(
        self, spec: HamiltonianSpec, grid1: Grid, grid2: Grid, *, cap: int = DENSE_CAP
    ):
        self.grid1 = grid1
        self.grid2 = grid2

        hamiltonian = build_dense_hamiltonian(spec, grid1, grid2, cap=cap)
        try:
            self.energies, self.vectors = scipy.linalg.eigh(hamiltonian)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise OracleError(f"eigendecomposition failed: {exc}") from exc

        logger.debug("oracle ready, dimension %d", hamiltonian.shape[0])

    def unitary(self, t: float, *, sign: int = -1) -> ComplexArray:
        phases = np.exp(sign * 1j * t * self.energies)
        return (self.vectors * phases) @ self.vectors.conj().T

    def propagate(
        self, phi: CompositeState, t: float, *, sign: int = -1
    ) -> CompositeState:
        coefficients = self.vectors.conj().T @ phi.amplitudes.reshape(-1)
        evolved = self.vectors @ (np.exp(sign * 1j * t * self.energies) * coefficients)
        return CompositeState(self.grid1, self.grid2, evolved.reshape(phi.shape))


def exact_propagate(
    phi0: CompositeState,
    spec: HamiltonianSpec,
    t: float,
    *,
    sign: int = -1,
    propagator: Optional[ExactPropagator] = None,
) -> CompositeState:
    """Propagate `phi0` by the dense matrix exponential of the Hamiltonian."""
    oracle = propagator or ExactPropagator(spec, phi0.grid1, phi0.grid2)
    return oracle.propagate(phi0, t, sign=sign)


def dense_momentum_operator(grid: Grid) -> ComplexArray:
    """`p` as a dense matrix, the DFT-conjugate of the diagonal momentum."""
    transform = dft_matrix(grid)
    return transform.conj().T @ (grid.momenta[:, None] * transform)


def exact_displacement(
    grid: Grid, u: float, v: float, *, cap: int = DISPLACEMENT_CAP
) -> ComplexArray:
    """Dense `exp(-i (u q + v p))` by matrix exponential."""
    if grid.n > cap:
        raise ResourceLimitError("dense displacement", limit=cap, requested=grid.n)

    position = np.diag(grid.points.astype(np.complex128))
    generator = u * position + v * dense_momentum_operator(grid)
    return scipy.linalg.expm(-1j * generator)


def partial_trace(
    phi: CompositeState, *, cap: int = PARTIAL_TRACE_CAP
) -> DensityOperator:
    """Reduced density from the full projector `|phi><phi|` by matrix partial trace."""
    n1, n2 = phi.shape
    if n1 * n2 > cap:
        raise ResourceLimitError("composite projector", limit=cap, requested=n1 * n2)

    vector = phi.amplitudes.reshape(-1) * math.sqrt(phi.grid1.step * phi.grid2.step)
    projector = np.outer(vector, vector.conj()).reshape(n1, n2, n1, n2)
    reduced = np.trace(projector, axis1=1, axis2=3)

    return DensityOperator(phi.grid1, reduced / phi.grid1.step)


def enumerate_unraveling(phi: CompositeState) -> DensityOperator:
    """Average `|psi_l><psi_l|` over every environment point with its exact weight."""
    kernel = np.zeros((phi.grid1.n, phi.grid1.n), dtype=np.complex128)

    for index in range(phi.grid2.n):
        column = phi.amplitudes[:, index]
        mass = float(np.sum(np.abs(column) ** 2)) * phi.grid1.step
        if mass <= ZERO_MASS:
            continue

        state = column / math.sqrt(mass)
        kernel += (mass * phi.grid2.step) * np.outer(state, state.conj())

    return DensityOperator(phi.grid1, kernel)
