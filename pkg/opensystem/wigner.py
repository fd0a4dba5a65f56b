"""Wigner functions, Weyl characteristic functions and their marginals.

The Wigner transform evaluates the density at half-step offsets, so the
lattice is refined by a factor two through band-limited (trigonometric)
interpolation before the offset sum is Fourier transformed. Tables are
indexed `(q, p)` per subsystem, `(q1, p1, q2, p2)` for a composite state,
with momenta in ascending order.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import DomainError, ResourceLimitError, ShapeError
from .lattice import ComplexArray, Grid, RealArray, dft_matrix
from .states import CompositeState, DensityOperator

logger = logging.getLogger(__name__)

#: Default cap on the number of entries of a composite (4-D) table.
JOINT_MEMORY_CAP: int = 2**20
#: Imaginary residue tolerated before it is discarded.
IMAGINARY_TOLERANCE: float = 1e-10
#: Largest grid on which the characteristic function is evaluated.
CHARACTERISTIC_CAP: int = 128


@dataclass(frozen=True)
class WignerTable:
    """Real Wigner values over one or two phase planes.

    `values` has shape `(n, n)` for one grid and `(n1, n1, n2, n2)` for two;
    `imag_residue` records the largest imaginary part that was discarded.
    """

    grids: tuple[Grid, ...]
    values: RealArray
    imag_residue: float = 0.0

    def __post_init__(self) -> None:
        expected: tuple[int, ...] = ()
        for grid in self.grids:
            expected += (grid.n, grid.n)

        if not self.grids or len(self.grids) > 2:
            raise DomainError("a Wigner table covers one or two subsystems")
        if np.shape(self.values) != expected:
            raise ShapeError("Wigner values", expected, np.shape(self.values))

    @property
    def cell(self) -> float:
        """Phase-space volume of one lattice cell."""
        return math.prod(grid.step * grid.momentum_step for grid in self.grids)

    def mass(self) -> float:
        return float(np.sum(self.values) * self.cell)


@dataclass(frozen=True)
class WeylCharacteristic:
    """`chi(u, v) = tr(rho exp(-i (u q + v p)))` on a displacement lattice.

    `u` steps by the momentum step and `v` by the position step, both centred
    on zero; `values[a, b]` belongs to `(u[a], v[b])`.
    """

    grid: Grid
    u: RealArray
    v: RealArray
    values: ComplexArray


@lru_cache(maxsize=16)
def _interpolation_matrix(grid: Grid) -> ComplexArray:
    """Trigonometric interpolation from the grid onto the half-step grid.

    Row `2k` reproduces sample `k` exactly; odd rows are the midpoints.
    """
    n = grid.n
    # entry (f, k) depends only on the half-step distance f - 2k
    distances = np.arange(-2 * n + 1, 2 * n)
    waves = np.exp(0.5j * grid.step * np.outer(distances, grid.momenta))
    kernel = waves.sum(axis=1) / n

    rows = np.arange(2 * n)[:, None]
    columns = 2 * np.arange(n)[None, :]
    matrix = kernel[rows - columns + 2 * n - 1]
    matrix.setflags(write=False)
    return matrix


@lru_cache(maxsize=16)
def _offset_plan(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Offsets `-n/2..n/2` with trapezoid end weights, and their fold onto residues."""
    offsets = np.arange(-(n // 2), n // 2 + 1)
    weights = np.ones(offsets.shape[0])
    weights[0] = weights[-1] = 0.5

    fold = np.zeros((offsets.shape[0], n))
    fold[np.arange(offsets.shape[0]), offsets % n] = 1.0
    return offsets, weights, fold


def _pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    offsets, _, _ = _offset_plan(n)
    centers = 2 * np.arange(n)[:, None]
    plus = (centers + offsets[None, :]) % (2 * n)
    minus = (centers - offsets[None, :]) % (2 * n)
    return plus, minus


def _real_part(values: np.ndarray, what: str) -> tuple[RealArray, float]:
    residue = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if residue > IMAGINARY_TOLERANCE:
        logger.warning("%s has imaginary residue %.3e", what, residue)
    return np.ascontiguousarray(values.real), residue


def wigner_from_density(rho: DensityOperator) -> WignerTable:
    """`W(q, p) = (1/2pi) sum_s rho(q + s/2, q - s/2) exp(-i p s) ds` on the lattice.

    ## Example

    ```python
    table = wigner_from_density(projector(gaussian_packet(grid), grid))
    table.mass()  # 1.0
    ```
    """
    grid = rho.grid
    n = grid.n

    interpolation = _interpolation_matrix(grid)
    refined = interpolation @ rho.kernel @ interpolation.conj().T

    _, weights, fold = _offset_plan(n)
    plus, minus = _pair_indices(n)
    folded = (refined[plus, minus] * weights[None, :]) @ fold

    values = np.fft.fft(folded, axis=1) * (grid.step / (2.0 * math.pi))
    values = np.fft.fftshift(values, axes=1)

    real, residue = _real_part(values, "Wigner table")
    return WignerTable((grid,), real, residue)


def joint_wigner(
    phi: CompositeState, *, memory_cap: int = JOINT_MEMORY_CAP
) -> WignerTable:
    """The Wigner table of `|phi><phi|` over both phase planes.

    Raises `ResourceLimitError` when `n1^2 * n2^2` exceeds `memory_cap`.
    """
    grid1, grid2 = phi.grid1, phi.grid2
    n1, n2 = grid1.n, grid2.n

    entries = n1 * n1 * n2 * n2
    if entries > memory_cap:
        raise ResourceLimitError(
            "joint Wigner table", limit=memory_cap, requested=entries
        )

    refined = _interpolation_matrix(grid1) @ phi.amplitudes
    refined = refined @ _interpolation_matrix(grid2).T

    _, weights1, fold1 = _offset_plan(n1)
    _, weights2, fold2 = _offset_plan(n2)
    plus1, minus1 = _pair_indices(n1)
    plus2, minus2 = _pair_indices(n2)

    forward = refined[plus1[:, :, None, None], plus2[None, None, :, :]]
    backward = refined[minus1[:, :, None, None], minus2[None, None, :, :]].conj()
    weights = weights1[None, :, None, None] * weights2[None, None, None, :]

    folded = np.einsum(
        "amcn,mr,ns->arcs", forward * backward * weights, fold1, fold2, optimize=True
    )

    scale = grid1.step * grid2.step / (2.0 * math.pi) ** 2
    values = np.fft.fftn(folded, axes=(1, 3)) * scale
    values = np.fft.fftshift(values, axes=(1, 3))

    real, residue = _real_part(values, "joint Wigner table")
    logger.debug("joint Wigner table with %d entries", entries)
    return WignerTable((grid1, grid2), real, residue)


def marginalize_wigner(table: WignerTable) -> WignerTable:
    """Integrate a composite table over the environment phase plane."""
    if len(table.grids) != 2:
        raise DomainError("marginalization needs a composite (4-D) table")

    environment = table.grids[1]
    cell = environment.step * environment.momentum_step
    values = np.sum(table.values, axis=(2, 3)) * cell

    return WignerTable((table.grids[0],), values, table.imag_residue)


def wigner_marginals(table: WignerTable) -> tuple[RealArray, RealArray]:
    """Position density over `grid.points` and momentum density over sorted momenta."""
    if len(table.grids) != 1:
        raise DomainError("marginals are taken of a single-subsystem table")

    grid = table.grids[0]
    position = np.sum(table.values, axis=1) * grid.momentum_step
    momentum = np.sum(table.values, axis=0) * grid.step
    return position, momentum


def slice_4d(table: WignerTable, k2: int, j2: int) -> WignerTable:
    """The `(q1, p1)` plane at position index `k2` and sorted momentum index `j2`."""
    if len(table.grids) != 2:
        raise DomainError("slicing needs a composite (4-D) table")

    n2 = table.grids[1].n
    if not (0 <= k2 < n2 and 0 <= j2 < n2):
        raise ShapeError("slice indices", f"0..{n2 - 1}", (k2, j2))

    plane = table.values[:, :, k2, j2]
    return WignerTable((table.grids[0],), plane, table.imag_residue)


def overlap(a: WignerTable, b: WignerTable) -> float:
    """`2 pi * integral(W_a * W_b)`, equal to `tr(rho_a rho_b)` for two densities."""
    if a.values.shape != b.values.shape:
        raise ShapeError("Wigner overlap operands", a.values.shape, b.values.shape)

    planes = len(a.grids)
    return float((2.0 * math.pi) ** planes * np.sum(a.values * b.values) * a.cell)


def _displacement_lattice(grid: Grid, count: int, step: float) -> RealArray:
    integral = isinstance(count, int) and not isinstance(count, bool)
    if not integral or not 1 <= count <= grid.n:
        raise ResourceLimitError("displacement lattice", limit=grid.n, requested=count)
    return (np.arange(count) - count // 2) * step


def _momentum_matrix(grid: Grid) -> ComplexArray:
    transform = dft_matrix(grid)
    return transform.conj().T @ (grid.momenta[:, None] * transform)


def weyl_characteristic(
    rho: DensityOperator,
    u_count: Optional[int] = None,
    v_count: Optional[int] = None,
) -> WeylCharacteristic:
    """Evaluate `tr(rho exp(-i (u q + v p)))` on a displacement lattice.

    `q` is the diagonal position and `p` the DFT-conjugated momentum of the
    grid. These do not obey the canonical commutator on a finite lattice, so the
    exponential is not split into a phase and a shift: every generator
    `u q + v p` is diagonalized instead, one column of `v` at a time. Counts
    default to `grid.n`; `u` steps by the momentum step and `v` by the position
    step. Grids above `CHARACTERISTIC_CAP` points raise `ResourceLimitError`.
    """
    grid = rho.grid
    if grid.n > CHARACTERISTIC_CAP:
        raise ResourceLimitError(
            "characteristic function grid", limit=CHARACTERISTIC_CAP, requested=grid.n
        )

    u = _displacement_lattice(grid, u_count or grid.n, grid.momentum_step)
    v = _displacement_lattice(grid, v_count or grid.n, grid.step)

    position = np.diag(grid.points.astype(np.complex128))
    momentum = _momentum_matrix(grid)
    matrix = rho.matrix

    values = np.empty((u.size, v.size), dtype=np.complex128)
    for column, shift in enumerate(v):
        generators = u[:, None, None] * position[None] + shift * momentum[None]
        energies, vectors = np.linalg.eigh(generators)
        # diagonal of V^H rho V for each generator
        weights = np.sum(vectors.conj() * (matrix @ vectors), axis=1)
        values[:, column] = np.sum(np.exp(-1j * energies) * weights, axis=1)

    logger.debug("characteristic function on %dx%d shifts", u.size, v.size)
    return WeylCharacteristic(grid=grid, u=u, v=v, values=values)


def wigner_from_characteristic(chi: WeylCharacteristic) -> WignerTable:
    """Inverse symplectic Fourier transform back to a Wigner table."""
    grid = chi.grid
    momenta = grid.sorted_momenta

    position_waves = np.exp(1j * chi.u[:, None] * grid.points[None, :])
    momentum_waves = np.exp(1j * chi.v[:, None] * momenta[None, :])

    cell = grid.momentum_step * grid.step
    values = position_waves.T @ chi.values @ momentum_waves
    values *= cell / (2.0 * math.pi) ** 2

    return WignerTable((grid,), np.ascontiguousarray(values.real), 0.0)
