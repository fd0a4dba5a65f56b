"""Kinetic-plus-potential Hamiltonians, their phase factors and presets.

A Hamiltonian here is `p1^2/2m1 + V1(q1) + p2^2/2m2 + V2(q2) + V12(q1, q2)`.
Potentials are either callables evaluated on the grid points or tables
already sampled on them.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Union

import numpy as np
from numpy.typing import ArrayLike

from .errors import (
    AlreadyRegisteredError,
    ConfigError,
    DomainError,
    PresetNotFoundError,
    ResourceLimitError,
    ShapeError,
)
from .lattice import (
    ComplexArray,
    Grid,
    RealArray,
    dft_matrix,
    from_momentum,
    kinetic_multiplier,
    to_momentum,
)
from .states import CompositeState

logger = logging.getLogger(__name__)

#: Largest composite dimension `n1 * n2` assembled as a dense matrix.
DENSE_CAP: int = 4096

Potential = Union[Callable[..., ArrayLike], ArrayLike]
PresetFactory = Callable[..., "HamiltonianSpec"]


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """Masses and potentials of a system coupled to one environment mode.

    `v12=None` means no coupling. Callable potentials receive the grid points
    (`v12` receives the two point arrays with `ij` broadcasting).
    """

    m1: float
    m2: float
    v1: Potential
    v2: Potential
    v12: Optional[Potential] = None
    preset: str = "custom"
    parameters: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("m1", "m2"):
            value = getattr(self, name)
            if not value > 0:
                raise DomainError(f"mass {name} must be positive, got {value!r}")

    @property
    def coupled(self) -> bool:
        return self.v12 is not None


@dataclass(frozen=True)
class TabulatedPotentials:
    """Potentials of a `HamiltonianSpec` sampled on a pair of grids."""

    v1: RealArray
    v2: RealArray
    v12: RealArray


def _real_table(values: ArrayLike, what: str, shape: tuple[int, ...]) -> RealArray:
    array = np.asarray(values)

    if array.shape != shape:
        try:
            array = np.broadcast_to(array, shape)
        except ValueError:
            raise ShapeError(what, shape, array.shape) from None

    if np.iscomplexobj(array):
        if np.any(np.abs(array.imag) > 0):
            raise DomainError(f"{what} must be real-valued")
        array = array.real

    table = np.array(array, dtype=np.float64)
    if not np.all(np.isfinite(table)):
        raise DomainError(f"{what} has non-finite entries")

    return table


def tabulate(spec: HamiltonianSpec, grid1: Grid, grid2: Grid) -> TabulatedPotentials:
    """Sample every potential of `spec` on the grids, checking shape and realness."""
    q1 = grid1.points
    q2 = grid2.points

    v1 = spec.v1(q1) if callable(spec.v1) else spec.v1
    v2 = spec.v2(q2) if callable(spec.v2) else spec.v2

    if spec.v12 is None:
        v12: ArrayLike = np.zeros((grid1.n, grid2.n))
    elif callable(spec.v12):
        v12 = spec.v12(q1[:, None], q2[None, :])
    else:
        v12 = spec.v12

    return TabulatedPotentials(
        v1=_real_table(v1, "potential V1", (grid1.n,)),
        v2=_real_table(v2, "potential V2", (grid2.n,)),
        v12=_real_table(v12, "coupling V12", (grid1.n, grid2.n)),
    )


def apply_potential_phase(
    phi: CompositeState,
    potential: ArrayLike,
    dt: float,
    *,
    axis: Optional[int] = None,
    sign: int = -1,
) -> CompositeState:
    """Multiply the amplitudes by `exp(sign * i * dt * V)`.

    `potential` is a table over both grids, or over one of them when `axis`
    (1 for the system, 2 for the environment) is given.
    """
    if axis is None:
        table = _real_table(potential, "potential", phi.shape)
    elif axis == 1:
        table = _real_table(potential, "potential", (phi.grid1.n,))[:, None]
    elif axis == 2:
        table = _real_table(potential, "potential", (phi.grid2.n,))[None, :]
    else:
        raise DomainError(f"axis must be 1 or 2, got {axis!r}")

    phase = np.exp(sign * 1j * dt * table)
    return CompositeState(phi.grid1, phi.grid2, phi.amplitudes * phase)


def apply_kinetic_phase(
    phi: CompositeState, axis: int, mass: float, dt: float, *, sign: int = -1
) -> CompositeState:
    """Apply `exp(sign * i * dt * p^2 / 2m)` along one subsystem axis.

    ## Example

    ```python
    half = apply_kinetic_phase(phi, 1, 1.0, 0.05)
    full = apply_kinetic_phase(half, 1, 1.0, 0.05)  # same as dt=0.1
    ```
    """
    if axis not in (1, 2):
        raise DomainError(f"axis must be 1 or 2, got {axis!r}")
    if not mass > 0:
        raise DomainError(f"mass must be positive, got {mass!r}")

    grid = phi.grid1 if axis == 1 else phi.grid2
    array_axis = axis - 1

    multiplier = kinetic_multiplier(grid, mass, dt, sign=sign)
    multiplier = multiplier[:, None] if array_axis == 0 else multiplier[None, :]

    momentum = to_momentum(phi.amplitudes, grid, axis=array_axis)
    amplitudes = from_momentum(momentum * multiplier, grid, axis=array_axis)

    return CompositeState(phi.grid1, phi.grid2, amplitudes)


def subsystem_hamiltonian(
    grid: Grid, mass: float, potential: ArrayLike
) -> ComplexArray:
    """Dense `p^2/2m + V` on one grid, the kinetic part built with the FFT."""
    table = _real_table(potential, "potential", (grid.n,))
    energies = grid.momenta**2 / (2.0 * mass)

    identity = np.eye(grid.n, dtype=np.complex128)
    kinetic = from_momentum(energies[:, None] * to_momentum(identity, grid), grid)
    hamiltonian = kinetic + np.diag(table)

    return 0.5 * (hamiltonian + hamiltonian.conj().T)


def _dense_kinetic(grid: Grid, mass: float) -> ComplexArray:
    transform = dft_matrix(grid)
    energies = grid.momenta**2 / (2.0 * mass)
    return transform.conj().T @ (energies[:, None] * transform)


def build_dense_hamiltonian(
    spec: HamiltonianSpec, grid1: Grid, grid2: Grid, *, cap: int = DENSE_CAP
) -> ComplexArray:
    """Assemble `H1 (x) I + I (x) H2 + diag(V12)` as one dense matrix.

    Index `k * n2 + l` addresses `(q1_k, q2_l)`, matching a row-major
    flattening of `CompositeState.amplitudes`. Raises `ResourceLimitError`
    when `n1 * n2` exceeds `cap`.
    """
    dimension = grid1.n * grid2.n
    if dimension > cap:
        raise ResourceLimitError("dense Hamiltonian", limit=cap, requested=dimension)

    potentials = tabulate(spec, grid1, grid2)

    h1 = _dense_kinetic(grid1, spec.m1) + np.diag(potentials.v1)
    h2 = _dense_kinetic(grid2, spec.m2) + np.diag(potentials.v2)

    hamiltonian = (
        np.kron(h1, np.eye(grid2.n))
        + np.kron(np.eye(grid1.n), h2)
        + np.diag(potentials.v12.reshape(-1))
    )
    hamiltonian = 0.5 * (hamiltonian + hamiltonian.conj().T)

    logger.debug("assembled dense Hamiltonian of dimension %d", dimension)
    return hamiltonian


PRESETS: dict[str, PresetFactory] = {}


def register_preset(
    name: Optional[str] = None,
) -> Callable[[PresetFactory], PresetFactory]:
    """Decorator registering a Hamiltonian factory under a preset name.

    The factory's keyword arguments are the preset's parameters.

    ## Example

    ```python
    @register_preset()
    def free(m1: float = 1.0, m2: float = 1.0) -> HamiltonianSpec:
        return HamiltonianSpec(m1, m2, np.zeros_like, np.zeros_like, preset="free")
    ```
    """

    def wrapper(func: PresetFactory) -> PresetFactory:
        key = name or func.__name__
        if key in PRESETS:
            raise AlreadyRegisteredError("preset", key)

        PRESETS[key] = func
        logger.debug("preset '%s' registered", key)
        return func

    return wrapper


def get_preset(name: str) -> PresetFactory:
    try:
        return PRESETS[name]
    except KeyError:
        raise PresetNotFoundError(name) from None


def build_preset(
    name: str, parameters: Optional[Mapping[str, Any]] = None
) -> HamiltonianSpec:
    """Instantiate a registered preset, reporting bad parameters as `ConfigError`."""
    factory = get_preset(name)
    params = dict(parameters or {})

    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError("hamiltonian.parameters", str(exc)) from exc


def _harmonic(mass: float, omega: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda q: 0.5 * mass * omega**2 * q**2


def _bilinear(coupling: float) -> Optional[Callable[..., np.ndarray]]:
    if coupling == 0:
        return None
    return lambda q1, q2: coupling * q1 * q2


@register_preset()
def coupled_harmonic(
    m1: float = 1.0,
    m2: float = 1.0,
    omega1: float = 1.0,
    omega2: float = 1.0,
    coupling: float = 0.1,
) -> HamiltonianSpec:
    """Two oscillators with bilinear coupling `coupling * q1 * q2`."""
    return HamiltonianSpec(
        m1=m1,
        m2=m2,
        v1=_harmonic(m1, omega1),
        v2=_harmonic(m2, omega2),
        v12=_bilinear(coupling),
        preset="coupled_harmonic",
        parameters=dict(m1=m1, m2=m2, omega1=omega1, omega2=omega2, coupling=coupling),
    )


@register_preset()
def free_plus_harmonic_env(
    m1: float = 1.0,
    m2: float = 1.0,
    omega2: float = 1.0,
    coupling: float = 0.0,
) -> HamiltonianSpec:
    """A free particle attached to a harmonic environment mode."""
    return HamiltonianSpec(
        m1=m1,
        m2=m2,
        v1=np.zeros_like,
        v2=_harmonic(m2, omega2),
        v12=_bilinear(coupling),
        preset="free_plus_harmonic_env",
        parameters=dict(m1=m1, m2=m2, omega2=omega2, coupling=coupling),
    )


@register_preset()
def double_well_system(
    m1: float = 1.0,
    m2: float = 1.0,
    barrier: float = 1.0,
    separation: float = 1.5,
    omega2: float = 1.0,
    coupling: float = 0.1,
) -> HamiltonianSpec:
    """Quartic double well `barrier * ((q/separation)^2 - 1)^2` on the system."""
    if not separation > 0:
        raise ConfigError("hamiltonian.parameters.separation", "must be positive")

    def well(q: np.ndarray) -> np.ndarray:
        return barrier * ((q / separation) ** 2 - 1.0) ** 2

    return HamiltonianSpec(
        m1=m1,
        m2=m2,
        v1=well,
        v2=_harmonic(m2, omega2),
        v12=_bilinear(coupling),
        preset="double_well_system",
        parameters=dict(
            m1=m1,
            m2=m2,
            barrier=barrier,
            separation=separation,
            omega2=omega2,
            coupling=coupling,
        ),
    )


def load_potential_table(path: Union[str, Path], ndim: int) -> RealArray:
    """Read a comma-separated potential table; `#` lines are comments."""
    try:
        table = np.loadtxt(
            path, delimiter=",", comments="#", ndmin=ndim, dtype=np.float64
        )
    except (OSError, ValueError) as exc:
        reason = f"cannot read {path}: {exc}"
        raise ConfigError("hamiltonian.parameters", reason) from exc

    if ndim == 1:
        table = table.reshape(-1)
    return table


@register_preset()
def tabulated(
    v1: str,
    v2: str,
    v12: Optional[str] = None,
    m1: float = 1.0,
    m2: float = 1.0,
) -> HamiltonianSpec:
    """Potentials read from CSV files sampled on the configured grids.

    `v1` and `v2` hold one value per grid point, `v12` an `n1 x n2` matrix.
    """
    return HamiltonianSpec(
        m1=m1,
        m2=m2,
        v1=load_potential_table(v1, 1),
        v2=load_potential_table(v2, 1),
        v12=None if v12 is None else load_potential_table(v12, 2),
        preset="tabulated",
        parameters=dict(v1=str(v1), v2=str(v2), v12=v12, m1=m1, m2=m2),
    )
