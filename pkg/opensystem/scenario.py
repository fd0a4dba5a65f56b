"""Turn a validated `Config` into the objects a run works with."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .config import Config
from .errors import DomainError
from .hamiltonian import HamiltonianSpec, build_preset
from .lattice import (
    ComplexArray,
    GaussianMeasureSpec,
    Grid,
    embed_gaussian,
    gaussian_packet,
    hermite_function,
    make_grid,
    quadrature_norm,
)
from .states import CompositeState, product_state

logger = logging.getLogger(__name__)

#: Preset parameters naming files, resolved against the configuration's directory.
TABLE_PARAMETERS = ("v1", "v2", "v12")


def reference_state(
    grid: Grid, reference: GaussianMeasureSpec, coefficients: list[float]
) -> ComplexArray:
    """The environment reference state, a Hermite expansion carried to flat coordinates.

    The embedding is unitary only in the continuum, so the lattice vector is
    renormalized once here.
    """
    function = hermite_function(coefficients, reference)
    embedded = embed_gaussian(function(grid.points), reference, grid)

    norm = quadrature_norm(embedded, grid)
    if not norm > 0:
        raise DomainError("reference state vanishes on the grid")

    logger.debug("reference state lattice norm %.12f before renormalizing", norm)
    return embedded / norm


def entangled_two_peak(grid1: Grid, grid2: Grid, separation: float) -> CompositeState:
    """`(e1 f1 + e2 f2) / sqrt(2)` from packets displaced by `+-separation/2`."""
    half = 0.5 * separation
    e1, e2 = gaussian_packet(grid1, -half), gaussian_packet(grid1, half)
    f1, f2 = gaussian_packet(grid2, -half), gaussian_packet(grid2, half)

    amplitudes = (np.outer(e1, f1) + np.outer(e2, f2)) / math.sqrt(2.0)
    return CompositeState.normalized(grid1, grid2, amplitudes)


def _resolve_tables(parameters: dict[str, Any], base_dir: Path) -> dict[str, Any]:
    resolved = dict(parameters)
    for key in TABLE_PARAMETERS:
        value = resolved.get(key)
        if isinstance(value, str) and not Path(value).is_absolute():
            resolved[key] = str(base_dir / value)
    return resolved


@dataclass(frozen=True)
class Scenario:
    """Grids, Hamiltonian, reference measure and initial state of one run.

    ## Example

    ```python
    scenario = Scenario.from_config(Config("scenario.yaml"))
    result = evolve(scenario.initial, scenario.spec, 1.0, 256)
    ```
    """

    grid1: Grid
    grid2: Grid
    spec: HamiltonianSpec
    reference: GaussianMeasureSpec
    initial: CompositeState

    @classmethod
    def from_config(cls, config: Config) -> "Scenario":
        grid1 = make_grid(**config.get("system", section="grids"))
        grid2 = make_grid(**config.get("environment", section="grids"))

        preset = config.get("preset", section="hamiltonian")
        parameters = config.get("parameters", section="hamiltonian")
        if preset == "tabulated":
            parameters = _resolve_tables(parameters, config.base_dir)
        spec = build_preset(preset, parameters)

        reference = GaussianMeasureSpec(
            **config.get("reference", section="initial.environment")
        )

        if config.get("kind", section="initial") == "entangled_two_peak":
            separation = config.get("separation", section="initial")
            initial = entangled_two_peak(grid1, grid2, separation)
        else:
            system = config.get("system", section="initial")
            coefficients = config.get("coefficients", section="initial.environment")

            psi1 = gaussian_packet(grid1, **system)
            psi2 = reference_state(grid2, reference, coefficients)
            initial = product_state(psi1, grid1, psi2, grid2)

        logger.debug("scenario %s on %dx%d grids", spec.preset, grid1.n, grid2.n)
        return cls(grid1, grid2, spec, reference, initial)
