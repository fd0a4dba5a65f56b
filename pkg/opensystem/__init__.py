"""Simulation of a quantum system coupled to one environment mode.

Product-formula evolution on position lattices, unraveling into random pure
states, Wigner and Weyl phase-space representations, and Gaussian measures
with the reduced state as covariance.
"""

from importlib.metadata import version, PackageNotFoundError

try:
    __version__ = version("opensystem-python")
except PackageNotFoundError:
    from opensystem._version import version as __version__

from .config import Config
from .errors import OpenSystemError
from .evolve import EvolutionResult, TrotterPropagator, convergence_study
from .hamiltonian import HamiltonianSpec, build_preset, register_preset
from .lattice import GaussianMeasureSpec, Grid, make_grid
from .oracle import ExactPropagator, exact_propagate
from .scenario import Scenario
from .states import CompositeState, DensityOperator, product_state, reduced_density
from .streams import stream
from .wigner import WignerTable, joint_wigner, wigner_from_density

__all__ = [
    "Config",
    "OpenSystemError",
    "EvolutionResult",
    "TrotterPropagator",
    "convergence_study",
    "HamiltonianSpec",
    "build_preset",
    "register_preset",
    "GaussianMeasureSpec",
    "Grid",
    "make_grid",
    "ExactPropagator",
    "exact_propagate",
    "Scenario",
    "CompositeState",
    "DensityOperator",
    "product_state",
    "reduced_density",
    "stream",
    "WignerTable",
    "joint_wigner",
    "wigner_from_density",
]
