"""Acceptance criteria evaluated at pinned seeds and desk-scale grids.

Each criterion is a plain function `(seed, tolerance_scale) -> CriterionResult`
registered with `@criterion`. Tolerances are multiplied by `tolerance_scale`,
so a tiny scale makes a criterion fail on purpose.
"""

import json
import logging
import math
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, Optional

import numpy as np

from opensystem.errors import (
    AlreadyRegisteredError,
    ConfigError,
    OpenSystemError,
    SnapshotError,
)
from opensystem.evolve import TrotterPropagator, convergence_study, evolve
from opensystem.export import write_table
from opensystem.hamiltonian import coupled_harmonic
from opensystem.hilbert_measure import (
    empirical_covariance,
    from_density,
    monte_carlo_band,
    sample_states,
    track_evolution,
)
from opensystem.lattice import gaussian_packet, make_grid
from opensystem.oracle import enumerate_unraveling, partial_trace
from opensystem.scenario import entangled_two_peak
from opensystem.states import (
    CompositeState,
    chapman_kolmogorov_check,
    marginal_density_1,
    momentum_density,
    product_state,
    projector,
    random_state,
    reduced_density,
)
from opensystem.streams import GAUSSIAN, STATES, UNRAVEL, stream
from opensystem.tasks import bounded_gather, run_blocking
from opensystem.unravel import mc_density_estimate, process_snapshot
from opensystem.wigner import (
    joint_wigner,
    marginalize_wigner,
    overlap,
    wigner_from_density,
    wigner_marginals,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CriterionResult:
    id: str
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


CriterionFunc = Callable[[int, float], CriterionResult]


@dataclass(frozen=True)
class Criterion:
    id: str
    name: str
    func: CriterionFunc


CRITERIA: Dict[str, Criterion] = {}


def criterion(id: str, name: str) -> Callable[[CriterionFunc], CriterionFunc]:
    """Decorator registering an acceptance criterion under `id`."""

    def wrapper(func: CriterionFunc) -> CriterionFunc:
        if id in CRITERIA:
            raise AlreadyRegisteredError("criterion", id)

        CRITERIA[id] = Criterion(id, name, func)
        logger.debug("criterion '%s' registered", id)
        return func

    return wrapper


def _packet_state(n: int, length: float, shift: float) -> CompositeState:
    grid = make_grid(n, length)
    return product_state(
        gaussian_packet(grid, shift), grid, gaussian_packet(grid), grid
    )


@criterion("C1", "Trotter limit")
def trotter_order(seed: int, tolerance_scale: float) -> CriterionResult:
    """Lie splitting converges to the exact propagator at first order."""
    phi0 = _packet_state(32, 12.0, 0.5)
    spec = coupled_harmonic(coupling=0.1)

    table = convergence_study(phi0, spec, 1.0, [64, 128, 256, 512])
    order = table.fitted_order
    tolerance = 0.2 * tolerance_scale

    errors = ", ".join(f"{row.l2_error:.3e}" for row in table.entries)
    return CriterionResult(
        id="C1",
        name="Trotter limit",
        passed=abs(order - 1.0) <= tolerance and table.is_monotone(),
        value=order,
        tolerance=tolerance,
        detail=f"fitted order {order:.3f}, errors {errors}",
    )


@criterion("C2", "unraveling")
def unraveling(seed: int, tolerance_scale: float) -> CriterionResult:
    """Exhaustive enumeration is exact; sampled estimates converge like N^-1/2."""
    grid = make_grid(32, 12.0)
    phi = random_state(grid, grid, stream(seed, STATES, 0))
    rho = reduced_density(phi)

    exhaustive = enumerate_unraveling(phi).hilbert_schmidt(rho)
    exact_tolerance = 1e-12 * tolerance_scale

    counts = [100, 1_000, 10_000]
    repeats = 8
    rms = []
    for count in counts:
        squared = []
        for repeat in range(repeats):
            rng = stream(seed, UNRAVEL, repeat, count)
            estimate, _ = mc_density_estimate(phi, rng, count)
            squared.append(estimate.hilbert_schmidt(rho) ** 2)
        rms.append(math.sqrt(float(np.mean(squared))))

    slope, _ = np.polyfit(np.log(counts), np.log(rms), 1)
    tolerance = 0.15 * tolerance_scale

    return CriterionResult(
        id="C2",
        name="unraveling",
        passed=exhaustive <= exact_tolerance and abs(slope + 0.5) <= tolerance,
        value=float(slope),
        tolerance=tolerance,
        detail=f"exhaustive error {exhaustive:.3e}, log-log slope {slope:.3f}",
    )


@criterion("C3", "Wigner marginalization")
def wigner_marginalization(seed: int, tolerance_scale: float) -> CriterionResult:
    """Reduced Wigner by both paths, and its marginals against the densities."""
    grid = make_grid(32, 12.0)
    product = _packet_state(32, 12.0, 1.0)
    states = {
        "product": product,
        "entangled": entangled_two_peak(grid, grid, 2.0),
        "evolved": evolve(product, coupled_harmonic(coupling=0.5), 1.0, 64).state,
    }

    path_tolerance = 1e-7 * tolerance_scale
    marginal_tolerance = 1e-8 * tolerance_scale
    worst_path = worst_marginal = 0.0

    for phi in states.values():
        rho = reduced_density(phi)
        direct = wigner_from_density(rho)
        through_joint = marginalize_wigner(joint_wigner(phi))
        worst_path = max(
            worst_path, float(np.max(np.abs(direct.values - through_joint.values)))
        )

        position, momentum = wigner_marginals(direct)
        worst_marginal = max(
            worst_marginal,
            float(np.max(np.abs(position - marginal_density_1(phi).weights))),
            float(np.max(np.abs(momentum - momentum_density(rho)))),
        )

    return CriterionResult(
        id="C3",
        name="Wigner marginalization",
        passed=worst_path <= path_tolerance and worst_marginal <= marginal_tolerance,
        value=worst_path,
        tolerance=path_tolerance,
        detail=f"two-path {worst_path:.3e}, marginals {worst_marginal:.3e}",
    )


@criterion("C4", "partial-trace kernel")
def partial_trace_kernel(seed: int, tolerance_scale: float) -> CriterionResult:
    """Kernel-integral reduced density against the matrix partial trace."""
    grid1, grid2 = make_grid(16, 10.0), make_grid(32, 12.0)
    tolerance = 1e-12 * tolerance_scale

    worst = 0.0
    for trial in range(100):
        phi = random_state(grid1, grid2, stream(seed, STATES, 1, trial))
        worst = max(worst, partial_trace(phi).hilbert_schmidt(reduced_density(phi)))

    return CriterionResult(
        id="C4",
        name="partial-trace kernel",
        passed=worst <= tolerance,
        value=worst,
        tolerance=tolerance,
        detail=f"worst Hilbert-Schmidt difference {worst:.3e} over 100 states",
    )


@criterion("C5", "Gaussian measure")
def gaussian_measure(seed: int, tolerance_scale: float) -> CriterionResult:
    """Empirical covariance tracks the reduced density along a decohering run."""
    count = 10_000
    phi0 = _packet_state(32, 12.0, 1.0)
    result = evolve(
        phi0, coupled_harmonic(coupling=0.5), 2.0, 128, snapshot_every=32
    )

    densities = [(s.time, s.reduced) for s in result.snapshots]
    records = track_evolution(densities, seed, count)
    band = monte_carlo_band(count) * tolerance_scale
    worst = max(record.frobenius_residual for record in records)

    last = result.snapshots[-1]
    if last.state is None:
        raise SnapshotError(last.time)
    unravelled, _ = mc_density_estimate(last.state, stream(seed, UNRAVEL, 0), count)
    samples = sample_states(
        from_density(last.reduced),
        stream(seed, GAUSSIAN, len(records) - 1),
        count,
    )
    cross = unravelled.hilbert_schmidt(empirical_covariance(samples))

    return CriterionResult(
        id="C5",
        name="Gaussian measure",
        passed=worst <= band and cross <= 2.0 * band,
        value=worst,
        tolerance=band,
        detail=(
            f"worst residual {worst:.3e} over {len(records)} snapshots, "
            f"cross-representation {cross:.3e}"
        ),
    )


@criterion("C6", "Chapman-Kolmogorov")
def chapman_kolmogorov(seed: int, tolerance_scale: float) -> CriterionResult:
    """Averaging conditional densities recovers the system marginal."""
    grid = make_grid(32, 12.0)
    states = [_packet_state(32, 12.0, 1.0), entangled_two_peak(grid, grid, 2.0)]
    states += [random_state(grid, grid, stream(seed, STATES, 2, i)) for i in range(10)]

    tolerance = 1e-10 * tolerance_scale
    worst = max(chapman_kolmogorov_check(phi) for phi in states)

    return CriterionResult(
        id="C6",
        name="Chapman-Kolmogorov",
        passed=worst <= tolerance,
        value=worst,
        tolerance=tolerance,
        detail=f"worst deviation {worst:.3e} over {len(states)} states",
    )


def _structural_failures(seed: int, trial: int, tolerance_scale: float) -> list[str]:
    rng = stream(seed, STATES, 3, trial)
    grid = make_grid(16, 10.0)
    failures = []

    phi = random_state(grid, grid, rng)
    propagator = TrotterPropagator(
        coupled_harmonic(coupling=float(rng.uniform(-0.5, 0.5))),
        grid,
        grid,
        0.05,
        sign=(-1, 1)[trial // 4 % 2],
        splitting=("lie", "strang")[trial % 2],
        factor_method=("exact", "split")[trial // 2 % 2],
    )
    amplitudes = propagator.apply(phi.amplitudes)
    norm = math.sqrt(float(np.sum(np.abs(amplitudes) ** 2)) * grid.step**2)
    if abs(norm - 1.0) > 1e-12 * tolerance_scale:
        failures.append(f"trial {trial}: unitarity drift {abs(norm - 1.0):.3e}")

    # construction validates Hermiticity, trace and positivity
    rho = reduced_density(phi)
    mass = wigner_from_density(rho).mass()
    if abs(mass - 1.0) > 1e-10 * tolerance_scale:
        failures.append(f"trial {trial}: Wigner mass {mass!r}")

    fine = make_grid(64, 16.0)
    a, b = (
        projector(
            gaussian_packet(
                fine,
                float(rng.uniform(-1.0, 1.0)),
                float(rng.uniform(0.6, 1.0)),
                float(rng.uniform(-1.0, 1.0)),
            ),
            fine,
        )
        for _ in range(2)
    )
    trace = float(np.sum(a.kernel * b.kernel.T).real) * fine.step**2
    formula = overlap(wigner_from_density(a), wigner_from_density(b))
    if abs(formula - trace) > 1e-8 * tolerance_scale:
        failures.append(f"trial {trial}: overlap {formula!r} against {trace!r}")

    first, _ = mc_density_estimate(phi, stream(seed, UNRAVEL, trial), 200)
    second, _ = mc_density_estimate(phi, stream(seed, UNRAVEL, trial), 200)
    if not np.array_equal(first.kernel, second.kernel):
        failures.append(f"trial {trial}: sampling is not reproducible")

    return failures


def _sampled_table(seed: int, path: Path) -> bytes:
    grid = make_grid(16, 10.0)
    phi0 = product_state(
        gaussian_packet(grid, center=1.0), grid, gaussian_packet(grid), grid
    )
    trajectory = evolve(phi0, coupled_harmonic(coupling=0.5), 1.0, 8, snapshot_every=4)
    ensemble = process_snapshot(trajectory, trajectory.times, seed, 200)

    rows = [
        (sample.time, sample.rng_stream_id, sample.env_index, sample.weight)
        for item in ensemble.slices
        for sample in item.samples()
    ]
    header = ["time", "stream", "env_index", "weight"]
    return write_table(path, header, rows, metadata={"seed": seed}).read_bytes()


def _reruns_identical(seed: int) -> bool:
    """Evolve, sample and write the same seeded table twice from scratch."""
    with tempfile.TemporaryDirectory() as directory:
        first = _sampled_table(seed, Path(directory) / "first.csv")
        second = _sampled_table(seed, Path(directory) / "second.csv")
    return first == second


@criterion("C7", "structural invariants")
def structural_invariants(seed: int, tolerance_scale: float) -> CriterionResult:
    """Unitarity, density invariants, Wigner identities and reproducibility."""
    failures = []
    for trial in range(100):
        try:
            failures += _structural_failures(seed, trial, tolerance_scale)
        except OpenSystemError as error:
            failures.append(f"trial {trial}: {error}")

    if not _reruns_identical(seed):
        failures.append("rewritten CSV differs")

    return CriterionResult(
        id="C7",
        name="structural invariants",
        passed=not failures,
        value=float(len(failures)),
        tolerance=0.0,
        detail="; ".join(failures[:3]) or "100 trials without failure",
    )


async def _evaluate(
    entry: Criterion, seed: int, tolerance_scale: float
) -> CriterionResult:
    started = time.perf_counter()
    try:
        result = await run_blocking(
            entry.func,
            seed,
            tolerance_scale,
            error_message=f"criterion {entry.id} crashed",
        )
    except OpenSystemError as error:
        result = CriterionResult(
            id=entry.id,
            name=entry.name,
            passed=False,
            value=math.nan,
            tolerance=math.nan,
            detail=str(error),
        )

    logger.debug("%s finished in %.1fs", entry.id, time.perf_counter() - started)
    return result


async def run_criteria(
    seed: int,
    tolerance_scale: float = 1.0,
    *,
    only: Optional[Iterable[str]] = None,
    max_concurrent: int = 2,
) -> list[CriterionResult]:
    """Evaluate the selected criteria concurrently; results follow id order.

    ## Example

    ```python
    results = asyncio.run(run_criteria(42, only=["C4", "C6"]))
    all(result.passed for result in results)
    ```
    """
    selected = sorted(set(only) if only is not None else CRITERIA)
    unknown = [key for key in selected if key not in CRITERIA]
    if unknown:
        raise ConfigError("verify.only", f"unknown criteria {', '.join(unknown)}")

    entries = [CRITERIA[key] for key in selected]

    return await bounded_gather(
        (_evaluate(entry, seed, tolerance_scale) for entry in entries),
        max_concurrent=max_concurrent,
    )


def write_verify_report(
    path: Path, results: list[CriterionResult], *, seed: int, tolerance_scale: float
) -> Path:
    """Machine-readable pass/fail per criterion, without timings."""
    payload = {
        "criteria": [asdict(result) for result in results],
        "passed": all(result.passed for result in results),
        "seed": seed,
        "tolerance_scale": tolerance_scale,
    }

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    logger.info("wrote %s", path)
    return path
