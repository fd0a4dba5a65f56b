from functools import partial
from typing import Any

import numpy as np

from opensystem.errors import CriterionError, SnapshotError
from opensystem.evolve import EvolutionResult, Snapshot, convergence_study, evolve
from opensystem.export import (
    write_density,
    write_marginal,
    write_state,
    write_table,
    write_wigner,
    write_wigner_slice,
)
from opensystem.hilbert_measure import track_evolution
from opensystem.oracle import enumerate_unraveling
from opensystem.states import (
    DensityOperator,
    expectation,
    marginal_density_1,
    momentum_density,
    position_observable,
    purity,
    reduced_density,
)
from opensystem.tasks import run_blocking
from opensystem.unravel import (
    Basis,
    EnsembleRow,
    enumerate_outcomes,
    environment_basis,
    process_snapshot,
    summarize_ensemble,
)
from opensystem.wigner import (
    joint_wigner,
    marginalize_wigner,
    weyl_characteristic,
    wigner_from_characteristic,
    wigner_from_density,
    wigner_marginals,
)

from .app import App, Context, default_error_handlers
from .report import Table
from .verify import run_criteria, write_verify_report

app = App()
default_error_handlers(app)

ENSEMBLE_COLUMNS = [
    "time",
    "n",
    "purity_mc",
    "purity_exact",
    "frobenius_error",
    "stderr",
]


def _run_metadata(ctx: Context) -> dict[str, Any]:
    evolution = ctx.config["evolution"]
    return {
        "preset": ctx.scenario.spec.preset,
        "seed": ctx.seed,
        "sign": evolution["sign"],
        "splitting": evolution["splitting"],
        "factor_method": evolution["factor_method"],
        "t": evolution["t"],
        "steps": evolution["steps"],
    }


async def _evolve(ctx: Context, *, snapshots: bool) -> EvolutionResult:
    evolution = ctx.config["evolution"]
    scenario = ctx.scenario
    every = (evolution["snapshot_every"] or evolution["steps"]) if snapshots else 0

    return await run_blocking(
        partial(
            evolve,
            scenario.initial,
            scenario.spec,
            evolution["t"],
            evolution["steps"],
            sign=evolution["sign"],
            splitting=evolution["splitting"],
            factor_method=evolution["factor_method"],
            snapshot_every=every,
        ),
        error_message="Evolution failed",
    )


def _mean_momentum(rho: DensityOperator) -> float:
    grid = rho.grid
    density = momentum_density(rho)
    return float(np.sum(grid.sorted_momenta * density) * grid.momentum_step)


@app.command(description="Evolve the scenario; write purity and reduced densities")
async def run(ctx: Context) -> None:
    result = await _evolve(ctx, snapshots=True)
    grid = ctx.scenario.grid1
    q, q2 = position_observable(grid), position_observable(grid, 2)

    rows = [
        (
            s.step,
            s.time,
            s.purity,
            expectation(s.reduced, q),
            expectation(s.reduced, q2),
            _mean_momentum(s.reduced),
        )
        for s in result.snapshots
    ]
    ctx.record(
        write_table(
            ctx.path("timeseries.csv"),
            ["step", "t", "purity", "q_mean", "q2_mean", "p_mean"],
            rows,
            metadata=_run_metadata(ctx),
        )
    )

    final = reduced_density(result.state)
    ctx.record(write_density(ctx.path("reduced_density.csv"), final))
    marginal = marginal_density_1(result.state)
    ctx.record(write_marginal(ctx.path("marginal_system.csv"), marginal))

    if ctx.config.get("snapshots", section="outputs"):
        for snapshot in result.snapshots:
            if snapshot.state is None:
                ctx.logger.warning("step %d too large to store", snapshot.step)
                continue
            path = ctx.path(f"snapshots/state_{snapshot.step:06d}.csv")
            ctx.record(write_state(path, snapshot.state))


def _exhaustive_row(snapshot: Snapshot, basis: Basis) -> EnsembleRow:
    if snapshot.state is None:
        raise SnapshotError(snapshot.time)

    represented = environment_basis(snapshot.state, basis)
    enumerated = enumerate_unraveling(represented)

    return EnsembleRow(
        time=snapshot.time,
        n=len(enumerate_outcomes(snapshot.state, basis)),
        purity_mc=purity(enumerated),
        purity_exact=snapshot.purity,
        frobenius_error=enumerated.hilbert_schmidt(snapshot.reduced),
        stderr=0.0,
    )


@app.command(description="Unravel the reduced state into random pure states")
async def unravel(ctx: Context) -> None:
    options = ctx.config["unravel"]
    result = await _evolve(ctx, snapshots=True)

    times = options["times"] if options["times"] is not None else result.times
    snapshots = [result.snapshot_at(time) for time in times]
    metadata = {**_run_metadata(ctx), "basis": options["basis"]}

    if options["exhaustive"]:
        rows = [_exhaustive_row(snapshot, options["basis"]) for snapshot in snapshots]
        metadata["mode"] = "exhaustive"
    else:
        ensemble = await run_blocking(
            partial(
                process_snapshot,
                result,
                times,
                ctx.seed,
                options["samples"],
                basis=options["basis"],
                process=options["process"],
                reference=ctx.scenario.reference,
            ),
            error_message="Unraveling failed",
        )
        rows = summarize_ensemble(ensemble, {s.time: s.reduced for s in snapshots})
        metadata.update(mode="sampled", process=options["process"])

        samples = [
            (sample.time, sample.rng_stream_id, sample.env_index, sample.weight)
            for item in ensemble.slices
            for sample in item.samples()
        ]
        ctx.record(
            write_table(
                ctx.path("samples.csv"),
                ["time", "stream", "env_index", "weight"],
                samples,
                metadata=metadata,
            )
        )

    ctx.record(
        write_table(
            ctx.path("ensemble.csv"),
            ENSEMBLE_COLUMNS,
            [row.as_tuple() for row in rows],
            metadata=metadata,
        )
    )


@app.command(description="Reduced Wigner function by two independent paths")
async def wigner(ctx: Context) -> None:
    options = ctx.config["wigner"]
    result = await _evolve(ctx, snapshots=False)

    phi = result.state
    rho = reduced_density(phi)
    direct = wigner_from_density(rho)
    joint = joint_wigner(phi, memory_cap=options["memory_cap"])
    through_joint = marginalize_wigner(joint)
    characteristic = wigner_from_characteristic(weyl_characteristic(rho))

    ctx.record(write_wigner(ctx.path("wigner_reduced.csv"), direct))
    ctx.record(write_wigner(ctx.path("wigner_marginalized.csv"), through_joint))

    grid = rho.grid
    position, momentum = wigner_marginals(direct)
    position_density = marginal_density_1(phi).weights
    momentum_exact = momentum_density(rho)
    ctx.record(
        write_table(
            ctx.path("wigner_marginals.csv"),
            ["q", "position_wigner", "position_density"]
            + ["p", "momentum_wigner", "momentum_density"],
            zip(
                grid.points,
                position,
                position_density,
                grid.sorted_momenta,
                momentum,
                momentum_exact,
            ),
            metadata=_run_metadata(ctx),
        )
    )

    checks = [
        (
            "two_path_max_difference",
            np.max(np.abs(direct.values - through_joint.values)),
        ),
        (
            "characteristic_path_max_difference",
            np.max(np.abs(direct.values - characteristic.values)),
        ),
        ("wigner_mass", direct.mass()),
        ("position_marginal_norm", np.sum(position) * grid.step),
        ("momentum_marginal_norm", np.sum(momentum) * grid.momentum_step),
        ("position_marginal_error", np.max(np.abs(position - position_density))),
        ("momentum_marginal_error", np.max(np.abs(momentum - momentum_exact))),
        ("imag_residue", max(direct.imag_residue, joint.imag_residue)),
    ]
    ctx.record(write_table(ctx.path("wigner_checks.csv"), ["check", "value"], checks))

    if options["slice"] is not None:
        k2, j2 = options["slice"]
        path = ctx.path(f"wigner_slice_{k2}_{j2}.csv")
        ctx.record(write_wigner_slice(path, joint, k2, j2))


@app.command(description="Sample Gaussian states whose covariance is the reduced state")
async def gaussian(ctx: Context) -> None:
    result = await _evolve(ctx, snapshots=True)
    densities = [(s.time, s.reduced) for s in result.snapshots]
    count = ctx.config.get("samples", section="gaussian")

    records = await run_blocking(
        track_evolution,
        densities,
        ctx.seed,
        count,
        error_message="Gaussian sampling failed",
    )
    ctx.record(
        write_table(
            ctx.path("gaussian.csv"),
            ["t", "n", "frobenius_residual", "purity_exact", "band", "within_band"],
            [
                (r.t, r.n, r.frobenius_residual, r.purity_exact, r.band, r.within_band)
                for r in records
            ],
            metadata=_run_metadata(ctx),
        )
    )


@app.command(description="Trotter error against the exact propagator")
async def converge(ctx: Context) -> None:
    evolution = ctx.config["evolution"]
    scenario = ctx.scenario

    table = await run_blocking(
        partial(
            convergence_study,
            scenario.initial,
            scenario.spec,
            evolution["t"],
            evolution["convergence_steps"],
            sign=evolution["sign"],
            splitting=evolution["splitting"],
            factor_method=evolution["factor_method"],
        ),
        error_message="Convergence study failed",
    )
    metadata = {
        **_run_metadata(ctx),
        "fitted_order": table.fitted_order,
        "monotone": table.is_monotone(),
    }
    ctx.record(
        write_table(
            ctx.path("convergence.csv"),
            ["n", "dt", "l2_error", "observed_order"],
            table.rows(),
            metadata=metadata,
        )
    )


@app.command(description="Run the acceptance criteria and report pass or fail")
async def verify(ctx: Context) -> None:
    scale = ctx.config.get("tolerance_scale", section="verify")
    results = await run_criteria(ctx.seed, scale)

    ctx.record(
        write_verify_report(
            ctx.path("verify.json"), results, seed=ctx.seed, tolerance_scale=scale
        )
    )

    table = Table(
        title="Acceptance criteria",
        columns=["id", "criterion", "status", "value", "tolerance"],
    )
    for result in results:
        status = "pass" if result.passed else "FAIL"
        value, tolerance = f"{result.value:.3e}", f"{result.tolerance:.3e}"
        table.add_row(result.id, result.name, status, value, tolerance)
    ctx.show(table)

    failed = [result.id for result in results if not result.passed]
    if failed:
        raise CriterionError(failed)
