import csv
import json
import sys

import pytest

from opensystem.cli import commands
from opensystem.cli.commands import app
from opensystem.cli.verify import CriterionResult


@pytest.fixture
def config_file(tmp_path):
    config = tmp_path / "scenario.yaml"
    config.write_text(
        "seed: 3\n"
        "log_level: WARNING\n"
        "grids:\n"
        "  system: {n: 16, length: 10}\n"
        "  environment: {n: 16, length: 10}\n"
        "hamiltonian:\n"
        "  parameters: {coupling: 0.5}\n"
        "initial:\n"
        "  system: {center: 1.0}\n"
        "evolution:\n"
        "  t: 0.5\n"
        "  steps: 8\n"
        "  snapshot_every: 4\n"
        "  convergence_steps: [8, 16]\n"
        "unravel:\n"
        "  samples: 20\n"
        "gaussian:\n"
        "  samples: 50\n"
        "wigner:\n"
        "  slice: [2, 3]\n"
        "outputs:\n"
        "  snapshots: true\n"
    )
    return config


def _read_rows(path):
    lines = [line for line in path.read_text().splitlines() if line[:1] != "#"]
    return list(csv.DictReader(lines))


def _read_metadata(path):
    return dict(
        line[2:].split("=", 1)
        for line in path.read_text().splitlines()
        if line.startswith("# ")
    )


async def _run(command, config_file, out, *extra):
    argv = [command, "--config", str(config_file), "--out", str(out), *extra]
    return await app.run(argv)


def test_app__expect_all_commands_registered():
    assert sorted(app.commands) == [
        "converge",
        "gaussian",
        "run",
        "unravel",
        "verify",
        "wigner",
    ]


@pytest.mark.asyncio
async def test_run__expect_timeseries_densities_and_snapshots(config_file, tmp_path):
    out = tmp_path / "out"

    code = await _run("run", config_file, out)

    rows = _read_rows(out / "timeseries.csv")
    manifest = json.loads((out / "manifest.json").read_text())
    assert code == 0
    assert [row["step"] for row in rows] == ["0", "4", "8"]
    assert float(rows[0]["purity"]) == pytest.approx(1.0, abs=1e-10)
    assert float(rows[-1]["purity"]) < 1.0
    assert _read_metadata(out / "timeseries.csv")["sign"] == "-1"
    assert (out / "reduced_density.csv").exists()
    assert (out / "marginal_system.csv").exists()
    assert (out / "snapshots" / "state_000008.csv").exists()
    assert "snapshots/state_000004.csv" in manifest["files"]
    assert manifest["exit_code"] == 0
    assert manifest["seed"] == 3


@pytest.mark.asyncio
async def test_run_with_positive_sign__expect_sign_in_metadata(config_file, tmp_path):
    await _run("run", config_file, tmp_path, "--sign", "+")

    assert _read_metadata(tmp_path / "timeseries.csv")["sign"] == "1"


@pytest.mark.asyncio
async def test_run_twice__expect_identical_artifacts(config_file, tmp_path):
    await _run("run", config_file, tmp_path / "a")
    await _run("run", config_file, tmp_path / "b")

    first = json.loads((tmp_path / "a" / "manifest.json").read_text())
    second = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert first == second


@pytest.mark.asyncio
async def test_unravel_sampled__expect_ensemble_and_samples(config_file, tmp_path):
    code = await _run("unravel", config_file, tmp_path)

    ensemble = _read_rows(tmp_path / "ensemble.csv")
    samples = _read_rows(tmp_path / "samples.csv")
    assert code == 0
    assert [float(row["time"]) for row in ensemble] == [0.0, 0.25, 0.5]
    assert all(row["n"] == "20" for row in ensemble)
    assert len(samples) == 60
    assert _read_metadata(tmp_path / "ensemble.csv")["mode"] == "sampled"


@pytest.mark.asyncio
async def test_unravel_exhaustive__expect_exact_reconstruction(config_file, tmp_path):
    code = await _run("unravel", config_file, tmp_path, "--exhaustive")

    ensemble = _read_rows(tmp_path / "ensemble.csv")
    assert code == 0
    assert not (tmp_path / "samples.csv").exists()
    assert all(float(row["frobenius_error"]) < 1e-12 for row in ensemble)
    assert all(
        float(row["purity_mc"]) == pytest.approx(float(row["purity_exact"]), abs=1e-10)
        for row in ensemble
    )


@pytest.mark.asyncio
async def test_wigner__expect_tables_and_passing_checks(config_file, tmp_path):
    code = await _run("wigner", config_file, tmp_path)

    checks = {
        row["check"]: float(row["value"])
        for row in _read_rows(tmp_path / "wigner_checks.csv")
    }
    assert code == 0
    assert checks["two_path_max_difference"] < 1e-10
    assert checks["position_marginal_error"] < 1e-10
    assert checks["wigner_mass"] == pytest.approx(1.0, abs=1e-10)
    assert (tmp_path / "wigner_reduced.csv").exists()
    assert (tmp_path / "wigner_marginalized.csv").exists()
    assert (tmp_path / "wigner_slice_2_3.csv").exists()


@pytest.mark.asyncio
async def test_gaussian__expect_one_row_per_snapshot(config_file, tmp_path):
    code = await _run("gaussian", config_file, tmp_path)

    rows = _read_rows(tmp_path / "gaussian.csv")
    assert code == 0
    assert len(rows) == 3
    assert all(row["n"] == "50" for row in rows)


@pytest.mark.asyncio
async def test_converge__expect_rows_and_fitted_order(config_file, tmp_path):
    code = await _run("converge", config_file, tmp_path)

    rows = _read_rows(tmp_path / "convergence.csv")
    assert code == 0
    assert [row["n"] for row in rows] == ["8", "16"]
    assert "fitted_order" in _read_metadata(tmp_path / "convergence.csv")


@pytest.mark.asyncio
async def test_verify__expect_report_and_table(
    config_file, tmp_path, monkeypatch, capsys
):
    async def fake_run_criteria(seed, tolerance_scale):
        return [CriterionResult("C4", "partial-trace kernel", True, 1e-15, 1e-12)]

    monkeypatch.setattr(commands, "run_criteria", fake_run_criteria)

    code = await _run("verify", config_file, tmp_path)

    report = json.loads((tmp_path / "verify.json").read_text())
    assert code == 0
    assert report["passed"] is True
    assert report["seed"] == 3
    # captured output is not a terminal
    out = capsys.readouterr().out
    assert "id: C4\ncriterion: partial-trace kernel\nstatus: pass" in out


@pytest.mark.asyncio
async def test_verify_on_terminal__expect_aligned_table(
    config_file, tmp_path, monkeypatch, capsys
):
    async def fake_run_criteria(seed, tolerance_scale):
        return [CriterionResult("C4", "partial-trace kernel", True, 1e-15, 1e-12)]

    monkeypatch.setattr(commands, "run_criteria", fake_run_criteria)
    monkeypatch.setattr(sys.stdout, "isatty", lambda: True)

    await _run("verify", config_file, tmp_path)

    lines = capsys.readouterr().out.splitlines()
    start = lines.index("Acceptance criteria")
    header = ["id", "criterion", "status", "value", "tolerance"]
    assert lines[start + 1].split() == header
    assert lines[start + 3].startswith("C4  partial-trace kernel  pass")


@pytest.mark.asyncio
async def test_verify_with_failure__expect_exit_code_one(
    config_file, tmp_path, monkeypatch
):
    async def fake_run_criteria(seed, tolerance_scale):
        return [CriterionResult("C1", "Trotter limit", False, 1.5, 0.2)]

    monkeypatch.setattr(commands, "run_criteria", fake_run_criteria)

    code = await _run("verify", config_file, tmp_path)

    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert code == 1
    assert manifest["exit_code"] == 1
    assert "verify.json" in manifest["files"]
