"""Plot-ready CSV tables and run manifests.

Every file is written deterministically: floats carry 17 significant digits,
lines end with LF, and manifests hold no timestamps, so a rerun with the same
configuration, seed and version reproduces every byte.
"""

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import DomainError
from .states import CompositeState, DensityOperator, MarginalDensity
from .wigner import WignerTable, slice_4d

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def format_value(value: Any) -> str:
    """Render one CSV cell; floats use `.17g` so they round-trip exactly."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_table(
    path: PathLike,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    *,
    metadata: Optional[Mapping[str, Any]] = None,
) -> Path:
    """Write a comma-separated table with optional `# key=value` lines on top.

    ## Example

    ```python
    write_table(
        out / "purity.csv",
        ["t", "purity"],
        [(s.time, s.purity) for s in result.snapshots],
        metadata=grid.metadata(),
    )
    ```
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)

    with target.open("w", newline="", encoding="utf-8") as handle:
        for key, value in (metadata or {}).items():
            handle.write(f"# {key}={format_value(value)}\n")

        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise DomainError(
                    f"row has {len(row)} cells but the header has {len(header)}"
                )
            writer.writerow([format_value(value) for value in row])

    logger.info("wrote %s", target)
    return target


def _prefixed(prefix: str, values: Mapping[str, Any]) -> dict[str, Any]:
    return {f"{prefix}.{key}": value for key, value in values.items()}


def write_density(path: PathLike, rho: DensityOperator) -> Path:
    """Kernel entries row-major as `(k, k', q, q', re, im)`."""
    grid = rho.grid
    points = grid.points

    rows = (
        (k, j, points[k], points[j], rho.kernel[k, j].real, rho.kernel[k, j].imag)
        for k in range(grid.n)
        for j in range(grid.n)
    )
    return write_table(
        path,
        ["k", "k_prime", "q", "q_prime", "re", "im"],
        rows,
        metadata=_prefixed("grid", grid.metadata()),
    )


def write_state(path: PathLike, phi: CompositeState) -> Path:
    """Composite amplitudes as `(k, l, q1, q2, re, im)` rows."""
    q1, q2 = phi.grid1.points, phi.grid2.points

    rows = (
        (k, j, q1[k], q2[j], phi.amplitudes[k, j].real, phi.amplitudes[k, j].imag)
        for k in range(phi.grid1.n)
        for j in range(phi.grid2.n)
    )
    metadata = {
        **_prefixed("grid1", phi.grid1.metadata()),
        **_prefixed("grid2", phi.grid2.metadata()),
    }
    return write_table(
        path, ["k", "l", "q1", "q2", "re", "im"], rows, metadata=metadata
    )


def write_marginal(path: PathLike, marginal: MarginalDensity) -> Path:
    grid = marginal.grid
    rows = zip(range(grid.n), grid.points, marginal.weights)
    return write_table(
        path,
        ["k", "q", "density"],
        rows,
        metadata=_prefixed("grid", grid.metadata()),
    )


def write_wigner(
    path: PathLike,
    table: WignerTable,
    *,
    metadata: Optional[Mapping[str, Any]] = None,
) -> Path:
    """A single-subsystem table as `(q, p, W)` rows, momenta ascending."""
    if len(table.grids) != 1:
        raise DomainError("only single-subsystem Wigner tables are written directly")

    grid = table.grids[0]
    momenta = grid.sorted_momenta

    rows = (
        (grid.points[k], momenta[j], table.values[k, j])
        for k in range(grid.n)
        for j in range(grid.n)
    )
    header = _prefixed("grid", grid.metadata())
    header["imag_residue"] = table.imag_residue
    header.update(metadata or {})
    return write_table(path, ["q", "p", "W"], rows, metadata=header)


def write_wigner_slice(path: PathLike, table: WignerTable, k2: int, j2: int) -> Path:
    """The `(q1, p1)` plane of a composite table at environment cell `(k2, j2)`."""
    plane = slice_4d(table, k2, j2)
    environment = table.grids[1]
    return write_wigner(
        path,
        plane,
        metadata={
            "k2": k2,
            "j2": j2,
            "q2": environment.points[k2],
            "p2": environment.sorted_momenta[j2],
        },
    )


def file_digest(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(
    path: PathLike,
    *,
    config_digest: str,
    seed: int,
    version: str,
    command: str,
    files: Iterable[PathLike],
    extra: Optional[Mapping[str, Any]] = None,
) -> Path:
    """Record what produced a directory of artifacts, with a SHA-256 per file.

    File names are stored relative to the manifest's directory.
    """
    target = Path(path)
    root = target.parent

    artifacts = {}
    for item in files:
        file = Path(item)
        name = file.relative_to(root) if file.is_relative_to(root) else file
        artifacts[name.as_posix()] = file_digest(file)

    manifest = {
        "command": command,
        "config_sha256": config_digest,
        "files": artifacts,
        "seed": seed,
        "version": version,
        **dict(extra or {}),
    }

    root.mkdir(parents=True, exist_ok=True)
    text = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    target.write_text(text, encoding="utf-8")

    logger.info("wrote %s", target)
    return target
