import copy
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Union

import yaml
from envyaml import EnvYAML

from .errors import ConfigError
from .hamiltonian import PRESETS

logger = logging.getLogger(__name__)

Check = Callable[[Any], Optional[str]]


@dataclass(frozen=True)
class Field:
    """One leaf of the configuration schema."""

    types: tuple[type, ...]
    default: Any
    check: Optional[Check] = None
    nullable: bool = False


def _power_of_two(value: int) -> Optional[str]:
    if value < 2 or value & (value - 1):
        return "must be a power of two >= 2"
    return None


def _positive(value: float) -> Optional[str]:
    return None if value > 0 else "must be positive"


def _non_negative(value: float) -> Optional[str]:
    return None if value >= 0 else "must be non-negative"


def _at_least(minimum: int) -> Check:
    return lambda value: None if value >= minimum else f"must be >= {minimum}"


def _one_of(*choices: Any) -> Check:
    def check(value: Any) -> Optional[str]:
        if value in choices:
            return None
        return f"must be one of {', '.join(repr(c) for c in choices)}"

    return check


def _registered_preset(value: str) -> Optional[str]:
    if value in PRESETS:
        return None
    return f"unknown preset, expected one of {', '.join(sorted(PRESETS))}"


def _number_list(value: list) -> Optional[str]:
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return None
    return "must be a list of numbers"


def _step_counts(value: list) -> Optional[str]:
    integers = all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    if value and integers and min(value) >= 1:
        return None
    return "must be a non-empty list of positive integers"


def _slice_indices(value: list) -> Optional[str]:
    if len(value) == 2 and all(isinstance(v, int) and v >= 0 for v in value):
        return None
    return "must be a pair of non-negative indices [k2, j2]"


INT = (int,)
FLOAT = (float, int)
STR = (str,)
BOOL = (bool,)
LIST = (list,)


def _grid_section(n: int, length: float) -> dict[str, Field]:
    return {
        "n": Field(INT, n, _power_of_two),
        "length": Field(FLOAT, length, _positive),
        "center": Field(FLOAT, 0.0),
    }


#: Every accepted key with its type, default and constraint.
SCHEMA: dict[str, Any] = {
    "seed": Field(INT, 42, _non_negative),
    "log_level": Field(
        STR, "INFO", _one_of("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
    ),
    "grids": {
        "system": _grid_section(32, 12.0),
        "environment": _grid_section(32, 12.0),
    },
    "hamiltonian": {
        "preset": Field(STR, "coupled_harmonic", _registered_preset),
        "parameters": Field((dict,), {}),
    },
    "initial": {
        "kind": Field(STR, "product", _one_of("product", "entangled_two_peak")),
        "separation": Field(FLOAT, 2.0, _positive),
        "system": {
            "center": Field(FLOAT, 0.0),
            "width": Field(FLOAT, 1.0, _positive),
            "momentum": Field(FLOAT, 0.0),
        },
        "environment": {
            "reference": {
                "mean": Field(FLOAT, 0.0),
                "variance": Field(FLOAT, 0.5, _positive),
            },
            "coefficients": Field(LIST, [1.0], _number_list),
        },
    },
    "evolution": {
        "t": Field(FLOAT, 1.0, _non_negative),
        "steps": Field(INT, 256, _at_least(1)),
        "sign": Field(INT, -1, _one_of(-1, 1)),
        "splitting": Field(STR, "lie", _one_of("lie", "strang")),
        "factor_method": Field(STR, "exact", _one_of("exact", "split")),
        "snapshot_every": Field(INT, 32, _non_negative),
        "convergence_steps": Field(LIST, [64, 128, 256, 512], _step_counts),
    },
    "unravel": {
        "times": Field(LIST, None, _number_list, nullable=True),
        "samples": Field(INT, 1000, _at_least(2)),
        "basis": Field(STR, "position", _one_of("position", "momentum")),
        "process": Field(STR, "coordinate", _one_of("coordinate", "reference")),
        "exhaustive": Field(BOOL, False),
    },
    "wigner": {
        "memory_cap": Field(INT, 2**20, _at_least(1)),
        "slice": Field(LIST, None, _slice_indices, nullable=True),
    },
    "gaussian": {
        "samples": Field(INT, 10_000, _at_least(2)),
    },
    "outputs": {
        "directory": Field(STR, "results"),
        "snapshots": Field(BOOL, False),
    },
    "verify": {
        "tolerance_scale": Field(FLOAT, 1.0, _positive),
    },
}


def _validate_field(field: Field, value: Any, path: str) -> Any:
    if value is None:
        if field.nullable:
            return None
        raise ConfigError(path, "must not be empty")

    if isinstance(value, bool) and bool not in field.types:
        raise ConfigError(path, f"expected {field.types[0].__name__}, got bool")
    if not isinstance(value, field.types):
        expected = field.types[0].__name__
        raise ConfigError(path, f"expected {expected}, got {type(value).__name__}")

    if float in field.types:
        value = float(value)

    if field.check is not None:
        reason = field.check(value)
        if reason:
            raise ConfigError(path, reason)

    return copy.deepcopy(value)


def _validate(
    schema: Mapping[str, Any], data: Mapping[str, Any], prefix: str = ""
) -> dict[str, Any]:
    unknown = sorted(set(data) - set(schema))
    if unknown:
        raise ConfigError(f"{prefix}{unknown[0]}", "unknown key")

    result: dict[str, Any] = {}
    for key, rule in schema.items():
        path = f"{prefix}{key}"
        value = data.get(key)

        if isinstance(rule, Field):
            given = value if key in data else rule.default
            result[key] = _validate_field(rule, given, path)
            continue

        if value is None:
            value = {}
        if not isinstance(value, Mapping):
            raise ConfigError(path, "expected a section")
        result[key] = _validate(rule, value, f"{path}.")

    return result


def _read_file(path: Path) -> dict[str, Any]:
    try:
        loaded = EnvYAML(str(path))
        top_level = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except FileNotFoundError as exc:
        raise ConfigError(str(path), "file not found") from exc
    except (yaml.YAMLError, ValueError) as exc:
        raise ConfigError(str(path), str(exc)) from exc

    if not isinstance(top_level, Mapping):
        raise ConfigError(str(path), "expected a mapping at the top level")

    # EnvYAML mixes the process environment into its keys
    return {key: loaded[key] for key in top_level}


class Config:
    """Validated run configuration.

    Loaded from a YAML file (with `${VAR}` environment substitution) or taken
    from a mapping. Every section is filled with its defaults, and unknown or
    malformed keys raise `ConfigError` naming the dotted field path.

    ## Example

    ```python
    config = Config("scenario.yaml")
    config.get("n", section="grids.system")  # 32
    config["evolution"]["steps"]
    ```
    """

    def __init__(
        self,
        config_path: Union[str, Path, None] = None,
        *,
        data: Optional[Mapping[str, Any]] = None,
    ) -> None:
        self.path: Optional[Path] = Path(config_path) if config_path else None

        if self.path is not None:
            raw = _read_file(self.path)
        else:
            raw = dict(data or {})

        self._data: dict[str, Any] = _validate(SCHEMA, raw)
        logger.debug("configuration loaded from %s", self.path or "mapping")

    @property
    def base_dir(self) -> Path:
        """Directory that relative paths in the configuration are resolved against."""
        return self.path.parent if self.path is not None else Path.cwd()

    def get(
        self, key: str, *, section: Optional[str] = None, default: Any = None
    ) -> Any:
        """Access a value by key, optionally inside a (dotted) section.

        ## Example

        ```python
        config.get(key="seed")
        config.get(key="variance", section="initial.environment.reference")
        ```
        """
        scope: Any = self._data
        if section:
            for part in section.split("."):
                if not isinstance(scope, Mapping) or part not in scope:
                    return default
                scope = scope[part]

        return scope.get(key, default) if isinstance(scope, Mapping) else default

    def __getitem__(self, key: str) -> Any:
        return self._data[key]

    def as_dict(self) -> dict[str, Any]:
        return copy.deepcopy(self._data)

    def with_overrides(
        self,
        *,
        seed: Optional[int] = None,
        sign: Optional[int] = None,
        exhaustive: Optional[bool] = None,
    ) -> "Config":
        """A re-validated copy with command-line overrides applied."""
        data = self.as_dict()

        if seed is not None:
            data["seed"] = seed
        if sign is not None:
            data["evolution"]["sign"] = sign
        if exhaustive is not None:
            data["unravel"]["exhaustive"] = exhaustive

        config = Config(data=data)
        config.path = self.path
        return config

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form of the validated configuration."""
        canonical = json.dumps(self._data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
