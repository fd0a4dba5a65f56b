from typing import Any


class OpenSystemError(Exception):
    pass


class ConfigError(OpenSystemError):
    def __init__(self, field: str, reason: str):
        self.field = field
        super().__init__(f"Invalid configuration '{field}': {reason}")


class ShapeError(OpenSystemError, ValueError):
    def __init__(self, what: str, expected: Any, got: Any):
        super().__init__(f"{what}: expected shape {expected}, got {got}")


class DomainError(OpenSystemError, ValueError):
    pass


class InvalidDensityError(DomainError):
    pass


class ZeroProbabilityError(DomainError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"Environment column {index} carries zero probability")


class SamplingInconsistencyError(ZeroProbabilityError):
    pass


class ResourceLimitError(OpenSystemError):
    def __init__(self, what: str, *, limit: int, requested: int):
        self.limit = limit
        self.requested = requested
        super().__init__(
            f"{what} needs {requested} entries but the limit is {limit}; "
            "use smaller grids"
        )


class NumericalInstabilityError(OpenSystemError):
    def __init__(self, step: int, drift: float):
        self.step = step
        self.drift = drift
        super().__init__(f"Norm drift {drift:.3e} exceeded tolerance at step {step}")


class OracleError(OpenSystemError):
    pass


class SnapshotError(OpenSystemError):
    def __init__(self, time: float):
        self.time = time
        super().__init__(f"No snapshot stored for t={time!r}")


class RegistryError(OpenSystemError):
    pass


class AlreadyRegisteredError(RegistryError):
    def __init__(self, kind: str, name: str):
        super().__init__(f"{kind} '{name}' is already registered")


class PresetNotFoundError(RegistryError):
    def __init__(self, name: str):
        super().__init__(f"Hamiltonian preset '{name}' not found")


class CommandError(OpenSystemError):
    pass


class CommandNotFoundError(CommandError):
    def __init__(self, cmd: str):
        super().__init__(f"Command with name '{cmd}' not found")


class CriterionError(OpenSystemError):
    def __init__(self, failed: list[str]):
        self.failed = failed
        super().__init__(f"Acceptance criteria failed: {', '.join(failed)}")
