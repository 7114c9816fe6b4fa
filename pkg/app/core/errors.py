from __future__ import annotations
from typing import Dict, Optional


class HashingError(Exception):
    """Root of every error raised by this package."""


class ValidationFailure(HashingError, ValueError):
    """Caller or input error; the CLI maps it to exit status 2."""


class ShapeError(ValidationFailure):
    pass


class ConfigError(ValidationFailure):
    pass


class SceneGenerationError(ValidationFailure):
    pass


class CheckpointError(ValidationFailure):
    pass


class RecordError(ValidationFailure):
    """Malformed record in a dataset, code or index file."""
    def __init__(self, message: str, record: Optional[int] = None, line: Optional[int] = None):
        where = []
        if record is not None:
            where.append(f"record {record}")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{' '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.record = record
        self.line = line


class TrainingDiverged(HashingError, RuntimeError):
    def __init__(self, iteration: int, components: Dict[str, float]):
        detail = ", ".join(f"{k}={v!r}" for k, v in components.items())
        super().__init__(f"non-finite loss at iteration {iteration} ({detail})")
        self.iteration = iteration
        self.components = dict(components)
