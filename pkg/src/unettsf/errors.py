"""Exception taxonomy shared by every module.

Each class maps to one CLI exit code so failures stay machine-parseable
end to end: ConfigError -> 2, DataError -> 3, TrainingError -> 4,
CheckpointError -> 5. ShapeError is a ConfigError because a dimension
mismatch always traces back to an inconsistent configuration or call.
"""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration values."""


class ShapeError(ConfigError):
    """Operand dimensions do not line up; message names both shapes."""


class DataError(ValueError):
    """Dataset file missing, malformed, too short, or degenerate."""


class TrainingError(RuntimeError):
    """Training aborted (non-finite loss or gradient)."""


class CheckpointError(ValueError):
    """Checkpoint bytes unreadable, wrong version, or inconsistent."""
