"""Exception types shared across the engine.

Each class maps to a distinct CLI exit code (see cli.EXIT_CODES).
"""


class EngineError(Exception):
    """Base class for all engine errors."""


class DimensionError(EngineError):
    """Operand shapes are incompatible with the requested operation."""


class ModeError(EngineError):
    """Operation invoked on a layer/network in the wrong mode or form."""


class StateError(EngineError):
    """Stateful precondition violated (stale cache, empty records, ...)."""


class ParseError(EngineError):
    """Malformed config, dataset or checkpoint file."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TrainingError(EngineError):
    """Training diverged or could not proceed."""

    def __init__(self, message: str, epoch: int | None = None):
        if epoch is not None:
            message = f"{message} (epoch {epoch})"
        super().__init__(message)
        self.epoch = epoch
