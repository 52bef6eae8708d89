"""Exception hierarchy; the CLI maps these onto process exit codes."""


class TabsynthError(Exception):
    """Base class for all errors raised by tabsynth."""

    exit_code = 1


class ShapeError(TabsynthError, ValueError):
    """Array shapes do not line up."""

    exit_code = 2


class InvalidGroupError(TabsynthError, ValueError):
    """A softmax group is empty or out of bounds."""

    exit_code = 2


class StateError(TabsynthError, RuntimeError):
    """An object was used before it was fitted or before a forward pass."""


class DataError(TabsynthError, ValueError):
    """Input data is malformed, incomplete or inconsistent with its metadata."""

    exit_code = 3


class CheckpointFormatError(DataError):
    """A checkpoint file has a bad magic, an unsupported version or is truncated."""


class UndefinedScoreError(TabsynthError, ValueError):
    """A metric is undefined for the given inputs."""

    exit_code = 3


class NumericError(TabsynthError, ArithmeticError):
    """Training produced a non-finite value."""

    exit_code = 4


class ConfigError(TabsynthError, ValueError):
    """A run config or metadata sidecar is unreadable or fails validation."""

    exit_code = 2
