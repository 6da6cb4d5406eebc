"""Exception types raised across the package.

Everything user-facing derives from GazecastError so callers can catch one
base type; the CLI maps these onto exit codes.
"""


class GazecastError(Exception):
    """Base class for all errors raised by gazecast."""


class ShapeMismatchError(GazecastError):
    """Operands have incompatible shapes; message names the offending dims."""


class DomainError(GazecastError):
    """Input lies outside an operation's mathematical domain (zero-norm
    vector, coincident points, log of a non-positive value, ...)."""


class TapeError(GazecastError):
    """Misuse of the autodiff tape: non-scalar loss, double backward
    without a reset, or a loss that was never recorded."""


class GradError(GazecastError):
    """Optimizer asked to step a parameter with no populated gradient."""


class ConfigError(GazecastError):
    """Invalid or contradictory run configuration."""


class CheckpointError(GazecastError):
    """Corrupt checkpoint file or parameter name/shape mismatch on load."""


class DatasetError(GazecastError):
    """Corrupt dataset file, manifest inconsistency, or an infeasible
    scene specification."""
