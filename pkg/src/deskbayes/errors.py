"""Exception types shared across the package.

Configuration problems are detectable before any heavy compute and map to
CLI exit code 1; numeric failures surface during compute and map to exit
code 2.
"""


class DeskBayesError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DeskBayesError):
    """Invalid configuration, shapes, or preconditions."""


class DatasetError(ConfigurationError):
    """Malformed dataset file; carries a 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericError(DeskBayesError):
    """Numeric failure during compute."""


class EvaluationError(NumericError):
    """Non-finite value while evaluating a computation graph."""

    def __init__(self, node_index, message="numeric overflow"):
        super().__init__(f"{message} at graph node {node_index}")
        self.node_index = node_index


class DivergenceError(NumericError):
    """Divergent trajectory; carries the integrator step index."""

    def __init__(self, step_index, message="divergent trajectory"):
        super().__init__(f"{message} at integrator step {step_index}")
        self.step_index = step_index


class OptimizerDivergence(NumericError):
    """Objective became non-finite; carries the last finite iterate."""

    def __init__(self, last_params, message="diverged"):
        super().__init__(message)
        self.last_params = last_params


class UnstableChainError(NumericError):
    """Too many divergent transitions during burn-in."""


class FixedPointError(NumericError):
    """Implicit integrator step failed to converge."""


class ChainFileError(DeskBayesError):
    """Unreadable or inconsistent chain file."""
