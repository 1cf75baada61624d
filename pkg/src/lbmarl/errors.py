"""Exception hierarchy shared across the package."""


class LBMarlError(Exception):
    """Base class for all package errors."""


class ConfigurationError(LBMarlError, ValueError):
    """Invalid topology, scenario or experiment configuration."""


class ContractError(LBMarlError, ValueError):
    """A caller violated a shape or arity precondition."""


class MetricError(LBMarlError, ValueError):
    """A metric is undefined for the given input (e.g. no UEs)."""


class TrainingError(LBMarlError, RuntimeError):
    """Non-finite loss or gradient during learning."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SchemaError(LBMarlError, ValueError):
    """A CSV input is missing a required column."""
