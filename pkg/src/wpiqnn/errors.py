"""Exception types raised across the package."""


class WpiqnnError(Exception):
    """Base class for all package errors."""


class ConfigurationError(WpiqnnError, ValueError):
    """Invalid configuration or argument combination."""


class CapacityError(WpiqnnError, ValueError):
    """Input does not fit into the requested number of qubits."""


class NormalizationError(WpiqnnError, ValueError):
    """A vector that must be normalized has zero norm."""


class TrainingError(WpiqnnError, RuntimeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message, epoch=None):
        super().__init__(message if epoch is None else f"epoch {epoch}: {message}")
        self.epoch = epoch


class MetricError(WpiqnnError, ValueError):
    """A metric is undefined for the given inputs."""


class AggregationError(WpiqnnError, ValueError):
    """Multi-seed aggregation has nothing to aggregate."""
