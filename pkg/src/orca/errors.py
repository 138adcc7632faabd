"""Exception hierarchy. ``exit_code`` is what the CLI returns for each family."""
from __future__ import annotations


class OrcaError(Exception):
    exit_code = 1


class ConfigError(OrcaError):
    """Bad or inconsistent configuration (missing symbol, unknown subset...)."""

    exit_code = 2


class DataError(OrcaError):
    exit_code = 3


class InsufficientHistoryError(DataError):
    pass


class WindowUnavailableError(DataError):
    """Not enough rows before the requested date; callers skip the date."""


class LeakageError(DataError):
    """A fold layout lets training labels see test-period prices."""


class SingleClassError(DataError):
    pass


class NumericalError(OrcaError):
    exit_code = 4


class UndefinedMetricError(NumericalError):
    pass


class ManifestError(NumericalError):
    """Feature names changed between dates within one run."""
