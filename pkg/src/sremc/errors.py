"""Exception hierarchy shared across the package.

The CLI maps these onto distinct process exit codes, so new error kinds
should subclass one of the classes below rather than raising bare
RuntimeError/ValueError.
"""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class CapacityError(ValueError):
    """Requested system size exceeds the configured dense-computation cap."""


class GaugeError(ValueError):
    """A reference amplitude required for gauge fixing is exactly zero."""


class InitializationError(RuntimeError):
    """Could not find a valid starting point (e.g. nonzero-amplitude spin state)."""


class NumericalError(RuntimeError):
    """A linear solve or eigensolve failed beyond the configured retries."""


class UnresolvedEstimateError(RuntimeError):
    """A Monte Carlo mean was non-positive, so -log(mean) is undefined.

    Typically signals too few samples or a heavy-tailed estimator; increasing
    the sample count or switching to the annealed scheme are the remedies.
    """
