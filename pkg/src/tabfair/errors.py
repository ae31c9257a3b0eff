"""Exception taxonomy shared by the library and the CLI.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class TabfairError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TabfairError):
    """Invalid configuration, schema file problems, missing referenced
    paths, or parameters outside their documented ranges."""


class DataError(TabfairError):
    """Malformed or unusable input data: ragged CSV rows, unparseable
    cells, constant numerical columns, degenerate label distributions."""


class UndefinedMetricError(DataError):
    """A fairness metric has no defined value for the given predictions,
    e.g. disparate impact with a zero privileged positive rate."""


class NumericalError(TabfairError):
    """Numerical failure: non-convergence, divergence during training,
    or an ill-conditioned sensitive-attribute matrix."""
