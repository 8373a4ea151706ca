"""Exception types shared across the package.

Each maps onto a distinct CLI exit code (see :mod:`gmonlab.cli`).
"""


class ConfigError(ValueError):
    """Invalid configuration or malformed input file."""


class NumericalError(RuntimeError):
    """Integration or fitting failure, e.g. norm drift beyond tolerance."""


class BudgetExceeded(RuntimeError):
    """A bounded computation would exceed its work budget."""
