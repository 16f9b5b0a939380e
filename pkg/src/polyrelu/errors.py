"""Shared exception types.

The CLI maps these onto exit codes: ConfigError -> 2, InvariantError
(and subclasses) -> 3, BudgetError -> 4.
"""


class ConfigError(ValueError):
    """Malformed configuration, schema violation, or bad usage."""


class BudgetError(RuntimeError):
    """A configured cost budget (tensor entries, grid points) was exceeded."""


class InvariantError(RuntimeError):
    """A hard mathematical invariant failed (support leak, bad covering)."""


class CoveringError(InvariantError):
    """A covering piece leaves the domain or the covering misses points."""


class QuadratureError(ValueError):
    """Quadrature resolution below the exactness threshold."""


class NetFormatError(ValueError):
    """Malformed network payload or inconsistent layer dimensions."""
