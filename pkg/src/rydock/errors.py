"""Exception types shared across the package.

The CLI maps these onto process exit codes: InputError -> 2,
InfeasibilityError -> 3, NumericalError -> 4.
"""


class InputError(ValueError):
    """Malformed input files, bad parameters, violated preconditions."""


class InfeasibilityError(RuntimeError):
    """No valid embedding, band, or routing exists for the request."""


class NumericalError(RuntimeError):
    """A numerical accuracy contract was violated (norm drift, divergence)."""
