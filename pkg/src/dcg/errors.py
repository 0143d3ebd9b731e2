"""Exception types shared across the package.

The CLI maps these onto exit codes: ValidationError -> 2,
CapacityError -> 3, and a not-converged fit result -> 4.
"""


class DcgError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(DcgError, ValueError):
    """Invalid input: bad shapes, out-of-range states, contradictory evidence."""


class CapacityError(DcgError, RuntimeError):
    """An exact operation would exceed the configured enumeration cap."""


class DegenerateEvidenceError(DcgError, ValueError):
    """Conditioning evidence has zero probability under the model."""
