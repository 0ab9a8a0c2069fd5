"""Exception types shared across the package.

The CLI maps these onto exit codes: usage/parameter problems -> 1,
data ingestion problems -> 2, numeric or inference failures -> 3.
"""


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class DomainError(ValueError):
    """A mathematically valid-looking input lies outside the function's domain."""


class DataError(ValueError):
    """Input data fails validation (shape, support, schema)."""


class CapabilityError(TypeError):
    """A loss lacks a capability the requested method needs."""


class InfeasibleError(ValueError):
    """A calibration target admits no solution."""


class InferenceError(RuntimeError):
    """A variance or optimization computation is too ill-conditioned to trust."""
