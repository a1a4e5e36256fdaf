"""Exception types shared across the package."""


class CapacityError(RuntimeError):
    """A support window or work budget exceeded its configured maximum."""


class NumericalError(ArithmeticError):
    """A computation produced a non-finite or otherwise unusable value."""


class DegenerateInputError(ValueError):
    """Input for which the requested construction is undefined."""
