"""Semantic exception types shared across the package."""


class NumericError(ArithmeticError):
    """A linear-algebra or density computation hit non-finite values."""


class InfeasibleError(ValueError):
    """The requested construction has no solution for the given inputs."""
