"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the domain of a function."""


class InvalidDataError(ValueError):
    """Sampled data contains NaN/inf or violates a structural requirement."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""


class GridTooCoarseError(ValueError):
    """The grid does not resolve a feature the computation depends on."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped without meeting its tolerance."""


class NegativeBracketError(RuntimeError):
    """The bracket of the Green-function integral map became negative."""


class GlueMismatchError(RuntimeError):
    """Inner and outer pieces of a glued profile do not match."""


class TruncationError(RuntimeError):
    """A truncated series has a tail bound that is too large."""
