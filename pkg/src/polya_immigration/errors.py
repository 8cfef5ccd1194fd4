"""Exception hierarchy shared across the package."""


class PolyaError(Exception):
    """Base class for all package errors."""


class NormalizationError(PolyaError, ValueError):
    """A probability vector does not sum to one."""


class DegenerateError(PolyaError, ValueError):
    """The inter-arrival law puts all mass at zero."""


class TooLargeError(PolyaError, ValueError):
    """An exact enumeration was requested outside its size bounds."""


class InternalInconsistency(PolyaError, ArithmeticError):
    """Two independent evaluation routes disagree beyond tolerance."""


class DomainError(PolyaError, ValueError):
    """Argument outside the domain of a function."""


class QuadratureError(PolyaError, ArithmeticError):
    """Numerical integration did not reach its tolerance."""


class MissingMomentError(PolyaError, KeyError):
    """A limit moment needed to build a coefficient sequence is absent."""


class DegenerateWeights(PolyaError, ValueError):
    """Empirical biasing weights collapsed onto a single sample."""


class EmptyBatch(PolyaError, ValueError):
    """A statistic was requested for an empty sample."""


class ConfigError(PolyaError, ValueError):
    """A CLI configuration failed validation."""
