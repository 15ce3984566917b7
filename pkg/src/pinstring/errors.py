"""Exception types shared across the package."""


class PinstringError(Exception):
    """Base class for all errors raised by pinstring."""


class DomainError(PinstringError, ValueError):
    """An argument lies outside the domain of the operation."""


class ValidationError(PinstringError, ValueError):
    """Malformed input: duplicate grid points, bad shapes, unnormalized tables."""


class ConfigError(PinstringError, ValueError):
    """A configuration violates one of its invariants (stability, size guards)."""


class NumericalError(PinstringError, ArithmeticError):
    """A numerical procedure failed to converge or to factorize."""
