"""Exception hierarchy shared across the package."""


class CasimirctlError(Exception):
    """Base class for package errors."""


class StructuralError(CasimirctlError, ValueError):
    """Shape, symmetry, or dimension contract violated."""


class NumericDomainError(CasimirctlError, ArithmeticError):
    """NaN/Inf or domain violation during evaluation.

    Carries the name of the offending primitive in ``primitive``.
    """

    def __init__(self, primitive, message=None):
        self.primitive = primitive
        super().__init__(message or f"numeric domain error in primitive '{primitive}'")


class NoCasimirError(CasimirctlError):
    """The closed loop has a trivial kernel; use the grid cost instead."""


class UnsupportedStructureError(CasimirctlError):
    """State-dependent structure matrices are not supported by the kernel
    parameterization; use the separable construction or the grid cost."""


class BoundUndefinedError(CasimirctlError):
    """error bound requested with margin a <= loss epsilon."""


class MinimumEscapedError(CasimirctlError):
    """Minimum search left the trust radius around the starting point."""


class TrainingDivergedError(CasimirctlError):
    """NaN loss during training; carries the epoch index and last good snapshot."""

    def __init__(self, epoch, snapshot, message=None):
        self.epoch = epoch
        self.snapshot = snapshot
        super().__init__(message or f"training diverged at epoch {epoch}")


class QuadratureError(CasimirctlError):
    """Adaptive quadrature failed to converge; message carries the interval."""


class ConfigError(CasimirctlError, ValueError):
    """Invalid experiment configuration."""
