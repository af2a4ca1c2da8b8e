"""Neural energy-Casimir controller synthesis for port-Hamiltonian systems.

Train neural Casimir/Lyapunov functions that place the closed-loop energy
minimum at a desired equilibrium, simulate the damping-injected loop, and
certify the epsilon/(a - epsilon) equilibrium-assignment error bound.
"""

from .errors import (
    BoundUndefinedError,
    CasimirctlError,
    ConfigError,
    MinimumEscapedError,
    NoCasimirError,
    NumericDomainError,
    QuadratureError,
    StructuralError,
    TrainingDivergedError,
    UnsupportedStructureError,
)

__version__ = "0.1.0"

__all__ = [
    "BoundUndefinedError",
    "CasimirctlError",
    "ConfigError",
    "MinimumEscapedError",
    "NoCasimirError",
    "NumericDomainError",
    "QuadratureError",
    "StructuralError",
    "TrainingDivergedError",
    "UnsupportedStructureError",
    "__version__",
]
