"""Nested differentiation engine.

Forward-mode jets carry value/gradient/Hessian with respect to designated
state inputs; a reverse-mode tape differentiates derived scalars (including
eigenvalue terms) with respect to network parameters.  Jet coefficients may
themselves be tape variables, which is how third-order mixed derivatives are
obtained.
"""

from .reverse import Tape, Var, backward
from .forward import Jet, Jet2
from . import functions
from .functions import (
    cos,
    exp,
    log,
    matvec,
    min_eig_sym,
    relu,
    sin,
    sqrt,
    sum_all,
    tanh,
    vecnorm,
)
from .api import BoundParams, ParamVector, grad, hessian, param_grad

__all__ = [
    "Tape",
    "Var",
    "backward",
    "Jet",
    "Jet2",
    "functions",
    "tanh",
    "exp",
    "log",
    "sin",
    "cos",
    "sqrt",
    "relu",
    "vecnorm",
    "sum_all",
    "matvec",
    "min_eig_sym",
    "ParamVector",
    "BoundParams",
    "grad",
    "hessian",
    "param_grad",
]
