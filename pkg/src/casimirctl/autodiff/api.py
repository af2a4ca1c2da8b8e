"""Parameter storage and the user-facing grad/hessian/param_grad entry points."""

import numpy as np

from ..errors import NumericDomainError, StructuralError
from .forward import jet_seeds
from .functions import raw
from .reverse import Tape, backward


class ParamVector:
    """Flat vector of all trainable values with a named segment layout.

    The layout is fixed once training starts; segment views alias the flat
    storage so optimizer updates are visible to every owner.
    """

    def __init__(self):
        self.values = np.zeros(0)
        self._segments = {}  # name -> (offset, shape)
        self._order = []

    @property
    def size(self):
        return self.values.size

    @property
    def layout(self):
        return [(name, *self._segments[name]) for name in self._order]

    def allocate(self, name, shape, init=None):
        if name in self._segments:
            raise StructuralError(f"segment '{name}' already allocated")
        shape = tuple(int(s) for s in shape)
        count = int(np.prod(shape)) if shape else 1
        offset = self.values.size
        self.values = np.concatenate([self.values, np.zeros(count)])
        self._segments[name] = (offset, shape)
        self._order.append(name)
        if init is not None:
            self.set(name, init)
        return name

    def get(self, name):
        offset, shape = self._segments[name]
        count = int(np.prod(shape)) if shape else 1
        return self.values[offset : offset + count].reshape(shape)

    def set(self, name, value):
        view = self.get(name)
        value = np.asarray(value, dtype=float).reshape(view.shape)
        view[...] = value

    def segment_slice(self, name):
        offset, shape = self._segments[name]
        count = int(np.prod(shape)) if shape else 1
        return slice(offset, offset + count)

    def copy(self):
        other = ParamVector()
        other.values = self.values.copy()
        other._segments = dict(self._segments)
        other._order = list(self._order)
        return other


class BoundParams:
    """Access layer used by differentiable programs.

    Without a tape, ``get`` returns plain numpy views; with a tape, each
    segment becomes a leaf Var so the loss gradient can be pulled back.
    """

    def __init__(self, params, tape=None):
        self.params = params
        self.tape = tape
        self._cache = {}

    def get(self, name):
        if self.tape is None:
            v = self.params.get(name)
            return float(v) if v.shape == () else v
        if name not in self._cache:
            v = self.params.get(name)
            self._cache[name] = self.tape.leaf(
                float(v) if v.shape == () else v.copy()
            )
        return self._cache[name]

    def touched(self):
        return list(self._cache.items())


def grad(f, at):
    """Gradient of a scalar program via one forward pass with jet seeds."""
    at = np.asarray(at, dtype=float)
    xs = jet_seeds([float(v) for v in at], order=1)
    out = f(xs)
    n = at.size
    if not hasattr(out, "d"):
        return np.zeros(n)
    g = np.array([float(raw(c)) for c in out.d])
    if not np.all(np.isfinite(g)):
        raise NumericDomainError("grad", "non-finite gradient")
    return g


def hessian(f, at):
    """Symmetric Hessian of a scalar program via second-order jets."""
    at = np.asarray(at, dtype=float)
    n = at.size
    xs = jet_seeds([float(v) for v in at], order=2)
    out = f(xs)
    if not hasattr(out, "h"):
        return np.zeros((n, n))
    H = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            H[i, j] = H[j, i] = float(raw(out.hess_entry(i, j)))
    if not np.all(np.isfinite(H)):
        raise NumericDomainError("hessian", "non-finite Hessian")
    return H


def param_grad(loss, params, warnings=None):
    """Gradient of ``loss(bound_params)`` with respect to every parameter.

    ``loss`` may internally take state gradients/Hessians (jet coefficients
    become tape variables) and use the smallest-eigenvalue primitive.
    """
    tape = Tape()
    bound = BoundParams(params, tape)
    out = loss(bound)
    value = raw(out)
    if not np.all(np.isfinite(np.asarray(value))):
        raise NumericDomainError("loss", "non-finite loss value")
    flat = np.zeros(params.size)
    touched = bound.touched()
    grads = backward(out, [v for _, v in touched])
    for (name, _), g in zip(touched, grads):
        flat[params.segment_slice(name)] = np.asarray(g, dtype=float).ravel()
    if warnings is not None:
        warnings.extend(tape.warnings)
    if not np.all(np.isfinite(flat)):
        raise NumericDomainError("param_grad", "non-finite parameter gradient")
    return flat
