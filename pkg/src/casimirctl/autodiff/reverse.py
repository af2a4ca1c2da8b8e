"""Reverse-mode tape over scalar or array values.

Var values may be floats or numpy arrays (array values batch independent
evaluations); broadcasting is handled by summing adjoints back to the
parent's shape.
"""

import numpy as np

from ..errors import NumericDomainError, StructuralError

_CONST = (int, float, np.floating, np.integer, np.ndarray)


def _unbroadcast(g, shape):
    """Sum-reduce gradient g to the given target shape."""
    if np.shape(g) == shape:
        return g
    if shape == ():
        return float(np.sum(g))
    g = np.asarray(g)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, (gs, ss) in enumerate(zip(g.shape, shape)):
        if ss == 1 and gs != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


class Tape:
    """Records operations for one evaluation; single-owner, not thread-shared."""

    __slots__ = ("nodes", "warnings")

    def __init__(self):
        self.nodes = []
        self.warnings = []

    def leaf(self, value):
        idx = len(self.nodes)
        self.nodes.append(())
        return Var(self, idx, value)

    def node(self, value, parents):
        idx = len(self.nodes)
        self.nodes.append(parents)
        return Var(self, idx, value)


class Var:
    """A value recorded on a tape.  Arithmetic builds the computation graph."""

    __slots__ = ("tape", "index", "value")
    __array_ufunc__ = None  # keep numpy from absorbing us into object arrays

    def __init__(self, tape, index, value):
        self.tape = tape
        self.index = index
        self.value = value

    def __repr__(self):
        return f"Var({self.value!r})"

    # -- graph construction helpers -------------------------------------

    def _unary(self, value, vjp):
        return self.tape.node(value, ((self.index, vjp),))

    @staticmethod
    def _merge(a, b):
        if isinstance(a, Var) and isinstance(b, Var):
            if a.tape is not b.tape:
                raise StructuralError("cannot combine Vars from different tapes")
            return a.tape
        return a.tape if isinstance(a, Var) else b.tape

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Var):
            tape = Var._merge(self, other)
            sa, sb = np.shape(self.value), np.shape(other.value)
            return tape.node(
                self.value + other.value,
                (
                    (self.index, lambda g: _unbroadcast(g, sa)),
                    (other.index, lambda g: _unbroadcast(g, sb)),
                ),
            )
        if isinstance(other, _CONST):
            sa = np.shape(self.value)
            return self._unary(self.value + other, lambda g: _unbroadcast(g, sa))
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        sa = np.shape(self.value)
        return self._unary(-self.value, lambda g: _unbroadcast(-g, sa))

    def __sub__(self, other):
        if isinstance(other, Var):
            tape = Var._merge(self, other)
            sa, sb = np.shape(self.value), np.shape(other.value)
            return tape.node(
                self.value - other.value,
                (
                    (self.index, lambda g: _unbroadcast(g, sa)),
                    (other.index, lambda g: _unbroadcast(-g, sb)),
                ),
            )
        if isinstance(other, _CONST):
            sa = np.shape(self.value)
            return self._unary(self.value - other, lambda g: _unbroadcast(g, sa))
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, _CONST):
            sa = np.shape(self.value)
            return self._unary(other - self.value, lambda g: _unbroadcast(-g, sa))
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, Var):
            tape = Var._merge(self, other)
            sa, sb = np.shape(self.value), np.shape(other.value)
            av, bv = self.value, other.value
            return tape.node(
                av * bv,
                (
                    (self.index, lambda g: _unbroadcast(g * bv, sa)),
                    (other.index, lambda g: _unbroadcast(g * av, sb)),
                ),
            )
        if isinstance(other, _CONST):
            sa = np.shape(self.value)
            return self._unary(
                self.value * other, lambda g: _unbroadcast(g * other, sa)
            )
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            tape = Var._merge(self, other)
            sa, sb = np.shape(self.value), np.shape(other.value)
            av, bv = self.value, other.value
            if np.ndim(bv) == 0 and bv == 0.0:
                raise NumericDomainError("divide", "division by zero")
            return tape.node(
                av / bv,
                (
                    (self.index, lambda g: _unbroadcast(g / bv, sa)),
                    (other.index, lambda g: _unbroadcast(-g * av / (bv * bv), sb)),
                ),
            )
        if isinstance(other, _CONST):
            if np.ndim(other) == 0 and other == 0.0:
                raise NumericDomainError("divide", "division by zero")
            sa = np.shape(self.value)
            return self._unary(
                self.value / other, lambda g: _unbroadcast(g / other, sa)
            )
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, _CONST):
            av = self.value
            if np.ndim(av) == 0 and av == 0.0:
                raise NumericDomainError("divide", "division by zero")
            sa = np.shape(av)
            return self._unary(
                other / av, lambda g: _unbroadcast(-g * other / (av * av), sa)
            )
        return NotImplemented

    def __pow__(self, n):
        if not isinstance(n, (int, float)):
            return NotImplemented
        av = self.value
        if not float(n).is_integer() and np.any(np.asarray(av) < 0):
            raise NumericDomainError("pow", "fractional power of negative value")
        sa = np.shape(av)
        return self._unary(
            av**n, lambda g: _unbroadcast(g * n * av ** (n - 1), sa)
        )


def backward(out, wrt):
    """Adjoints of scalar ``out`` with respect to the Vars in ``wrt``."""
    if not isinstance(out, Var):
        return [np.zeros(np.shape(v.value)) for v in wrt]
    tape = out.tape
    adj = [None] * (out.index + 1)
    adj[out.index] = (
        1.0 if np.shape(out.value) == () else np.ones(np.shape(out.value))
    )
    for i in range(out.index, -1, -1):
        g = adj[i]
        if g is None:
            continue
        for parent, vjp in tape.nodes[i]:
            c = vjp(g)
            adj[parent] = c if adj[parent] is None else adj[parent] + c
    result = []
    for v in wrt:
        g = adj[v.index] if v.index <= out.index else None
        if g is None:
            g = np.zeros(np.shape(v.value)) if np.shape(v.value) else 0.0
        result.append(g)
    return result
