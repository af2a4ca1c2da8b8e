"""Forward-mode jets over a set of seed directions.

Jet carries a value and first-order tangents; Jet2 additionally carries the
upper triangle of the second-order coefficients.  Coefficients may be floats,
numpy arrays (batched evaluation), or reverse-mode Vars (for parameter
gradients of derived quantities).
"""

import numpy as np

from ..errors import NumericDomainError
from .reverse import Var

_SCALAR = (int, float, np.floating, np.integer, np.ndarray, Var)


def _npairs(k):
    return k * (k + 1) // 2


def _chkdiv(denom):
    """Raise the package numeric error on division by zero (scalar or array)."""
    if isinstance(denom, Var):
        val = denom.value
    else:
        val = denom
    if isinstance(val, np.ndarray):
        if np.any(val == 0.0):
            raise NumericDomainError("div", "division by zero in jet arithmetic")
    elif isinstance(val, (int, float, np.floating, np.integer)) and float(val) == 0.0:
        raise NumericDomainError("div", "division by zero in jet arithmetic")
    return denom


def pair_index(i, j, k):
    """Flat index of the (i, j) entry, i <= j, in the packed upper triangle."""
    return i * k - i * (i - 1) // 2 + (j - i)


class Jet:
    """First-order jet: value plus tangent per seed direction."""

    __slots__ = ("f", "d")
    __array_ufunc__ = None

    def __init__(self, f, d):
        self.f = f
        self.d = list(d)

    @property
    def nseeds(self):
        return len(self.d)

    def __repr__(self):
        return f"Jet({self.f!r}, {self.d!r})"

    def __add__(self, o):
        if isinstance(o, Jet):
            return Jet(self.f + o.f, [a + b for a, b in zip(self.d, o.d)])
        if isinstance(o, _SCALAR):
            return Jet(self.f + o, self.d)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.f, [-a for a in self.d])

    def __sub__(self, o):
        if isinstance(o, Jet):
            return Jet(self.f - o.f, [a - b for a, b in zip(self.d, o.d)])
        if isinstance(o, _SCALAR):
            return Jet(self.f - o, self.d)
        return NotImplemented

    def __rsub__(self, o):
        if isinstance(o, _SCALAR):
            return Jet(o - self.f, [-a for a in self.d])
        return NotImplemented

    def __mul__(self, o):
        if isinstance(o, Jet):
            return Jet(
                self.f * o.f,
                [self.f * db + da * o.f for da, db in zip(self.d, o.d)],
            )
        if isinstance(o, _SCALAR):
            return Jet(self.f * o, [a * o for a in self.d])
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Jet):
            _chkdiv(o.f)
            w = self.f / o.f
            return Jet(w, [(da - w * db) / o.f for da, db in zip(self.d, o.d)])
        if isinstance(o, _SCALAR):
            _chkdiv(o)
            return Jet(self.f / o, [a / o for a in self.d])
        return NotImplemented

    def __rtruediv__(self, o):
        if isinstance(o, _SCALAR):
            _chkdiv(self.f)
            w = o / self.f
            return Jet(w, [-w * da / self.f for da in self.d])
        return NotImplemented

    def __pow__(self, n):
        if not isinstance(n, (int, float)):
            return NotImplemented
        d1 = n * self.f ** (n - 1)
        return Jet(self.f**n, [d1 * a for a in self.d])

    def chain(self, f0, d1):
        """Unary chain rule given f(value) and f'(value)."""
        return Jet(f0, [d1 * a for a in self.d])


class Jet2:
    """Second-order jet: value, tangents, and packed upper-triangle curvature."""

    __slots__ = ("f", "d", "h")
    __array_ufunc__ = None

    def __init__(self, f, d, h):
        self.f = f
        self.d = list(d)
        self.h = list(h)  # packed: (0,0),(0,1)...(0,k-1),(1,1),...

    @classmethod
    def seed(cls, values, index, k):
        """Jet2 for coordinate ``index`` of a k-dimensional input."""
        d = [1.0 if i == index else 0.0 for i in range(k)]
        return cls(values, d, [0.0] * _npairs(k))

    @property
    def nseeds(self):
        return len(self.d)

    def hess_entry(self, i, j):
        k = len(self.d)
        return self.h[pair_index(min(i, j), max(i, j), k)]

    def __repr__(self):
        return f"Jet2({self.f!r}, {self.d!r}, {self.h!r})"

    def _pairs(self):
        k = len(self.d)
        for i in range(k):
            for j in range(i, k):
                yield i, j

    def __add__(self, o):
        if isinstance(o, Jet2):
            return Jet2(
                self.f + o.f,
                [a + b for a, b in zip(self.d, o.d)],
                [a + b for a, b in zip(self.h, o.h)],
            )
        if isinstance(o, _SCALAR):
            return Jet2(self.f + o, self.d, self.h)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.f, [-a for a in self.d], [-a for a in self.h])

    def __sub__(self, o):
        if isinstance(o, Jet2):
            return Jet2(
                self.f - o.f,
                [a - b for a, b in zip(self.d, o.d)],
                [a - b for a, b in zip(self.h, o.h)],
            )
        if isinstance(o, _SCALAR):
            return Jet2(self.f - o, self.d, self.h)
        return NotImplemented

    def __rsub__(self, o):
        if isinstance(o, _SCALAR):
            return Jet2(o - self.f, [-a for a in self.d], [-a for a in self.h])
        return NotImplemented

    def __mul__(self, o):
        if isinstance(o, Jet2):
            d = [self.f * db + da * o.f for da, db in zip(self.d, o.d)]
            h = []
            t = 0
            for i, j in self._pairs():
                h.append(
                    self.f * o.h[t]
                    + self.h[t] * o.f
                    + self.d[i] * o.d[j]
                    + self.d[j] * o.d[i]
                )
                t += 1
            return Jet2(self.f * o.f, d, h)
        if isinstance(o, _SCALAR):
            return Jet2(self.f * o, [a * o for a in self.d], [a * o for a in self.h])
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Jet2):
            _chkdiv(o.f)
            w = self.f / o.f
            d = [(da - w * db) / o.f for da, db in zip(self.d, o.d)]
            h = []
            t = 0
            for i, j in self._pairs():
                h.append(
                    (self.h[t] - d[i] * o.d[j] - d[j] * o.d[i] - w * o.h[t]) / o.f
                )
                t += 1
            return Jet2(w, d, h)
        if isinstance(o, _SCALAR):
            _chkdiv(o)
            return Jet2(self.f / o, [a / o for a in self.d], [a / o for a in self.h])
        return NotImplemented

    def __rtruediv__(self, o):
        if isinstance(o, _SCALAR):
            # o / self via chain rule on x -> o/x
            _chkdiv(self.f)
            f0 = o / self.f
            d1 = -o / (self.f * self.f)
            d2 = 2.0 * o / (self.f * self.f * self.f)
            return self.chain(f0, d1, d2)
        return NotImplemented

    def __pow__(self, n):
        if not isinstance(n, (int, float)):
            return NotImplemented
        f0 = self.f**n
        d1 = n * self.f ** (n - 1)
        d2 = n * (n - 1) * self.f ** (n - 2)
        return self.chain(f0, d1, d2)

    def chain(self, f0, d1, d2):
        """Unary chain rule given f(value), f'(value), f''(value)."""
        d = [d1 * a for a in self.d]
        h = []
        t = 0
        for i, j in self._pairs():
            h.append(d1 * self.h[t] + d2 * self.d[i] * self.d[j])
            t += 1
        return Jet2(f0, d, h)


def jet_seeds(values, order=1):
    """Seed one Jet/Jet2 per coordinate of ``values`` (list of scalars)."""
    k = len(values)
    if order == 1:
        return [
            Jet(values[i], [1.0 if j == i else 0.0 for j in range(k)])
            for i in range(k)
        ]
    if order == 2:
        return [Jet2.seed(values[i], i, k) for i in range(k)]
    raise NumericDomainError("jet_seeds", f"unsupported order {order}")
