"""Shared test helpers: finite-difference oracles and a random expression
generator used by the derivative property suites."""

import numpy as np
import pytest

from casimirctl.autodiff import functions as fn


def fd_grad(f, x, h=1e-4):
    """Central-difference gradient of a plain-float scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def fd_hessian(f, x, h=1e-3):
    """Central-difference Hessian of a plain-float scalar function."""
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h
            ej[j] = h
            H[i, j] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4.0 * h * h)
    return 0.5 * (H + H.T)


def rel_err(a, b, floor=1.0):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = max(floor, float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / denom


class RandomExpression:
    """Random composition of the supported primitives.

    Built as a list of intermediate scalar nodes over the input vector;
    evaluation is generic over autodiff scalar types so the same expression
    runs under jets, tapes, or plain floats.
    """

    _UNARY = ("tanh", "sin", "cos", "exp", "sqrt1p", "relu", "neg")
    _BINARY = ("add", "sub", "mul", "div1p")

    def __init__(self, rng, dim, depth):
        self.dim = dim
        self.ops = []
        n_nodes = dim + int(rng.integers(1, depth * 3 + 1))
        for k in range(dim, n_nodes):
            if rng.random() < 0.5:
                self.ops.append(
                    ("u", self._UNARY[rng.integers(len(self._UNARY))],
                     int(rng.integers(k)), None)
                )
            else:
                self.ops.append(
                    ("b", self._BINARY[rng.integers(len(self._BINARY))],
                     int(rng.integers(k)), int(rng.integers(k)))
                )
        self.coeffs = rng.uniform(-1.0, 1.0, size=len(self.ops))

    def __call__(self, xs):
        nodes = list(xs)
        for (kind, op, i, j), c in zip(self.ops, self.coeffs):
            a = nodes[i]
            if kind == "u":
                if op == "tanh":
                    v = fn.tanh(a)
                elif op == "sin":
                    v = fn.sin(a)
                elif op == "cos":
                    v = fn.cos(a)
                elif op == "exp":
                    v = fn.exp(a * 0.3)
                elif op == "sqrt1p":
                    v = fn.sqrt(a * a + 1.0)
                elif op == "relu":
                    v = fn.relu(a + float(c))
                else:
                    v = -a
            else:
                b = nodes[j]
                if op == "add":
                    v = a + b
                elif op == "sub":
                    v = a - b
                elif op == "mul":
                    v = a * b
                else:
                    v = a / (b * b + 1.0)
            nodes.append(v * float(c))
        out = nodes[-1]
        for k in range(self.dim):
            out = out + nodes[k] * 0.01
        return out

    def as_float(self):
        def f(x):
            return float(fn.raw(self([float(v) for v in x])))

        return f


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
