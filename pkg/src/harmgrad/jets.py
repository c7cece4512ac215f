"""Truncated Taylor series (jets) at t = 0."""
from __future__ import annotations

from math import factorial

import numpy as np

from .errors import PreconditionError


class Jet:
    """Coefficients c_0..c_N of a Taylor polynomial, arithmetic truncated at N."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs, order=None):
        c = np.asarray(coeffs, dtype=complex).ravel()
        if order is not None:
            out = np.zeros(order + 1, dtype=complex)
            n = min(len(c), order + 1)
            out[:n] = c[:n]
            c = out
        if len(c) == 0:
            raise PreconditionError("a jet needs at least one coefficient")
        self.coeffs = c

    @property
    def order(self):
        return len(self.coeffs) - 1

    @classmethod
    def constant(cls, c, order):
        return cls([c], order)

    @classmethod
    def variable(cls, order):
        return cls([0.0, 1.0], order)

    @classmethod
    def exp(cls, a, order):
        """Jet of exp(a t)."""
        return cls([a**n / factorial(n) for n in range(order + 1)])

    def _coerce(self, other):
        if isinstance(other, Jet):
            n = min(self.order, other.order)
            return self.coeffs[:n + 1], other.coeffs[:n + 1]
        return self.coeffs, None

    def __add__(self, other):
        a, b = self._coerce(other)
        if b is None:
            out = a.copy()
            out[0] += other
            return Jet(out)
        return Jet(a + b)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._coerce(other)
        if b is None:
            return Jet(a * other)
        n = len(a)
        return Jet(np.convolve(a, b)[:n])

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if int(k) != k or k < 0:
            raise PreconditionError("jets support non-negative integer powers only")
        out = Jet.constant(1.0, self.order)
        base = self
        k = int(k)
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def deriv(self):
        """Derivative; the order drops by one since c_{N+1} is unknown."""
        n = self.order
        if n == 0:
            return Jet([0.0])
        return Jet(self.coeffs[1:] * np.arange(1, n + 1))

    def derivative_at_zero(self, k):
        if k > self.order:
            raise PreconditionError(f"jet of order {self.order} has no derivative {k}")
        return factorial(k) * self.coeffs[k]

    def __call__(self, t):
        return np.polyval(self.coeffs[::-1], t)

    def __repr__(self):
        return f"Jet(order={self.order}, coeffs={self.coeffs!r})"
