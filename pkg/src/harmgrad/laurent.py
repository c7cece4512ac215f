"""Exact Laurent-log series in ``z = x1 - i*eps``.

A :class:`LaurentLog` is a finite sum ``sum c * z**p * log(z)**q`` with
rational exponents ``p`` and integer ``q >= 0``.  The class is closed under
products, derivatives and antiderivatives, which is all the quasi-mode
transport hierarchy needs.  Evaluation uses the principal branch; for
``x1 > 0`` the point ``z`` stays in the right half-plane.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np


def _key(p, q=0):
    return (Fraction(p), int(q))


class LaurentLog:
    __slots__ = ("terms",)

    def __init__(self, terms=None):
        clean = {}
        for (p, q), c in (terms or {}).items():
            c = complex(c)
            if c != 0:
                k = _key(p, q)
                clean[k] = clean.get(k, 0) + c
        self.terms = {k: v for k, v in clean.items() if v != 0}

    @classmethod
    def monomial(cls, coeff, p, q=0):
        return cls({(p, q): coeff})

    @classmethod
    def zero(cls):
        return cls()

    # -- algebra ---------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, LaurentLog):
            other = LaurentLog({(0, 0): other})
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return LaurentLog(out)

    __radd__ = __add__

    def __neg__(self):
        return LaurentLog({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, LaurentLog):
            return LaurentLog({k: v * other for k, v in self.terms.items()})
        out = {}
        for (p1, q1), c1 in self.terms.items():
            for (p2, q2), c2 in other.terms.items():
                k = (p1 + p2, q1 + q2)
                out[k] = out.get(k, 0) + c1 * c2
        return LaurentLog(out)

    __rmul__ = __mul__

    def shift(self, s):
        """Multiply by z**s."""
        s = Fraction(s)
        return LaurentLog({(p + s, q): c for (p, q), c in self.terms.items()})

    def is_zero(self, tol=0.0):
        return all(abs(c) <= tol for c in self.terms.values())

    def deriv(self, n=1):
        out = self
        for _ in range(n):
            acc = {}
            for (p, q), c in out.terms.items():
                # d/dz z^p L^q = p z^(p-1) L^q + q z^(p-1) L^(q-1)
                if p != 0:
                    k = (p - 1, q)
                    acc[k] = acc.get(k, 0) + c * float(p)
                if q > 0:
                    k = (p - 1, q - 1)
                    acc[k] = acc.get(k, 0) + c * q
            out = LaurentLog(acc)
        return out

    def antideriv(self):
        """Antiderivative with no added constant term."""
        acc = {}
        for (p, q), c in self.terms.items():
            for k, v in _int_monomial(p, q).items():
                acc[k] = acc.get(k, 0) + c * v
        return LaurentLog(acc)

    # -- evaluation ------------------------------------------------------
    def __call__(self, x1, eps):
        z = np.asarray(x1, dtype=float) - 1j * eps
        return self.eval_z(z)

    def eval_z(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        if not self.terms:
            return out
        logz = np.log(z)
        for (p, q), c in self.terms.items():
            term = np.exp(float(p) * logz) if p != 0 else np.ones_like(z)
            if q:
                term = term * logz**q
            out = out + c * term
        return out

    def abs_eval(self, x1, eps):
        """sum |c| |z|^p |log z|^q, a scale for cancellation checks."""
        z = np.asarray(x1, dtype=float) - 1j * eps
        out = np.zeros(z.shape)
        for (p, q), c in self.terms.items():
            out = out + abs(c) * np.abs(z) ** float(p) * np.abs(np.log(z)) ** q
        return out

    def __repr__(self):
        parts = [f"({c:.6g})z^{p}" + (f"L^{q}" if q else "") for (p, q), c in sorted(self.terms.items())]
        return "LaurentLog(" + " + ".join(parts) + ")" if parts else "LaurentLog(0)"

    def max_coeff_gap(self, other):
        keys = set(self.terms) | set(other.terms)
        return max((abs(self.terms.get(k, 0) - other.terms.get(k, 0)) for k in keys), default=0.0)


def _int_monomial(p, q):
    """Coefficients of an antiderivative of z^p log(z)^q."""
    p = Fraction(p)
    if p == -1:
        return {(Fraction(0), q + 1): 1.0 / (q + 1)}
    s = p + 1
    out = {(s, q): 1.0 / float(s)}
    if q > 0:
        for k, v in _int_monomial(p, q - 1).items():
            out[k] = out.get(k, 0) - q / float(s) * v
    return out


def solve_first_order(alpha, rhs: LaurentLog) -> LaurentLog:
    """Particular solution of y' + (alpha / z) y = rhs with zero homogeneous part."""
    alpha = Fraction(alpha)
    return rhs.shift(alpha).antideriv().shift(-alpha)
