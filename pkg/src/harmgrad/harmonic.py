"""Closed-form harmonic functions with exact gradients.

Every family returns a :class:`HarmonicFn` whose ``value``, ``grad`` and
``lap`` accept a list of coordinate arrays (as produced by
``Grid.coords()``) or a single point, and whose ``descriptor`` string
round-trips through :func:`parse_descriptor`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import PreconditionError
from .fields import Field, Grid, interior_slice, laplacian

NULL_TOL = 1e-12


@dataclass(frozen=True)
class HarmonicFn:
    dim: int
    value: Callable
    grad: Callable
    lap: Callable
    descriptor: str

    def scaled(self, c):
        base, _, old = self.descriptor.partition(";scale=")
        total = c * complex(old) if old else c
        return HarmonicFn(
            self.dim,
            lambda x: c * self.value(x),
            lambda x: c * self.grad(x),
            lambda x: c * self.lap(x),
            f"{base};scale={_fmt(total)}",
        )

    def sample(self, grid: Grid) -> Field:
        return Field(grid, self.value(grid.coords()))

    def sample_grad(self, grid: Grid) -> Field:
        return Field(grid, self.grad(grid.coords()), rank=1)


def _shape(x):
    return np.broadcast(*[np.asarray(xi) for xi in x]).shape


def _stack(parts, x):
    shape = _shape(x)
    return np.stack([np.broadcast_to(np.asarray(p, dtype=complex), shape) for p in parts])


def _zero(x):
    return np.zeros(_shape(x), dtype=complex)


# ---------------------------------------------------------------------------
# Calderon exponentials

@dataclass(frozen=True)
class CalderonPair:
    xi: np.ndarray
    nu: np.ndarray
    zeta_plus: np.ndarray
    zeta_minus: np.ndarray


def calderon_pair(xi, nu) -> CalderonPair:
    xi = np.asarray(xi, dtype=float)
    nu = np.asarray(nu, dtype=float)
    nxi = np.linalg.norm(xi)
    if nxi == 0:
        raise PreconditionError("xi must be nonzero")
    if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
        raise PreconditionError("nu must be a unit vector")
    if abs(nu @ xi) > 1e-12 * max(1.0, nxi):
        raise PreconditionError("nu must be orthogonal to xi")
    zp = 0.5 * (xi + 1j * nxi * nu)
    zm = 0.5 * (xi - 1j * nxi * nu)
    return CalderonPair(xi, nu, zp, zm)


def calderon_wave(zeta) -> HarmonicFn:
    """exp(i zeta . x) for a complex null vector zeta."""
    zeta = np.asarray(zeta, dtype=complex)
    nrm = np.sum(np.abs(zeta) ** 2)
    if abs(zeta @ zeta) > NULL_TOL * max(1.0, nrm):
        raise PreconditionError("zeta is not a null vector")

    def value(x):
        return np.exp(1j * sum(z * np.asarray(xi) for z, xi in zip(zeta, x)))

    def grad(x):
        v = value(x)
        return _stack([1j * z * v for z in zeta], x)

    desc = "kind=calderon_wave;zeta=" + ",".join(_fmt(z) for z in zeta)
    return HarmonicFn(len(zeta), value, grad, _zero, desc)


def calderon_waves(xi, nu):
    pair = calderon_pair(xi, nu)
    return calderon_wave(pair.zeta_plus), calderon_wave(pair.zeta_minus)


# ---------------------------------------------------------------------------
# polynomials

def constant(dim, c=1.0) -> HarmonicFn:
    return HarmonicFn(
        dim,
        lambda x: np.full(_shape(x), c, dtype=complex),
        lambda x: np.zeros((dim,) + _shape(x), dtype=complex),
        _zero,
        f"kind=const;dim={dim};c={_fmt(c)}",
    )


def coordinate(dim, j) -> HarmonicFn:
    def value(x):
        return np.broadcast_to(np.asarray(x[j], dtype=complex), _shape(x)).copy()

    def grad(x):
        g = np.zeros((dim,) + _shape(x), dtype=complex)
        g[j] = 1.0
        return g

    return HarmonicFn(dim, value, grad, _zero, f"kind=coord;dim={dim};j={j}")


def polynomial(dim, terms: dict, descriptor=None) -> HarmonicFn:
    """Polynomial from {exponent tuple: coefficient}; lap evaluated exactly."""
    terms = {tuple(int(e) for e in k): complex(v) for k, v in terms.items() if v != 0}

    def ev(tms, x):
        shape = _shape(x)
        out = np.zeros(shape, dtype=complex)
        for exps, c in tms.items():
            term = np.full(shape, c, dtype=complex)
            for xi, e in zip(x, exps):
                if e:
                    term = term * np.asarray(xi) ** e
            out += term
        return out

    def deriv(tms, a):
        out = {}
        for exps, c in tms.items():
            if exps[a]:
                e = list(exps)
                e[a] -= 1
                out[tuple(e)] = out.get(tuple(e), 0) + c * exps[a]
        return out

    grads = [deriv(terms, a) for a in range(dim)]
    lap_terms: dict = {}
    for a in range(dim):
        for k, v in deriv(grads[a], a).items():
            lap_terms[k] = lap_terms.get(k, 0) + v

    if descriptor is None:
        parts = [f"{_fmt(c)}@{'.'.join(map(str, e))}" for e, c in sorted(terms.items())]
        descriptor = f"kind=poly;dim={dim};terms=" + "|".join(parts)
    return HarmonicFn(
        dim,
        lambda x: ev(terms, x),
        lambda x: np.stack([ev(gt, x) for gt in grads]),
        lambda x: ev(lap_terms, x),
        descriptor,
    )


def _monomials(deg, dim):
    return [e for e in itertools.product(range(deg + 1), repeat=dim) if sum(e) == deg]


def harmonic_space_dim(deg, dim):
    """Dimension of degree-``deg`` harmonic polynomials in ``dim`` variables."""
    if deg < 2:
        return comb(deg + dim - 1, dim - 1)
    return comb(deg + dim - 1, dim - 1) - comb(deg + dim - 3, dim - 1)


def harmonic_polynomials(max_degree: int, dim: int):
    """Real basis of harmonic polynomials of every degree <= max_degree.

    Each degree block is an orthonormal nullspace basis of the Laplacian
    acting on monomials, cleaned so that exact monomial combinations like
    x0*x1 stay recognisable.
    """
    if max_degree > 6:
        raise PreconditionError("max_degree above 6 not supported")
    out = [constant(dim)]
    for d in range(1, max_degree + 1):
        mons = _monomials(d, dim)
        if d == 1:
            out.extend(coordinate(dim, j) for j in range(dim))
            continue
        lower = _monomials(d - 2, dim)
        row = {m: i for i, m in enumerate(lower)}
        L = np.zeros((len(lower), len(mons)))
        for c, m in enumerate(mons):
            for a in range(dim):
                if m[a] >= 2:
                    e = list(m)
                    e[a] -= 2
                    L[row[tuple(e)], c] += m[a] * (m[a] - 1)
        null = scipy.linalg.null_space(L)
        # reduced row echelon form gives sparse, readable basis vectors
        basis = _rref(null.T)
        for vec in basis:
            vec = np.where(np.abs(vec) < 1e-12, 0.0, vec)
            terms = {m: c for m, c in zip(mons, vec) if c != 0}
            out.append(polynomial(dim, terms))
    return out


def _rref(M, tol=1e-10):
    M = M.copy()
    rows, cols = M.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = r + np.argmax(np.abs(M[r:, c]))
        if abs(M[p, c]) < tol:
            continue
        M[[r, p]] = M[[p, r]]
        M[r] /= M[r, c]
        for i in range(rows):
            if i != r:
                M[i] -= M[i, c] * M[r]
        r += 1
    return M[:r]


# ---------------------------------------------------------------------------
# point sources

def point_source(pole, grid: Grid | None = None) -> HarmonicFn:
    """Fundamental-solution profile |x - z|^(2 - dim); log|x - z| in dim 2.

    With ``grid`` given, the pole must lie outside its bounding box.
    """
    z = np.asarray(pole, dtype=float)
    dim = len(z)
    if grid is not None:
        inside = all(a <= zi <= b for zi, (a, b) in zip(z, grid.extents))
        if inside:
            raise PreconditionError("point-source pole lies inside the grid box")
    p = 2 - dim

    def r2(x):
        return sum((np.asarray(xi) - zi) ** 2 for xi, zi in zip(x, z))

    def value(x):
        if dim == 2:
            return 0.5 * np.log(r2(x)).astype(complex)
        return (r2(x) ** (0.5 * p)).astype(complex)

    def grad(x):
        rr = r2(x)
        fac = 1.0 / rr if dim == 2 else p * rr ** (0.5 * p - 1)
        return _stack([fac * (np.asarray(xi) - zi) for xi, zi in zip(x, z)], x)

    desc = "kind=point_source;pole=" + ",".join(_fmt(v) for v in z)
    return HarmonicFn(dim, value, grad, _zero, desc)


# ---------------------------------------------------------------------------
# verification

def harmonicity_residual(f: HarmonicFn, grid: Grid, method="fd4", collar=None) -> float:
    """max |discrete Laplacian of f| over interior samples, over max |f|.

    The default collar skips the samples reached by one-sided stencils.
    """
    if collar is None:
        collar = {"fd4": 2, "fd6": 3}.get(method, 0)
    vals = f.sample(grid)
    lap = laplacian(vals, method=method).values
    sl = interior_slice(grid, collar)
    scale = np.max(np.abs(vals.values))
    return float(np.max(np.abs(lap[sl])) / scale) if scale > 0 else 0.0


# ---------------------------------------------------------------------------
# descriptors

def _fmt(c):
    c = complex(c)
    if c.imag == 0:
        return repr(float(c.real))
    return f"{c.real!r}{c.imag:+.17g}j"


def parse_descriptor(desc: str) -> HarmonicFn:
    """Rebuild a HarmonicFn from its descriptor string."""
    fields = dict(kv.split("=", 1) for kv in desc.split(";") if kv)
    scale = fields.pop("scale", None)
    kind = fields["kind"]
    if kind == "calderon_wave":
        f = calderon_wave([complex(s) for s in fields["zeta"].split(",")])
    elif kind == "calderon":
        xi = [float(s) for s in fields["xi"].split(",")]
        nu = [float(s) for s in fields["nu"].split(",")]
        pair = calderon_pair(xi, nu)
        zeta = pair.zeta_plus if fields.get("branch", "+") == "+" else pair.zeta_minus
        f = calderon_wave(zeta)
    elif kind == "const":
        f = constant(int(fields["dim"]), complex(fields.get("c", "1")))
    elif kind == "coord":
        f = coordinate(int(fields["dim"]), int(fields["j"]))
    elif kind == "poly":
        terms = {}
        for part in fields["terms"].split("|"):
            c, e = part.rsplit("@", 1)
            terms[tuple(int(v) for v in e.split("."))] = complex(c)
        f = polynomial(int(fields["dim"]), terms)
    elif kind == "point_source":
        f = point_source([float(s) for s in fields["pole"].split(",")])
    else:
        raise PreconditionError(f"unknown harmonic kind {kind!r}")
    if scale is not None:
        f = f.scaled(complex(scale))
    return f
