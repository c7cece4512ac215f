"""Uniform box grids, sampled tensor fields, discrete calculus and quadrature.

Derivatives come in three flavours, selected by ``method``:

* ``"fd4"`` (default): fourth-order finite differences, five-point centred in
  the interior and one-sided fourth-order near the boundary.
* ``"fd2"``: the second-order analogue (three-point centred).
* ``"fd6"``: the sixth-order analogue, exact on polynomials of degree 7.
* ``"periodic"``: Fourier differentiation treating the box as a torus whose
  last sample duplicates the first.  Exact to round-off for compactly
  supported smooth fields.
* ``"sine"``: sine-series differentiation for fields that vanish on the box
  boundary (e.g. outputs of :func:`green_dirichlet`).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import InvalidGridError, UnsupportedDomainError

MIN_RESOLUTION = 8


@dataclass(frozen=True)
class Grid:
    extents: tuple
    resolution: tuple

    def __post_init__(self):
        ext = tuple((float(a), float(b)) for a, b in self.extents)
        res = tuple(int(n) for n in self.resolution)
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "resolution", res)
        if len(ext) != len(res):
            raise InvalidGridError("extents and resolution differ in length")
        if len(ext) < 2:
            raise InvalidGridError("grid dimension must be at least 2")
        for (a, b), n in zip(ext, res):
            if not (np.isfinite(a) and np.isfinite(b) and b > a):
                raise InvalidGridError(f"degenerate extent ({a}, {b})")
            if n < MIN_RESOLUTION:
                raise InvalidGridError(f"resolution {n} below minimum {MIN_RESOLUTION}")

    @classmethod
    def cube(cls, lo, hi, n, dim=3):
        return cls(((lo, hi),) * dim, (n,) * dim)

    @property
    def dim(self):
        return len(self.resolution)

    @property
    def spacing(self):
        return tuple((b - a) / (n - 1) for (a, b), n in zip(self.extents, self.resolution))

    @property
    def lengths(self):
        return tuple(b - a for a, b in self.extents)

    @property
    def volume(self):
        return float(np.prod(self.lengths))

    @property
    def axes(self):
        return [np.linspace(a, b, n) for (a, b), n in zip(self.extents, self.resolution)]

    def coords(self):
        """Sparse ``ij``-indexed coordinate arrays, broadcastable to the grid shape."""
        return np.meshgrid(*self.axes, indexing="ij", sparse=True)

    def refined(self, n):
        return Grid(self.extents, (n,) * self.dim)

    def to_dict(self):
        return {"extents": [list(e) for e in self.extents], "resolution": list(self.resolution)}


class Field:
    """Complex samples of a rank-``rank`` tensor on ``grid``.

    ``values`` has shape ``(dim,) * rank + grid.resolution`` and is stored
    read-only.
    """

    def __init__(self, grid: Grid, values, rank: int = 0):
        vals = np.array(values, dtype=np.complex128)
        expected = (grid.dim,) * rank + grid.resolution
        if vals.shape != expected:
            vals = np.broadcast_to(vals, expected).copy() if _broadcastable(vals.shape, expected) else None
            if vals is None:
                raise InvalidGridError(f"value shape {np.shape(values)} does not match {expected}")
        if not np.all(np.isfinite(vals)):
            raise InvalidGridError("field contains non-finite samples")
        vals.setflags(write=False)
        self.grid = grid
        self.rank = rank
        self.values = vals

    @classmethod
    def from_function(cls, grid, fn, rank=0):
        """Sample ``fn(coords)``; for rank > 0 ``fn`` returns nested components."""
        return cls(grid, np.asarray(fn(grid.coords()), dtype=np.complex128), rank)

    @classmethod
    def zeros(cls, grid, rank=0):
        return cls(grid, np.zeros((grid.dim,) * rank + grid.resolution), rank)

    def _wrap(self, vals):
        return Field(self.grid, vals, self.rank)

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid or other.rank != self.rank:
                raise InvalidGridError("fields live on different grids or ranks")
            return other.values
        return other

    def __add__(self, other):
        return self._wrap(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other(other))

    def __neg__(self):
        return self._wrap(-self.values)

    def __mul__(self, other):
        if isinstance(other, Field):
            if other.rank != 0:
                raise InvalidGridError("can only multiply by scalar fields")
            return self._wrap(self.values * other.values)
        return self._wrap(self.values * other)

    __rmul__ = __mul__

    def __getitem__(self, idx):
        """Component access for tensor fields; returns a lower-rank field."""
        if self.rank == 0:
            raise IndexError("scalar field has no components")
        idx = idx if isinstance(idx, tuple) else (idx,)
        return Field(self.grid, self.values[idx], self.rank - len(idx))

    def max_abs(self):
        return float(np.max(np.abs(self.values)))

    def transpose(self, axes):
        """Permute tensor indices (only meaningful for rank >= 2)."""
        nd = self.values.ndim
        perm = tuple(axes) + tuple(range(self.rank, nd))
        return self._wrap(np.transpose(self.values, perm))

    # -- serialization ----------------------------------------------------
    def to_bytes(self):
        g = self.grid
        header = np.array([g.dim, self.rank] + list(g.resolution), dtype="<i4").tobytes()
        header += np.array(g.extents, dtype="<f8").tobytes()
        body = np.ascontiguousarray(self.values, dtype="<c16").tobytes()
        return header + body

    @classmethod
    def from_bytes(cls, data: bytes):
        dim, rank = np.frombuffer(data[:8], dtype="<i4")
        off = 8
        res = tuple(int(n) for n in np.frombuffer(data[off:off + 4 * dim], dtype="<i4"))
        off += 4 * dim
        ext = np.frombuffer(data[off:off + 16 * dim], dtype="<f8").reshape(dim, 2)
        off += 16 * dim
        grid = Grid(tuple(map(tuple, ext)), res)
        shape = (int(dim),) * int(rank) + res
        vals = np.frombuffer(data[off:], dtype="<c16").reshape(shape)
        return cls(grid, vals, int(rank))

    def metadata(self):
        return {"grid": self.grid.to_dict(), "rank": self.rank, "dtype": "complex128",
                "layout": "row-major, little-endian"}

    def save(self, path):
        path = str(path)
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())
        with open(path + ".json", "w") as fh:
            json.dump(self.metadata(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(str(path), "rb") as fh:
            return cls.from_bytes(fh.read())


ScalarField = VectorField = Tensor2Field = Tensor3Field = Field


def _broadcastable(src, dst):
    try:
        np.broadcast_shapes(src, dst)
    except ValueError:
        return False
    return np.broadcast_shapes(src, dst) == dst


# ---------------------------------------------------------------------------
# finite-difference stencils

def fd_weights(offsets, order):
    """Weights w with sum w_k f(x + o_k h) ~ h^order f^(order)(x)."""
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    V = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(V, rhs)


@lru_cache(maxsize=64)
def _fd_matrix(n, order, accuracy=4):
    half = accuracy // 2
    D = np.zeros((n, n))
    centred = fd_weights(np.arange(-half, half + 1), order)
    for i in range(half, n - half):
        D[i, i - half:i + half + 1] = centred
    width = accuracy + order
    for i in range(half):
        w = fd_weights(np.arange(width) - i, order)
        D[i, :width] = w
        D[n - 1 - i, n - width:] = (-1) ** order * w[::-1]
    D.setflags(write=False)
    return D


def _apply_axis(mat, arr, axis):
    out = np.tensordot(mat, arr, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def _periodic_deriv(arr, axis, length, order):
    n = arr.shape[axis] - 1
    core = np.take(arr, np.arange(n), axis=axis)
    real = np.isrealobj(arr)
    k = 2.0 * np.pi * (np.fft.rfftfreq(n, d=length / n) if real else np.fft.fftfreq(n, d=length / n))
    if order % 2 == 1 and n % 2 == 0:
        k = k.copy()
        k[n // 2] = 0.0
    mult = (1j * k) ** order
    shape = [1] * arr.ndim
    shape[axis] = len(k)
    if real:
        d = np.fft.irfft(np.fft.rfft(core, axis=axis) * mult.reshape(shape), n=n, axis=axis)
    else:
        d = np.fft.ifft(np.fft.fft(core, axis=axis) * mult.reshape(shape), axis=axis)
    first = np.take(d, [0], axis=axis)
    return np.concatenate([d, first], axis=axis)


def _sine_deriv(arr, axis, length, order):
    n = arr.shape[axis]
    inner = np.take(arr, np.arange(1, n - 1), axis=axis)
    b = sfft.dst(inner, type=1, axis=axis) / (n - 1)
    m = np.arange(1, n - 1)
    shape = [1] * arr.ndim
    shape[axis] = n - 2
    wave = (np.pi * m / length).reshape(shape)
    if order == 1:
        c = b * wave
        pad = [(0, 0)] * arr.ndim
        pad[axis] = (1, 1)
        return 0.5 * sfft.dct(np.pad(c, pad), type=1, axis=axis)
    if order == 2:
        d = 0.5 * sfft.dst(-b * wave**2, type=1, axis=axis)
        pad = [(0, 0)] * arr.ndim
        pad[axis] = (1, 1)
        return np.pad(d, pad)
    raise ValueError("sine derivatives implemented for orders 1 and 2")


METHODS = ("fd2", "fd4", "fd6", "periodic", "sine")


def partial(values, grid: Grid, axis_index: int, order: int = 1, method: str = "fd4",
            leading: int = 0):
    """Derivative of a raw array along grid axis ``axis_index``.

    ``leading`` is the number of tensor axes in front of the grid axes.
    """
    axis = leading + axis_index
    n = grid.resolution[axis_index]
    h = grid.spacing[axis_index]
    L = grid.lengths[axis_index]
    if method in ("fd2", "fd4", "fd6"):
        acc = int(method[2])
        if n < acc + order + 1:
            raise InvalidGridError("resolution below stencil width")
        return _apply_axis(_fd_matrix(n, order, acc), values, axis) / h**order
    if method == "periodic":
        return _periodic_deriv(values, axis, L, order)
    if method == "sine":
        return _sine_deriv(values, axis, L, order)
    raise ValueError(f"unknown derivative method {method!r}; expected one of {METHODS}")


def gradient(f: Field, method: str = "fd4") -> Field:
    """Append a derivative index as the last tensor index."""
    g = f.grid
    comps = [partial(f.values, g, a, 1, method, f.rank) for a in range(g.dim)]
    vals = np.stack(comps, axis=f.rank)
    return Field(g, vals, f.rank + 1)


def laplacian(f: Field, method: str = "fd4") -> Field:
    g = f.grid
    out = sum(partial(f.values, g, a, 2, method, f.rank) for a in range(g.dim))
    return Field(g, out, f.rank)


def divergence(f: Field, method: str = "fd4") -> Field:
    """Contract the derivative with the FIRST tensor index."""
    if f.rank < 1:
        raise InvalidGridError("divergence needs a tensor field")
    g = f.grid
    out = sum(partial(f.values[a], g, a, 1, method, f.rank - 1) for a in range(g.dim))
    return Field(g, out, f.rank - 1)


# ---------------------------------------------------------------------------
# quadrature

def simpson_weights(n, h):
    """Composite Simpson weights, closed by a 3/8 panel when n is even.

    Exact for cubics for every n >= 4.
    """
    w = np.zeros(n)
    intervals = n - 1
    if intervals % 2 == 0:
        w[0:n:2] += 2.0
        w[1:n:2] = 4.0
        w[0] = w[-1] = 1.0
        return w * h / 3.0
    m = intervals - 3  # even count handled by 1/3 rule
    if m > 0:
        w[:m + 1] = _simp13(m + 1)
    w[m:m + 4] += np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
    return w * h


def _simp13(n):
    w = np.zeros(n)
    w[1:n:2] = 4.0
    w[2:n - 1:2] = 2.0
    w[0] = w[-1] = 1.0
    return w / 3.0


def trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def quadrature_weights(grid: Grid, rule="simpson"):
    make = {"simpson": simpson_weights, "trapezoid": trapezoid_weights}[rule]
    return [make(n, h) for n, h in zip(grid.resolution, grid.spacing)]


def integrate_array(values, grid: Grid, rule="simpson"):
    """Integrate over the trailing grid axes of ``values``."""
    out = np.asarray(values)
    for w in reversed(quadrature_weights(grid, rule)):
        out = np.tensordot(out, w, axes=([-1], [0]))
    return out


def integrate(f: Field, rule: str = "simpson"):
    """Tensor-product quadrature; ``"trapezoid"`` is spectrally accurate for
    smooth integrands that vanish with all derivatives at the boundary."""
    res = integrate_array(f.values, f.grid, rule)
    return complex(res) if f.rank == 0 else res


# ---------------------------------------------------------------------------
# Dirichlet Green operator

def _dirichlet_eigs(grid: Grid):
    lam = 0.0
    for k, (n, L) in enumerate(zip(grid.resolution, grid.lengths)):
        shape = [1] * grid.dim
        shape[k] = n - 2
        lam = lam - ((np.pi * np.arange(1, n - 1) / L) ** 2).reshape(shape)
    return lam


def green_dirichlet(source: Field) -> Field:
    """Solve ``Delta u = source`` in the box with ``u = 0`` on its boundary.

    The interior samples are expanded in the sine eigenbasis of the Dirichlet
    Laplacian and divided by the continuous eigenvalues, so the result is
    exact for band-limited sources and ``laplacian(u, method="sine")``
    recovers the interior of ``source`` to round-off.
    """
    if not isinstance(source, Field) or not isinstance(source.grid, Grid):
        raise UnsupportedDomainError("green_dirichlet requires a field on a box grid")
    return Field(source.grid, dirichlet_solve(source.values, source.grid, source.rank), source.rank)


def dirichlet_solve(values, grid: Grid, leading: int = 0):
    """Array version of :func:`green_dirichlet`; real input gives real output."""
    inner = values[(Ellipsis,) + tuple(slice(1, -1) for _ in range(grid.dim))]
    axes = tuple(range(leading, leading + grid.dim))
    coef = sfft.dstn(inner, type=1, axes=axes) / _dirichlet_eigs(grid)
    out = np.zeros(values.shape, dtype=np.result_type(values.dtype, np.float64))
    out[(Ellipsis,) + tuple(slice(1, -1) for _ in range(grid.dim))] = sfft.idstn(coef, type=1, axes=axes)
    return out


def collar_mask(grid: Grid, width: int):
    """Boolean array, True on samples within ``width`` cells of the boundary."""
    mask = np.zeros(grid.resolution, dtype=bool)
    for a, n in enumerate(grid.resolution):
        idx = [slice(None)] * grid.dim
        idx[a] = slice(0, width)
        mask[tuple(idx)] = True
        idx[a] = slice(n - width, n)
        mask[tuple(idx)] = True
    return mask


def interior_slice(grid: Grid, width: int):
    return tuple(slice(width, n - width) for n in grid.resolution)
