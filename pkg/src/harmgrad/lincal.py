"""Symmetric two-tensors invisible to products of two harmonic gradients.

A pair (v, a) with v vanishing near the boundary and a antisymmetric with
divergence-free rows generates

    C_jk = d_j v_k + d_k v_j - delta_jk div v + a_jk,

whose integral against grad u1 (x) grad u2 vanishes for harmonic u1, u2.
:func:`decompose` runs the argument backwards; :func:`tartar_linearization`
checks that the same symmetric term is the first variation of pushing the
identity conductivity forward along the flow of v.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import ConfigError, PreconditionError
from .fields import Field, Grid, collar_mask, green_dirichlet, integrate_array, partial
from .harmonic import HarmonicFn
from .harness.fitting import fit_slope
from .report import ExperimentReport

COLLAR = 3
DIV_TOL = 1e-10
COLLAR_TOL = 1e-10


def _grad_last(values, grid, method, leading):
    """Stack d_a along a new axis placed right after the tensor axes."""
    return np.stack([partial(values, grid, a, 1, method, leading) for a in range(grid.dim)],
                    axis=leading)


def row_divergence(a: Field, method="periodic"):
    """sum_j d_j a_jk."""
    g = a.grid
    return sum(partial(a.values[j], g, j, 1, method, 1) for j in range(g.dim))


@dataclass(frozen=True)
class ObstructionPair:
    v: Field
    a: Field
    method: str = "periodic"
    collar: int = COLLAR

    def __post_init__(self):
        if self.v.rank != 1 or self.a.rank != 2:
            raise PreconditionError("v must be a vector field and a a 2-tensor field")
        if self.v.grid != self.a.grid:
            raise PreconditionError("v and a live on different grids")
        A = self.a.values
        if np.any(A != -np.swapaxes(A, 0, 1)):
            raise PreconditionError("a is not antisymmetric")
        mask = collar_mask(self.v.grid, self.collar)
        if np.any(self.v.values[..., mask] != 0):
            raise PreconditionError("v must vanish on the boundary collar")
        # a spectral derivative of a compactly supported potential leaves
        # round-off outside the support; anything larger means under-resolution
        if np.max(np.abs(A[..., mask]), initial=0.0) > COLLAR_TOL * max(1.0, np.max(np.abs(A))):
            raise PreconditionError("a does not vanish on the boundary collar (under-resolved?)")
        div = np.max(np.abs(row_divergence(self.a, self.method)))
        if div > DIV_TOL:
            raise PreconditionError(f"rows of a are not divergence-free (max {div:.3g})")


def antisymmetric_from_potential(phi: Field, method="periodic") -> Field:
    """a_jk = eps_jkl D_l phi with the discrete derivative D (3D only).

    Discrete derivatives commute, so sum_j D_j a_jk vanishes to round-off.
    """
    g = phi.grid
    if g.dim != 3:
        raise PreconditionError("the potential construction needs dim = 3")
    d = [partial(phi.values, g, l, 1, method) for l in range(3)]
    a = np.zeros((3, 3) + g.resolution, dtype=complex)
    a[0, 1], a[1, 2], a[2, 0] = d[2], d[0], d[1]
    a[1, 0], a[2, 1], a[0, 2] = -d[2], -d[0], -d[1]
    return Field(g, a, 2)


def _zero_collar(values, grid, width=COLLAR):
    out = np.array(values)
    out[..., collar_mask(grid, width)] = 0.0
    return out


def random_obstruction_pair(grid: Grid, rng, n_bumps=2, width=0.1, radius=0.8, r_flat=0.65, with_a=True,
                            method="periodic", a_width=None) -> ObstructionPair:
    from .profiles import GaussianBump
    x = grid.coords()
    mid = [0.5 * (a + b) for a, b in grid.extents]
    v = np.zeros((grid.dim,) + grid.resolution, dtype=complex)
    phi = np.zeros(grid.resolution, dtype=complex)
    for _ in range(n_bumps):
        c = tuple(m + 0.03 * rng.uniform(-1, 1) for m in mid)
        b = GaussianBump(c, width, radius, r_flat).value(x)
        coef = rng.normal(size=grid.dim)
        v += np.einsum("j,...->j...", coef, b)
        if a_width is not None:
            b = GaussianBump(c, a_width, radius, r_flat).value(x)
        phi += rng.normal() * b
    v = _zero_collar(v, grid)
    if with_a and grid.dim == 3:
        a = antisymmetric_from_potential(Field(grid, _zero_collar(phi, grid)), method)
    else:
        a = Field.zeros(grid, 2)
    return ObstructionPair(Field(grid, v, 1), a, method)


def symmetric_part_of(v: Field, method="periodic"):
    """d_j v_k + d_k v_j - delta_jk div v as a raw array."""
    g = v.grid
    D = _grad_last(v.values, g, method, 1)       # D[k, j] = d_j v_k
    div = np.trace(D, axis1=0, axis2=1)
    return D + np.swapaxes(D, 0, 1) - np.einsum("jk,...->jk...", np.eye(g.dim), div)


def build_obstruction(pair: ObstructionPair) -> Field:
    return Field(pair.v.grid, symmetric_part_of(pair.v, pair.method) + pair.a.values, 2)


def double_identity(C: Field, u1: HarmonicFn, u2: HarmonicFn, rule="trapezoid") -> complex:
    """Quadrature of sum_jk C_jk d_j u1 d_k u2.

    The trapezoid rule is the default: on compactly supported smooth
    integrands it is spectrally accurate.
    """
    if C.rank != 2:
        raise PreconditionError("C must be a 2-tensor field")
    x = C.grid.coords()
    integrand = np.einsum("jk...,j...,k...->...", C.values, u1.grad(x), u2.grad(x), optimize=True)
    return complex(integrate_array(integrand, C.grid, rule))


def identity_scale(C: Field, u1: HarmonicFn, u2: HarmonicFn) -> float:
    x = C.grid.coords()
    n1 = np.max(np.sqrt(np.sum(np.abs(u1.grad(x)) ** 2, axis=0)))
    n2 = np.max(np.sqrt(np.sum(np.abs(u2.grad(x)) ** 2, axis=0)))
    return float(C.max_abs() * n1 * n2 * C.grid.volume)


def polarization_gap(C: Field, u1: HarmonicFn, u2: HarmonicFn, rule="trapezoid") -> float:
    """|Q(u1, u2) - [Q(u1+u2) - Q(u1-u2)]/4| for symmetric C, Q the double identity."""
    x = C.grid.coords()
    g1, g2 = u1.grad(x), u2.grad(x)
    Cs = 0.5 * (C.values + np.swapaxes(C.values, 0, 1))

    def q(a, b):
        return integrate_array(np.einsum("jk...,j...,k...->...", Cs, a, b), C.grid, rule)

    return float(abs(q(g1, g2) - 0.25 * (q(g1 + g2, g1 + g2) - q(g1 - g2, g1 - g2))))


@dataclass
class Decomposition:
    v: Field
    a: Field
    B_residual: Field
    antisym_divergence: float


def decompose(C: Field, method="periodic", collar=COLLAR, v_method="sine") -> Decomposition:
    """Split C into (v, a, B_residual).

    a is the antisymmetric part of C.  v solves Delta v_j = sum_k d_k C^s_jk
    with zero boundary values, and
        B_residual = C^s - (d_j v_k + d_k v_j - delta_jk div v).
    ``method`` differentiates C; ``v_method`` differentiates v, which as a
    Dirichlet solution is natively a sine series.
    """
    if C.rank != 2:
        raise PreconditionError("C must be a 2-tensor field")
    g = C.grid
    mask = collar_mask(g, collar)
    if np.any(np.abs(C.values[..., mask]) > COLLAR_TOL * max(1.0, C.max_abs())):
        raise PreconditionError("C is not supported inside the grid interior")
    V = C.values
    Ct = np.swapaxes(V, 0, 1)
    Ca = 0.5 * (V - Ct)
    Cs = 0.5 * (V + Ct)
    a = Field(g, Ca, 2)
    div_a = float(np.max(np.abs(row_divergence(a, "periodic")))) if g.dim else 0.0
    src = sum(partial(Cs[:, k], g, k, 1, method, 1) for k in range(g.dim))
    v = green_dirichlet(Field(g, src, 1))
    B = Cs - symmetric_part_of(v, v_method)
    return Decomposition(v, a, Field(g, B, 2), div_a)


def mollify(C: Field, width: float) -> Field:
    """Gaussian smoothing over the grid axes (``width`` in physical units)."""
    if width < 0:
        raise PreconditionError("width must be non-negative")
    g = C.grid
    sigma = [0.0] * C.rank + [width / h for h in g.spacing]
    re = ndimage.gaussian_filter(C.values.real, sigma, mode="constant")
    im = ndimage.gaussian_filter(C.values.imag, sigma, mode="constant")
    return Field(g, re + 1j * im, C.rank)


# ---------------------------------------------------------------------------
# Tartar gauge

@dataclass(frozen=True)
class SmoothVectorField:
    """Closed-form vector field: value(x) -> (dim, ...), jacobian(x) -> (dim, dim, ...)
    with jacobian[i, j] = d_j v_i; x is a list of coordinate arrays."""
    value: Callable
    jacobian: Callable


def bump_vector_field(bump, coeffs) -> SmoothVectorField:
    c = np.asarray(coeffs, dtype=float)

    def value(x):
        return np.einsum("i,...->i...", c, bump.value(x))

    def jacobian(x):
        return np.einsum("i,j...->ij...", c, bump.grad(x))

    return SmoothVectorField(value, jacobian)


def zero_vector_field(dim) -> SmoothVectorField:
    return SmoothVectorField(lambda x: np.zeros((dim,) + np.broadcast(*x).shape),
                             lambda x: np.zeros((dim, dim) + np.broadcast(*x).shape))


def flow_with_jacobian(v: SmoothVectorField, points, t, steps=64, box=None):
    """RK4 for Phi' = v(Phi), M' = Dv(Phi) M from Phi(0) = x, M(0) = I."""
    X = np.array(points, dtype=float)              # (dim, n)
    dim, n = X.shape
    M = np.broadcast_to(np.eye(dim)[:, :, None], (dim, dim, n)).copy()
    dt = t / steps

    def rhs(X, M):
        xs = list(X)
        return v.value(xs), np.einsum("ik...,kj...->ij...", v.jacobian(xs), M)

    for _ in range(steps):
        k1x, k1m = rhs(X, M)
        k2x, k2m = rhs(X + 0.5 * dt * k1x, M + 0.5 * dt * k1m)
        k3x, k3m = rhs(X + 0.5 * dt * k2x, M + 0.5 * dt * k2m)
        k4x, k4m = rhs(X + dt * k3x, M + dt * k3m)
        X = X + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        M = M + dt / 6 * (k1m + 2 * k2m + 2 * k3m + k4m)
        if box is not None:
            for a, (lo, hi) in enumerate(box):
                if np.any(X[a] < lo) or np.any(X[a] > hi):
                    raise ConfigError("flow leaves the domain; reduce t or the field amplitude")
    return X, M


def pushforward_identity(M):
    """M^T M / det M for a stack of matrices (dim, dim, n)."""
    Mt = np.moveaxis(M, -1, 0)
    det = np.linalg.det(Mt)
    I_t = np.einsum("nki,nkj->nij", Mt, Mt) / det[:, None, None]
    return np.moveaxis(I_t, 0, -1), det


def tartar_linearization(v: SmoothVectorField, t_list, grid: Grid, steps=64, seed=None,
                         slope_tol=0.1) -> ExperimentReport:
    """Residuals of I_t = I + t (sym grad v - delta div v) and det = 1 + t div v."""
    ts = np.asarray(sorted(t_list), dtype=float)
    x = [np.ravel(c) for c in np.meshgrid(*grid.axes, indexing="ij")]
    pts = np.array(x)
    dim = grid.dim
    Dv = v.jacobian(x)
    div = np.trace(Dv)
    lin = Dv + np.swapaxes(Dv, 0, 1) - np.einsum("ij,n->ijn", np.eye(dim), div)
    rep = ExperimentReport("lincal-tartar", params={"t_list": ts.tolist(), "steps": steps,
                                                    "grid": grid.to_dict()}, seed=seed)
    rows, r_I, r_det = [], [], []
    for t in ts:
        _, M = flow_with_jacobian(v, pts, t, steps, box=grid.extents)
        I_t, det = pushforward_identity(M)
        eI = float(np.max(np.abs(I_t - np.eye(dim)[:, :, None] - t * lin)))
        ed = float(np.max(np.abs(det - 1 - t * div)))
        r_I.append(eI)
        r_det.append(ed)
        rows.append([t, eI, ed])
    rep.add_table("tartar", ["t", "I_t_residual", "det_residual"], rows)
    if max(r_I) == 0.0 and max(r_det) == 0.0:
        rep.check_le("I_t_residual_max", 0.0, 0.0)
        return rep
    sI, _ = fit_slope(ts, r_I)
    sd, _ = fit_slope(ts, r_det)
    rep.check_close("I_t_t_slope", sI, 2.0, slope_tol)
    rep.check_close("det_t_slope", sd, 2.0, slope_tol)
    return rep


# ---------------------------------------------------------------------------
# experiments

def sufficiency_check(pairs, dictionary, rule="trapezoid", tol=1e-8, seed=None) -> ExperimentReport:
    """max over pairs and harmonic pairs of |double_identity| / identity_scale."""
    rep = ExperimentReport("lincal-sufficiency", params={"n_pairs": len(pairs),
                                                          "n_harmonic_pairs": len(dictionary)},
                           seed=seed)
    Cs = [build_obstruction(p) for p in pairs]
    grid = Cs[0].grid
    x = grid.coords()
    cmax = [C.max_abs() for C in Cs]
    worst = 0.0
    for u1, u2 in dictionary:
        g1, g2 = u1.grad(x), u2.grad(x)
        prod = np.einsum("j...,k...->jk...", g1, g2)
        gn = (np.max(np.sqrt(np.sum(np.abs(g1) ** 2, axis=0)))
              * np.max(np.sqrt(np.sum(np.abs(g2) ** 2, axis=0))) * grid.volume)
        for C, cm in zip(Cs, cmax):
            val = integrate_array(np.sum(C.values * prod, axis=(0, 1)), grid, rule)
            worst = max(worst, abs(val) / (cm * gn))
    rep.check_le("max_relative_identity", worst, tol)
    return rep


def roundtrip_convergence(make_pair, resolutions, method="fd2", order=2.0, order_tol=0.1, seed=None) -> ExperimentReport:
    """decompose(build_obstruction(v, a)) against the planted pair under refinement.

    ``make_pair(n)`` builds the planted pair on an n-point grid; the
    decomposition differentiates C with ``method``, so the error should fall
    at that method's order.
    """
    rep = ExperimentReport("lincal-roundtrip", params={"resolutions": list(resolutions),
                                                       "method": method}, seed=seed)
    hs, ev, eb, rows = [], [], [], []
    for n in resolutions:
        pair = make_pair(n)
        C = build_obstruction(pair)
        dec = decompose(C, method)
        e_v = float(np.max(np.abs(dec.v.values - pair.v.values)))
        e_b = dec.B_residual.max_abs()
        e_a = float(np.max(np.abs(dec.a.values - 0.5 * (C.values - np.swapaxes(C.values, 0, 1)))))
        h = pair.v.grid.spacing[0]
        hs.append(h)
        ev.append(e_v)
        eb.append(e_b)
        rows.append([n, h, e_v, e_b, e_a])
        rep.check_le(f"antisym_exact_n{n}", e_a, 0.0)
    sv, _ = fit_slope(hs[::-1], ev[::-1])
    sb, _ = fit_slope(hs[::-1], eb[::-1])
    rep.check_close("v_error_h_slope", sv, order, order_tol)
    rep.check_close("B_residual_h_slope", sb, order, order_tol)
    rep.add_table("roundtrip", ["n", "h", "v_error", "B_residual", "a_error"], rows)
    return rep


def non_obstruction_floor(make_C, resolutions, method="fd2", floor=None, seed=None) -> ExperimentReport:
    """B_residual of a tensor outside the obstruction class stays away from 0."""
    rep = ExperimentReport("lincal-non-obstruction", params={"resolutions": list(resolutions)},
                           seed=seed)
    vals = []
    for n in resolutions:
        vals.append(decompose(make_C(n), method).B_residual.max_abs())
    floor = 0.5 * vals[0] if floor is None else floor
    rep.add_table("floor", ["n", "B_residual"], [[n, b] for n, b in zip(resolutions, vals)])
    rep.add("B_residual_min", min(vals), f">= {floor:.6g}", min(vals) >= floor)
    return rep
