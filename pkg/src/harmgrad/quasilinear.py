"""Coupled quasilinear system with quadratic gradient nonlinearity.

For J = 1, 2 and compactly supported 3-tensors A^{JK}, the forward problem is

    Delta u^J + sum_j d_j Q^J_j(u) = 0,   u^J = eps f^J on the boundary,
    Q^J_j(u) = sum_K A^{JK}_{jkl} d_k u^J d_l u^K,

solved as the fixed point u^J = eps v0^J - G0(div Q^J(u)), with v0^J the
harmonic extension of f^J and G0 the Dirichlet inverse Laplacian.  Writing
u = eps v0 + c, the correction c has zero boundary values, so every
derivative is spectral: c is a sine series and Q is compactly supported.

The boundary flux paired with a harmonic w is, by the divergence theorem,

    <n . grad u^J, w> = int grad u^J . grad w + int Q^J(u) . grad w,

whose eps^2 coefficient is sum_K int A^{JK} : grad w (x) grad v0^J (x) grad v0^K.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .density import levi_civita, triple_identity
from .errors import PreconditionError, ResolutionError, SmallnessViolatedError
from .fields import Field, Grid, collar_mask, dirichlet_solve, integrate_array, partial
from .harmonic import HarmonicFn, constant, coordinate
from .harness.fitting import fit_slope
from .profiles import GaussianBump
from .report import ExperimentReport

COLLAR = 3
DEFAULT_EPS = (1e-2, 7.5e-3, 5e-3, 2.5e-3)


@dataclass(frozen=True)
class CoupledTensors:
    """A[J][K] for J, K in {0, 1} (the components 1 and 2)."""
    A: tuple

    def __post_init__(self):
        A = tuple(tuple(row) for row in self.A)
        object.__setattr__(self, "A", A)
        if len(A) != 2 or any(len(r) != 2 for r in A):
            raise PreconditionError("A must be a 2 x 2 table of tensor fields")
        grid = A[0][0].grid
        for J in range(2):
            for K in range(2):
                T = A[J][K]
                if T.rank != 3 or T.grid != grid:
                    raise PreconditionError("every A^{JK} must be a rank-3 field on one grid")
                mask = collar_mask(grid, COLLAR)
                if np.any(T.values[..., mask] != 0):
                    raise PreconditionError("A^{JK} must vanish on the boundary collar")
        for J in range(2):
            V = A[J][J].values
            if np.max(np.abs(V - np.swapaxes(V, 1, 2))) > 1e-14 * max(1.0, np.max(np.abs(V))):
                raise PreconditionError("diagonal tensors must be symmetric in the last two indices")
        nz = np.zeros(grid.resolution, dtype=bool)
        for row in A:
            for T in row:
                nz |= np.any(T.values != 0, axis=(0, 1, 2))
        box = []
        for a in range(grid.dim):
            hit = np.flatnonzero(np.any(nz, axis=tuple(b for b in range(grid.dim) if b != a)))
            box.append(slice(hit[0], hit[-1] + 1) if hit.size else slice(0, 0))
        object.__setattr__(self, "_support", tuple(box))
        sub = (slice(None),) * 3 + tuple(box)
        blocks = []
        for row in A:
            brow = []
            for T in row:
                V = T.values[sub].reshape((grid.dim, grid.dim**2) + T.values[sub].shape[3:])
                brow.append(np.ascontiguousarray(V.real) if not np.any(V.imag) else V)
            blocks.append(tuple(brow))
        object.__setattr__(self, "_blocks", tuple(blocks))

    @property
    def grid(self) -> Grid:
        return self.A[0][0].grid

    @classmethod
    def zeros(cls, grid):
        z = Field.zeros(grid, 3)
        return cls(((z, z), (z, z)))

    def replace(self, J, K, T):
        rows = [list(r) for r in self.A]
        rows[J][K] = T
        return CoupledTensors(tuple(tuple(r) for r in rows))


@dataclass(frozen=True)
class BoundaryData:
    """Boundary values given by their harmonic extensions v0^1, v0^2."""
    f1: HarmonicFn
    f2: HarmonicFn

    def __post_init__(self):
        if self.f1.dim != self.f2.dim:
            raise PreconditionError("boundary data of different dimensions")

    def __iter__(self):
        return iter((self.f1, self.f2))


@dataclass
class ForwardSolution:
    u: tuple                 # (u1, u2) Fields
    correction: tuple        # (c1, c2) with zero boundary values
    residuals: list          # relative H1 increments per iteration
    epsilon: float
    ratio: float             # geometric convergence ratio estimate
    grad_u: tuple = field(repr=False, default=None)


def _h1(grad_vals, grid):
    return float(np.sqrt(integrate_array(np.sum(np.abs(grad_vals) ** 2, axis=0), grid, "trapezoid").real))


def _grad(values, grid, method):
    return np.stack([partial(values, grid, a, 1, method) for a in range(grid.dim)])


def _real_if_possible(arrays, A):
    """Drop a vanishing imaginary part when A is real too (halves the FFT work)."""
    if all(np.isrealobj(b) for row in A._blocks for b in row) and not any(np.any(np.imag(a)) for a in arrays):
        return [np.ascontiguousarray(np.real(a)) for a in arrays]
    return [np.asarray(a, dtype=complex) for a in arrays]


def flux(A: CoupledTensors, grads, J):
    """Q^J_j = sum_K A^{JK}_{jkl} d_k u^J d_l u^K, computed on the support box of A."""
    g = A.grid
    d = g.dim
    box = (slice(None),) + A._support
    gJ = grads[J][box]
    sub = gJ.shape[1:]
    dtype = np.result_type(gJ.dtype, grads[1 - J].dtype, *(b.dtype for b in A._blocks[J]))
    out = np.zeros((d,) + g.resolution, dtype=dtype)
    acc = np.zeros((d,) + sub, dtype=dtype)
    for K in range(2):
        P = (gJ[:, None] * grads[K][box][None, :]).reshape(d * d, *sub)
        T = A._blocks[J][K]
        if np.isrealobj(T) and np.isrealobj(P):
            for j in range(d):
                acc[j] += np.einsum("m...,m...->...", T[j], P)
        elif np.isrealobj(T):
            Pr, Pi = np.ascontiguousarray(P.real), np.ascontiguousarray(P.imag)
            for j in range(d):
                acc[j] += np.einsum("m...,m...->...", T[j], Pr) + 1j * np.einsum("m...,m...->...", T[j], Pi)
        else:
            for j in range(d):
                acc[j] += np.einsum("m...,m...->...", T[j], P)
    out[box] = acc
    return out


def nonlinearity(A: CoupledTensors, grads, J):
    g = A.grid
    Q = flux(A, grads, J)
    return sum(partial(Q[j], g, j, 1, "periodic") for j in range(g.dim))


def solve_forward(A: CoupledTensors, data: BoundaryData, epsilon: float, tol=1e-13,
                  max_iter=200) -> ForwardSolution:
    """Fixed-point iteration for u = eps v0 - G0(div Q(u)).

    ``tol`` bounds the H1 norm of the last increment relative to that of
    eps v0.  Three consecutive growing increments raise
    :class:`SmallnessViolatedError`; stagnation above ``tol`` raises
    :class:`ResolutionError`.
    """
    g = A.grid
    x = g.coords()
    shape = (g.dim,) + g.resolution
    gv0 = _real_if_possible([np.broadcast_to(f.grad(x), shape) * epsilon for f in data], A)
    scale = max(_h1(gv0[0], g), _h1(gv0[1], g), np.finfo(float).tiny)
    c = [np.zeros(g.resolution, dtype=gv0[0].dtype) for _ in range(2)]
    gc = [np.zeros(shape, dtype=gv0[0].dtype) for _ in range(2)]
    res = []
    grow = stall = 0
    for it in range(max_iter):
        grads = [gv0[J] + gc[J] for J in range(2)]
        new = [-dirichlet_solve(nonlinearity(A, grads, J), g) for J in range(2)]
        gnew = [_grad(new[J], g, "sine") for J in range(2)]
        r = max(_h1(gnew[J] - gc[J], g) for J in range(2)) / scale
        c, gc = new, gnew
        res.append(r)
        if r <= tol:
            break
        if len(res) >= 2:
            grow = grow + 1 if res[-1] > res[-2] else 0
            stall = stall + 1 if res[-1] > 0.9 * res[-2] else 0
            if grow >= 3:
                raise SmallnessViolatedError(f"iteration diverges at eps={epsilon}",
                                             res[-1] / res[-2])
            if stall >= 3:
                raise ResolutionError(f"increments stagnate at {r:.3g} above tol={tol:.3g}")
    else:
        raise ResolutionError(f"no convergence to tol={tol:.3g} in {max_iter} iterations")
    pos = [a / b for a, b in zip(res[1:], res[:-1]) if b > 0 and a > 0]
    ratio = float(np.exp(np.mean(np.log(pos)))) if pos else 0.0
    v0 = [np.broadcast_to(f.value(x), g.resolution) * epsilon for f in data]
    u = tuple(Field(g, v0[J] + c[J]) for J in range(2))
    return ForwardSolution(u, tuple(Field(g, cj) for cj in c), res, epsilon, ratio,
                           grad_u=tuple(gv0[J] + gc[J] for J in range(2)))


def pde_residual(A: CoupledTensors, sol: ForwardSolution, collar=COLLAR):
    """max over the interior of |Delta u^J + div Q^J(u)| (harmonic part exact)."""
    g = A.grid
    core = tuple(slice(collar, n - collar) for n in g.resolution)
    out = 0.0
    for J in range(2):
        lap = sum(partial(sol.correction[J].values, g, a, 2, "sine") for a in range(g.dim))
        r = lap + nonlinearity(A, sol.grad_u, J)
        out = max(out, float(np.max(np.abs(r[core]))))
    return out


def first_corrector(A: CoupledTensors, data: BoundaryData):
    """v1^J = -G0(div Q^J(v0))."""
    g = A.grid
    x = g.coords()
    shape = (g.dim,) + g.resolution
    gv0 = _real_if_possible([np.broadcast_to(f.grad(x), shape) for f in data], A)
    return tuple(Field(g, -dirichlet_solve(nonlinearity(A, gv0, J), g)) for J in range(2))


def dtn_pair(A: CoupledTensors, data: BoundaryData, epsilon: float, w: HarmonicFn, sol=None,
             tol=1e-13):
    """<n . grad u^J, w> for J = 1, 2 via the volume form.

    The correction c^J vanishes on the boundary and w is harmonic, so
    int grad c^J . grad w = 0 exactly; the remaining terms are
    eps int grad v0^J . grad w (Simpson) and int Q^J . grad w (trapezoid,
    spectrally accurate on the compact support of A).
    """
    g = A.grid
    sol = solve_forward(A, data, epsilon, tol) if sol is None else sol
    x = g.coords()
    gw = np.broadcast_to(w.grad(x), (g.dim,) + g.resolution)
    out = []
    for J, f in enumerate(data):
        lin = integrate_array(np.sum(f.grad(x) * gw, axis=0), g, "simpson")
        nl = integrate_array(np.sum(flux(A, sol.grad_u, J) * gw, axis=0), g, "trapezoid")
        out.append(complex(epsilon * lin + nl))
    return tuple(out)


def moment_oracle(A: CoupledTensors, data: BoundaryData, w: HarmonicFn, J: int):
    """sum_K int A^{JK} : grad w (x) grad v0^J (x) grad v0^K."""
    f = tuple(data)
    return sum(triple_identity(A.A[J][K], w, f[J], f[K]) for K in range(2))


@dataclass
class SecondLinearization:
    c2: tuple            # per component
    noise: tuple         # per component, from dropping the largest eps
    c1: tuple
    eps: tuple


def _cubic_c2(eps, vals):
    s = eps / eps.max()
    V = np.stack([s, s**2, s**3], axis=1)
    coef, *_ = np.linalg.lstsq(V, vals, rcond=None)
    return coef[1] / eps.max() ** 2, coef[0] / eps.max()


def _fit_c2(eps, vals):
    """c2, c1 and drop-largest-eps noise for one pairing series."""
    a2, a1 = _cubic_c2(eps, vals)
    if len(eps) >= 4:
        b2, _ = _cubic_c2(eps[:-1], vals[:-1])
        noise = float(abs(a2 - b2))
    else:
        noise = float("nan")
    return complex(a2), complex(a1), noise


def _check_eps(eps_list):
    eps = np.asarray(sorted(eps_list), dtype=float)
    if len(eps) < 3:
        raise PreconditionError("second linearization needs at least 3 eps values")
    if len(eps) < 4:
        warnings.warn("with 3 eps values the fit is exact and no noise estimate exists")
    s = eps / eps.max()
    if np.linalg.cond(np.stack([s, s**2, s**3], axis=1)) > 1e8:
        raise PreconditionError("eps values too clustered; widen the eps range")
    return eps


def second_linearization(A: CoupledTensors, data: BoundaryData, w, eps_list=DEFAULT_EPS,
                         tol=1e-13, workers=1):
    """Cubic least-squares fit of the pairing in eps; returns the eps^2 coefficients.

    ``w`` may be a single harmonic function or a list; one forward solve per
    eps serves every w.
    """
    eps = _check_eps(eps_list)
    ws = list(w) if isinstance(w, (list, tuple)) else [w]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        sols = list(ex.map(lambda e: solve_forward(A, data, e, tol), eps))
    out = []
    for wi in ws:
        vals = np.array([dtn_pair(A, data, e, wi, sol=s) for e, s in zip(eps, sols)])
        fits = [_fit_c2(eps, vals[:, J]) for J in range(2)]
        out.append(SecondLinearization(tuple(f[0] for f in fits), tuple(f[2] for f in fits),
                                       tuple(f[1] for f in fits), tuple(eps.tolist())))
    return out if isinstance(w, (list, tuple)) else out[0]


# ---------------------------------------------------------------------------
# planted tensors and experiments

def bump_field(grid: Grid, width=0.2, radius=0.8, r_flat=0.6, center=None, total=None):
    """Tapered Gaussian sampled on ``grid``, optionally scaled to integral ``total``."""
    c = tuple(0.5 * (a + b) for a, b in grid.extents) if center is None else center
    vals = np.broadcast_to(GaussianBump(c, width, radius, r_flat).value(grid.coords()), grid.resolution)
    vals = np.array(vals)
    vals[collar_mask(grid, COLLAR)] = 0.0
    if total is not None:
        vals *= total / integrate_array(vals, grid, "trapezoid").real
    return vals


def planted_tensors(grid: Grid, seed=0, amplitude=1.0) -> CoupledTensors:
    """Random constant 3-tensors times a bump; diagonal ones symmetrised."""
    rng = np.random.default_rng(seed)
    b = bump_field(grid)
    rows = []
    for J in range(2):
        row = []
        for K in range(2):
            T = rng.normal(size=(grid.dim,) * 3) * amplitude
            if J == K:
                T = 0.5 * (T + np.swapaxes(T, 1, 2))
            row.append(Field(grid, np.einsum("jkl,...->jkl...", T, b), 3))
        rows.append(tuple(row))
    return CoupledTensors(tuple(rows))


def levi_civita_perturbation(grid: Grid, total=0.1):
    b = bump_field(grid, total=total)
    return Field(grid, np.einsum("jkl,...->jkl...", levi_civita(grid.dim), b), 3), b


def symmetric_perturbation(grid: Grid, total=0.1):
    """P_011 = bump (and nothing else): symmetric in the last two indices."""
    b = bump_field(grid, total=total)
    P = np.zeros((grid.dim,) * 3 + grid.resolution)
    P[0, 1, 1] = b
    return Field(grid, P, 3), b


def linear_dictionary(dim=3):
    """(w, f1, f2) triples built from coordinates, plus polarised (w, v, v) ones."""
    x = [coordinate(dim, j) for j in range(dim)]
    zero = constant(dim, 0.0)
    out = []
    for a in range(dim):
        for b in range(dim):
            for c in range(dim):
                if len({a, b, c}) == 3:
                    out.append((x[a], x[b], x[c]))
    for a in range(dim):
        for b in range(dim):
            out.append((x[a], x[b], zero))
    return out


def uniqueness_experiment(A: CoupledTensors, A_tilde: CoupledTensors, dictionary,
                          eps_list=DEFAULT_EPS, seed=None, noise_factor=10.0,
                          expect_equal=None) -> ExperimentReport:
    """Compare extracted eps^2 moments of A and A_tilde over harmonic triples.

    With ``expect_equal`` True the metric is gap <= noise; with False it is
    gap >= noise_factor * noise; by default it is inferred from whether the
    tensors coincide.
    """
    if len(dictionary) < 10:
        warnings.warn(f"dictionary has {len(dictionary)} triples (< 10); coverage is thin")
    if expect_equal is None:
        expect_equal = all(np.array_equal(A.A[J][K].values, A_tilde.A[J][K].values)
                           for J in range(2) for K in range(2))
    rep = ExperimentReport("qls-unique", params={"n_triples": len(dictionary),
                                                 "eps_list": list(eps_list),
                                                 "expect_equal": expect_equal}, seed=seed)
    groups = {}
    for i, (w, f1, f2) in enumerate(dictionary):
        groups.setdefault((f1.descriptor, f2.descriptor), (BoundaryData(f1, f2), []))[1].append((i, w))
    rows = []
    best_gap, best_noise = -1.0, 0.0
    max_noise = 0.0
    for data, items in groups.values():
        ws = [w for _, w in items]
        fa = second_linearization(A, data, ws, eps_list)
        fb = fa if A_tilde is A else second_linearization(A_tilde, data, ws, eps_list)
        for (i, w), s1, s2 in zip(items, fa, fb):
            for J in range(2):
                gap = abs(s1.c2[J] - s2.c2[J])
                noise = max(s1.noise[J], s2.noise[J])
                max_noise = max(max_noise, noise)
                rows.append([i, J + 1, w.descriptor, data.f1.descriptor, data.f2.descriptor,
                             s1.c2[J], s2.c2[J], gap, noise])
                if gap > best_gap:
                    best_gap, best_noise = gap, noise
    rows.sort(key=lambda r: (r[0], r[1]))
    rep.add_table("moments", ["triple", "J", "w", "f1", "f2", "c2_A", "c2_A_tilde", "gap", "noise"],
                  rows)
    if expect_equal:
        rep.check_le("max_gap_over_noise_equal", best_gap, max_noise)
    else:
        rep.add("max_gap", best_gap, f">= {noise_factor} x noise ({best_noise:.3g})",
                best_gap >= noise_factor * best_noise)
    return rep


def eps_order_experiment(A: CoupledTensors, data: BoundaryData, eps_list=DEFAULT_EPS, tol=1e-13,
                         seed=None) -> ExperimentReport:
    """Fitted eps-slopes of |u - eps v0| (2) and |u - eps v0 - eps^2 v1| (3) in H1."""
    g = A.grid
    v1 = first_corrector(A, data)
    gv1 = [_grad(v.values, g, "sine") for v in v1]
    eps = np.asarray(sorted(eps_list), dtype=float)
    r1, r2, rows = [], [], []
    ratios = []
    rep = ExperimentReport("qls-forward", params={"eps_list": eps.tolist(), "tol": tol,
                                                  "grid": g.to_dict()}, seed=seed)
    for e in eps:
        sol = solve_forward(A, data, e, tol)
        gc = [_grad(c.values, g, "sine") for c in sol.correction]
        a = max(_h1(gc[J], g) for J in range(2))
        b = max(_h1(gc[J] - e**2 * gv1[J], g) for J in range(2))
        r1.append(a)
        r2.append(b)
        ratios.append(sol.ratio)
        rows.append([e, a, b, len(sol.residuals), sol.ratio, pde_residual(A, sol)])
    rep.add_table("eps_sweep", ["eps", "first_order_remainder", "second_order_remainder",
                                "iterations", "ratio", "pde_residual"], rows)
    s1, _ = fit_slope(eps, r1)
    s2, _ = fit_slope(eps, r2)
    rep.check_close("first_order_eps_slope", s1, 2.0, 0.1)
    rep.check_close("second_order_eps_slope", s2, 3.0, 0.15)
    rep.check_le("max_contraction_ratio", max(ratios), 1.0)
    return rep


def c2_oracle_experiment(A: CoupledTensors, data: BoundaryData, w: HarmonicFn, eps_list=DEFAULT_EPS,
                         rel_tol=1e-3, seed=None) -> ExperimentReport:
    rep = ExperimentReport("qls-dtn", params={"eps_list": list(eps_list), "w": w.descriptor,
                                              "f1": data.f1.descriptor, "f2": data.f2.descriptor},
                           seed=seed)
    sl = second_linearization(A, data, w, eps_list)
    rows = []
    for J in range(2):
        oracle = moment_oracle(A, data, w, J)
        err = abs(sl.c2[J] - oracle) / max(abs(oracle), 1e-300)
        rows.append([J + 1, sl.c2[J], oracle, err, sl.noise[J]])
        if abs(oracle) > 0:
            rep.check_le(f"c2_relative_error_J{J + 1}", err, rel_tol)
        else:
            rep.check_le(f"c2_abs_J{J + 1}", abs(sl.c2[J]), max(sl.noise[J], 1e-12))
    rep.add_table("second_linearization", ["J", "c2", "oracle", "relative_error", "noise"], rows)
    return rep
