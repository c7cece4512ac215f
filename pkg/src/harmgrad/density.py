"""Three-gradient integral identities and the tools that peel a 3-tensor
apart: symmetrisations, the vector structure ``b_j d_kl - b_k d_jl``,
Fourier recovery of ``b`` from Calderon exponentials, and the two moment
identities used to undo the ``(x1 - i eps)`` weights."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np
from scipy import integrate as sint

from .errors import ConditioningError, PreconditionError, SeriesDivergenceError
from .fields import Field, Grid, collar_mask, integrate_array
from .harmonic import HarmonicFn, calderon_pair, calderon_wave, harmonic_polynomials
from .jets import Jet
from .report import ExperimentReport

COLLAR = 3


def levi_civita(dim=3):
    eps = np.zeros((dim,) * 3)
    if dim != 3:
        raise PreconditionError("Levi-Civita symbol implemented for dim = 3")
    for p in itertools.permutations(range(3)):
        inv = sum(1 for a in range(3) for b in range(a + 1, 3) if p[a] > p[b])
        eps[p] = -1.0 if inv % 2 else 1.0
    return eps


def _check_support(T: Field, collar=COLLAR):
    mask = collar_mask(T.grid, collar)
    edge = np.max(np.abs(T.values[..., mask])) if mask.any() else 0.0
    if edge > 1e-14 * max(1.0, T.max_abs()):
        raise PreconditionError("tensor is not supported inside the grid interior")


def contract3(B: np.ndarray, g1, g2, g3):
    return np.einsum("jkl...,j...,k...,l...->...", B, g1, g2, g3, optimize=True)


def triple_identity(B: Field, u1: HarmonicFn, u2: HarmonicFn, u3: HarmonicFn,
                    rule="simpson", check_support=True) -> complex:
    """Quadrature of sum_jkl B_jkl d_j u1 d_k u2 d_l u3 with exact gradients."""
    if B.rank != 3:
        raise PreconditionError("B must be a rank-3 tensor field")
    if check_support:
        _check_support(B)
    x = B.grid.coords()
    integrand = contract3(B.values, u1.grad(x), u2.grad(x), u3.grad(x))
    return complex(integrate_array(integrand, B.grid, rule))


def symmetry_reduce(B: Field, mode: str) -> Field:
    """``"last-two-sym"``: (B_jkl + B_jlk)/2; ``"first-two-sym"``: (B_jkl + B_kjl)/2;
    ``"cyclic"``: (B_jkl + B_klj + B_ljk)/3."""
    V = B.values
    if mode == "last-two-sym":
        out = 0.5 * (V + np.swapaxes(V, 1, 2))
    elif mode == "first-two-sym":
        out = 0.5 * (V + np.swapaxes(V, 0, 1))
    elif mode == "cyclic":
        # B_klj as a function of (j,k,l) is V transposed by (2,0,1)
        nd = V.ndim
        rest = tuple(range(3, nd))
        out = (V + np.transpose(V, (1, 2, 0) + rest) + np.transpose(V, (2, 0, 1) + rest)) / 3.0
    else:
        raise PreconditionError(f"unknown symmetry mode {mode!r}")
    return Field(B.grid, out, 3)


def structure_tensor(b: np.ndarray):
    """B_jkl = b_j delta_kl - b_k delta_jl from b of shape (dim, ...)."""
    dim = b.shape[0]
    eye = np.eye(dim)
    return (np.einsum("j...,kl->jkl...", b, eye) - np.einsum("k...,jl->jkl...", b, eye))


@dataclass
class StructureFit:
    b: Field
    residual: float


def structure_fit(B: Field) -> StructureFit:
    """b_j = mean over k != j of B_jkk; residual = max|B - structure(b)|."""
    V = B.values
    dim = B.grid.dim
    b = np.stack([np.mean([V[j, k, k] for k in range(dim) if k != j], axis=0) for j in range(dim)])
    res = float(np.max(np.abs(V - structure_tensor(b))))
    return StructureFit(Field(B.grid, b, 1), res)


# ---------------------------------------------------------------------------
# Calderon recovery

def _orthonormal_complement(xi):
    xi = np.asarray(xi, dtype=float)
    u = xi / np.linalg.norm(xi)
    # QR of [u | I] gives an orthonormal basis whose first column is +-u
    q, _ = np.linalg.qr(np.column_stack([u, np.eye(len(u))]))
    return [q[:, i] for i in range(1, len(u))]


def calderon_factor(pair) -> complex:
    """Value of (structure of b): zeta+ (x) zeta- (x) zeta+ per unit (b . zeta+).

    Equals |xi|^2 / 2 because zeta+ . zeta+ = 0 and zeta+ . zeta- = |xi|^2 / 2.
    """
    zp, zm = pair.zeta_plus, pair.zeta_minus
    dim = len(zp)
    vals = []
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = 1.0
        S = structure_tensor(e)
        got = np.einsum("jkl,j,k,l->", S, zp, zm, zp)
        if abs(zp[j]) > 1e-12:
            vals.append(got / zp[j])
        elif abs(got) > 1e-12:
            raise ConditioningError("structure contraction inconsistent")
    f = np.mean(vals)
    expected = 0.5 * float(pair.xi @ pair.xi)
    if abs(f - expected) > 1e-12 * max(1.0, expected):
        raise ConditioningError("Calderon contraction factor differs from |xi|^2/2")
    return complex(f)


@dataclass
class RecoveredB:
    xi: np.ndarray           # (n_samples, dim) sampled xi
    freq: np.ndarray         # (n_samples, dim) frequencies eta = -2 xi
    b_hat: np.ndarray        # (n_samples, dim) recovered b-hat(eta)
    b_dot_xi: np.ndarray     # (n_samples,)
    b_dot_nu: np.ndarray     # (n_samples, dim - 1)


def calderon_recover_b(B: Field, xi_samples, rule="trapezoid", structure_tol=1e-10) -> RecoveredB:
    """Recover b-hat(-2 xi) = int b(x) e^{2 i xi.x} dx from triple identities.

    For each xi and each unit nu orthogonal to xi, with u1 = u3 = e^{i zeta+ x},
    u2 = e^{2 i zeta- x} (and + <-> -),
        T_+- = -i |xi|^2 b-hat(-2 xi) . zeta_+-,
    so b-hat . xi = i (T+ + T-)/|xi|^2 and b-hat . nu = (T+ - T-)/|xi|^3.
    """
    fit = structure_fit(B)
    if fit.residual > structure_tol * max(1.0, B.max_abs()):
        raise PreconditionError(f"B lacks the b-structure (residual {fit.residual:.3g})")
    _check_support(B)
    xs = np.atleast_2d(np.asarray(xi_samples, dtype=float))
    dim = B.grid.dim
    bh, bx, bn = [], [], []
    for xi in xs:
        n = np.linalg.norm(xi)
        if n < 1e-8:
            raise ConditioningError("|xi| too small for the Calderon recovery")
        nus = _orthonormal_complement(xi)
        dots_nu = []
        dot_xi = None
        for nu in nus:
            pair = calderon_pair(xi, nu)
            fac = calderon_factor(pair)
            Tp = triple_identity(B, calderon_wave(pair.zeta_plus), calderon_wave(2 * pair.zeta_minus),
                                 calderon_wave(pair.zeta_plus), rule=rule, check_support=False)
            Tm = triple_identity(B, calderon_wave(pair.zeta_minus), calderon_wave(2 * pair.zeta_plus),
                                 calderon_wave(pair.zeta_minus), rule=rule, check_support=False)
            # -2i from the gradients' (i)(2i)(i) times the factor |xi|^2/2
            const = -2j * fac
            assert abs(const - (-1j * n**2)) <= 1e-12 * n**2
            dxi = (Tp + Tm) / const
            dnu = (Tp - Tm) / (const * 1j * n)
            dot_xi = dxi if dot_xi is None else dot_xi
            dots_nu.append(dnu)
        vec = dot_xi * xi / n**2 + sum(d * nu for d, nu in zip(dots_nu, nus))
        bh.append(vec)
        bx.append(dot_xi)
        bn.append(dots_nu)
    return RecoveredB(xs, -2 * xs, np.array(bh), np.array(bx), np.array(bn).reshape(len(xs), dim - 1))


def fft_oracle(b: Field, freqs):
    """Torus DFT of a compactly supported vector field at grid frequencies.

    Returns int b(x) e^{-i eta . x} dx for each eta in ``freqs`` (which must
    be integer multiples of 2 pi / L per axis).
    """
    g = b.grid
    core = b.values[(slice(None),) + tuple(slice(0, n - 1) for n in g.resolution)]
    F = np.fft.fftn(core, axes=tuple(range(1, g.dim + 1)))
    out = []
    for eta in np.atleast_2d(freqs):
        idx = []
        for a in range(g.dim):
            L = g.lengths[a]
            k = eta[a] * L / (2 * np.pi)
            ki = int(round(k))
            if abs(k - ki) > 1e-9:
                raise PreconditionError("frequency is not on the torus lattice")
            idx.append(ki % (g.resolution[a] - 1))
        shift = np.exp(-1j * sum(eta[a] * g.extents[a][0] for a in range(g.dim)))
        out.append(F[(slice(None),) + tuple(idx)] * shift * np.prod(g.spacing))
    return np.array(out)


def lattice_xis(grid: Grid, kmax=3, limit=None, seed=0):
    """xi values with eta = -2 xi on the torus lattice, |k|_inf <= kmax, k != 0."""
    rng = np.random.default_rng(seed)
    ks = [k for k in itertools.product(range(-kmax, kmax + 1), repeat=grid.dim) if any(k)]
    if limit is not None and limit < len(ks):
        ks = [ks[i] for i in rng.choice(len(ks), size=limit, replace=False)]
    return np.array([[-np.pi * k[a] / grid.lengths[a] for a in range(grid.dim)] for k in ks])


# ---------------------------------------------------------------------------
# moment identities

def jacobi_moment_coeffs(jmax: int, exact=False):
    """Taylor coefficients of (1-z)^{-3/2} [5 (1-z)^{-1} + (1+z)^{-1}] as the sum

        c_j = sum_{l<=j} [5 + (-1)^{j-l}] (2l+1)!! / (2^l l!),

    accumulated in exact rational arithmetic.
    """
    if jmax > 200:
        raise PreconditionError("jmax above 200 not supported")
    w = [Fraction(1)]
    for l in range(1, jmax + 1):
        w.append(w[-1] * Fraction(2 * l + 1, 2 * l))
    out = []
    for j in range(jmax + 1):
        out.append(sum((5 + (-1) ** (j - l)) * w[l] for l in range(j + 1)))
    return out if exact else [float(c) for c in out]


def binomial_jet(alpha, sign, order):
    """Jet of (1 + sign*z)^alpha."""
    c = [1.0]
    for n in range(order):
        c.append(c[-1] * (alpha - n) / (n + 1) * sign)
    return Jet(c)


def jacobi_generating_jet(order):
    a = binomial_jet(-1.5, -1, order)
    return a * (5.0 * binomial_jet(-1.0, -1, order) + binomial_jet(-1.0, 1, order))


def _rising(mu, k):
    out = 1.0
    for i in range(k):
        out *= mu + i
    return out


def _branch_power(t, s):
    """(t - i0)^s: principal power with arg(t) = -pi for t < 0."""
    t = np.asarray(t, dtype=float)
    return np.abs(t) ** s * np.exp(-1j * np.pi * s * (t < 0))


def _cquad(fn, a, b):
    val, err = sint.quad(fn, a, b, complex_func=True, epsabs=1e-14, epsrel=1e-13, limit=200)
    return complex(val)


def moment_series_coeffs(f, interval, mu, n_terms):
    """a_k = mu(mu+1)..(mu+k-1)/k! * int f(t) (t - i0)^{-mu-k} dt."""
    a, b = interval
    return [(_rising(mu, k) / factorial(k)) * _cquad(lambda t: f(t) * _branch_power(t, -mu - k), a, b)
            for k in range(n_terms)]


def weighted_moment_expand(f, interval, mu, eps_list, n_terms=10, tol=None,
                           seed=None) -> ExperimentReport:
    """Compare int_I f (t - i eps)^{-mu} dt with its power series in eps."""
    a, b = interval
    if not b > a:
        raise PreconditionError("interval must be non-degenerate")
    if a <= 0 <= b:
        raise PreconditionError("interval must not contain the origin")
    if not mu > 0:
        raise PreconditionError("mu must be positive")
    d = min(abs(a), abs(b))
    rep = ExperimentReport("weighted-moment-expand",
                           params={"interval": [a, b], "mu": mu, "eps_list": list(eps_list),
                                   "n_terms": n_terms}, seed=seed)
    coeffs = moment_series_coeffs(f, interval, mu, n_terms)
    absint = _cquad(lambda t: np.abs(f(t)) * np.abs(t) ** (-mu), a, b).real
    rows = []
    for eps in eps_list:
        if eps >= d:
            raise SeriesDivergenceError(f"eps={eps} reaches dist(0, I)={d}; the series diverges")
        direct = _cquad(lambda t: f(t) * (t - 1j * eps) ** (-mu), a, b)
        series = sum((1j * eps) ** k * c for k, c in enumerate(coeffs))
        r = eps / d
        partial = sum(_rising(mu, k) / factorial(k) * r**k for k in range(n_terms))
        tail = absint * max((1.0 - r) ** (-mu) - partial, 0.0)
        gap = abs(direct - series)
        rep.check_le(f"gap_eps_{eps:g}", gap, max(tail, 0.0) + 1e-12)
        if tol is not None:
            rep.check_le(f"agree_eps_{eps:g}", gap, tol)
        rows.append([eps, direct, series, gap, tail])
    rep.add_table("moment_series", ["eps", "direct", "series", "gap", "tail_bound"], rows)
    return rep


# ---------------------------------------------------------------------------
# empirical density evidence

def dictionary_projection(target: Field, degrees=(1, 2), waves=0, seed=0) -> ExperimentReport:
    """Least-squares fit of a 3-tensor field by triple gradient products.

    Dictionaries are all triples drawn from harmonic polynomials of degree
    <= d (plus optional random Calderon waves).  The relative L2 residual
    should shrink as the dictionary grows; this is evidence, not proof.
    """
    g = target.grid
    x = g.coords()
    rng = np.random.default_rng(seed)
    rep = ExperimentReport("dictionary-projection", params={"degrees": list(degrees), "waves": waves},
                           seed=seed)
    y = target.values.reshape(-1)
    norm = np.linalg.norm(y)
    prev = np.inf
    rows = []
    for d in degrees:
        fns = [h for h in harmonic_polynomials(d, g.dim) if not h.descriptor.startswith("kind=const")]
        for _ in range(waves):
            xi = rng.normal(size=g.dim)
            nu = _orthonormal_complement(xi)[0]
            fns.append(calderon_wave(calderon_pair(xi, nu).zeta_plus))
        grads = [np.broadcast_to(f.grad(x), (g.dim,) + g.resolution) for f in fns]
        cols = [np.einsum("j...,k...,l...->jkl...", a, b, c).reshape(-1)
                for a, b, c in itertools.product(grads, repeat=3)]
        A = np.stack(cols, axis=1)
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        res = np.linalg.norm(A @ coef - y) / norm
        rows.append([d, len(cols), res])
        rep.check_le(f"residual_nonincreasing_deg{d}", res, prev + 1e-12)
        prev = res
    rep.add_table("projection", ["degree", "dictionary_size", "relative_residual"], rows)
    return rep
