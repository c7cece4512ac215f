"""One-dimensional stationary phase: the operators L_j, their closed forms on
the quasi-mode phase, and an adaptive quadrature oracle for the integral."""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import ConsistencyError, PreconditionError, QuadratureError, TruncationError
from .harness.fitting import fit_slope
from .jets import Jet
from .report import ExperimentReport


def required_order(j):
    """Jet length needed by L_j: the sum reaches d^{6j}(G^{2j} U)(0)."""
    return 6 * j


def lj_general(F: Jet, U: Jet, j: int) -> complex:
    """L_j U for phase F with a nondegenerate critical point at 0.

    L_j U = sum over nu - mu = j, 2 nu >= 3 mu of
        i^-j / (nu! mu!) * (-1 / (2 F''(0)))^nu * d^{2nu}(G^mu U)(0),
    with G(t) = F(t) - F(0) - F''(0) t^2 / 2.
    """
    scale = max(1.0, float(np.max(np.abs(F.coeffs[:3]))))
    if abs(F.coeffs[1]) > 1e-12 * scale:
        raise PreconditionError("F'(0) must vanish")
    f2 = 2.0 * F.coeffs[2]
    if abs(f2) <= 1e-12 * scale:
        raise PreconditionError("F''(0) must be nonzero")
    need = required_order(j)
    have = min(F.order, U.order)
    if have < need:
        raise TruncationError(f"L_{j} needs jets of order {need}, got {have}", need)
    n = max(need, 0)
    G = Jet(F.coeffs, n)
    G.coeffs[:3] = 0.0
    U = Jet(U.coeffs, n)
    c = -1.0 / (2.0 * f2)
    total = 0.0 + 0.0j
    for mu in range(0, 2 * j + 1):
        nu = j + mu
        if 2 * nu < 3 * mu:
            continue
        GmU = (G ** mu) * U
        total += c**nu / (factorial(nu) * factorial(mu)) * factorial(2 * nu) * GmU.coeffs[2 * nu]
    return complex((1j) ** (-j) * total)


# ---------------------------------------------------------------------------
# the quasi-mode phase

@dataclass(frozen=True)
class PhaseProfile:
    F1_jet: Jet
    F2_jet: Jet
    x1: float
    eps: float

    def __post_init__(self):
        r = self.x1**2 + self.eps**2
        target = 4j * self.eps / r
        got = 2.0 * self.F2_jet.coeffs[2]
        if abs(self.F2_jet.coeffs[0]) > 1e-12 or abs(self.F2_jet.coeffs[1]) > 1e-12:
            raise ConsistencyError("F2 must start at order two")
        if abs(got - target) > 1e-12 * abs(target):
            raise ConsistencyError("F2''(0) differs from 4 i eps / (x1^2 + eps^2)")


def phase_profile(x1, eps, order=12, phase=None) -> PhaseProfile:
    """F1, F2 jets in x2 at fixed x1.

    Without ``phase`` the two leading even coefficients of each are used
    (the expansion with vanishing free constants).  With a
    :class:`~harmgrad.quasimode.PhaseHierarchy` the jets are read off the
    full phase: at sigma = 0, F2 = 4 i Im Psi and F1 = 4 i Re(Psi - x1).
    """
    if phase is None:
        r = x1**2 + eps**2
        f2 = np.zeros(order + 1, dtype=complex)
        f1 = np.zeros(order + 1, dtype=complex)
        f2[2] = 2j * eps / r
        f2[4] = 0.5j * (eps**3 - 3 * x1**2 * eps) / r**3
        f1[2] = 2j * x1 / r
        f1[4] = -0.5j * (x1**3 - 3 * x1 * eps**2) / r**3
        return PhaseProfile(Jet(f1), Jet(f2), x1, eps)
    c = phase.coeffs(np.asarray(float(x1)))
    c = np.asarray(c, dtype=complex).ravel()
    f2 = 4j * np.imag(c)
    f1 = 4j * np.real(c)
    f1[0] = 0.0  # Re(Psi - x1): remove psi_0 = x1
    return PhaseProfile(Jet(f1, order), Jet(f2, order), x1, eps)


def lj_specialized(U: Jet, x1: float, eps: float, j: int, variant: str = "consistent") -> complex:
    """Closed forms of L_0, L_1, L_2 for F = F2 (two-term expansion).

    ``variant="printed"`` uses the coefficients 1/8 in L_1 and
    (x1^2 + eps)^2 in L_2 as they are commonly quoted; ``"consistent"``
    uses 3/4 and (x1^2 + eps^2)^2, which are what the general formula
    produces.
    """
    if not eps > 0:
        raise PreconditionError("eps must be positive")
    if j not in (0, 1, 2):
        raise PreconditionError("closed forms exist for j = 0, 1, 2")
    if variant not in ("consistent", "printed"):
        raise PreconditionError(f"unknown variant {variant!r}")
    r = x1**2 + eps**2
    s = 3 * x1**2 - eps**2
    u0 = U.derivative_at_zero(0)
    if j == 0:
        return complex(u0)
    u2 = U.derivative_at_zero(2)
    if j == 1:
        k = 0.75 if variant == "consistent" else 0.125
        return complex((r * u2 + k * s / r * u0) / (8 * eps))
    u4 = U.derivative_at_zero(4)
    quart = r**2 if variant == "consistent" else (x1**2 + eps) ** 2
    return complex((quart * u4 + 7.5 * s * u2 + 105.0 / 16.0 * s**2 / r**2 * u0) / (128 * eps**2))


def hormander_prefactor(x1: float, eps: float, lam: float) -> complex:
    """(2 pi i / (lam F2''(0)))^(1/2), checked against (pi r / (2 lam eps))^(1/2)."""
    if not (eps > 0 and lam > 0):
        raise PreconditionError("eps and lambda must be positive")
    r = x1**2 + eps**2
    general = np.sqrt(2j * np.pi / (lam * 4j * eps / r))
    closed = np.sqrt(np.pi * r / (2 * lam * eps))
    if abs(general - closed) > 1e-12 * abs(closed):
        raise ConsistencyError("prefactor forms disagree")
    return complex(general)


def expansion(F: Jet, U: Jet, lam: float, k: int) -> complex:
    """e^{i lam F(0)} (2 pi i / (lam F''(0)))^(1/2) sum_{j<k} lam^-j L_j U."""
    f2 = 2.0 * F.coeffs[2]
    pref = np.exp(1j * lam * F.coeffs[0]) * np.sqrt(2j * np.pi / (lam * f2))
    return complex(pref * sum(lam ** (-j) * lj_general(F, U, j) for j in range(k)))


# ---------------------------------------------------------------------------
# quadrature oracle

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _composite_gl(f, a, b, panels):
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    t = mid + half * _GL_NODES[None, :]
    return complex(np.sum(f(t) * _GL_WEIGHTS[None, :] * half))


def oscillatory_quadrature(F, U, lam, interval, tol=1e-12, max_levels=14, min_panels=8):
    """Integral of exp(i lam F(t)) U(t) over ``interval``.

    Composite 20-point Gauss-Legendre with the panel count doubled until two
    successive values differ by less than ``tol``.
    """
    if lam < 1:
        raise PreconditionError("lambda must be at least 1")
    a, b = interval

    def f(t):
        return np.exp(1j * lam * F(t)) * U(t)

    prev = _composite_gl(f, a, b, min_panels)
    panels = min_panels
    err = np.inf
    for _ in range(max_levels):
        panels *= 2
        cur = _composite_gl(f, a, b, panels)
        err = abs(cur - prev)
        if err < tol:
            return cur
        prev = cur
    raise QuadratureError(f"quadrature did not stabilise (last change {err:.3g})", err)


# ---------------------------------------------------------------------------
# convergence experiment

def expansion_error_sweep(F_fn, F_jet: Jet, U_fn, U_jet: Jet, lambdas, ks=(1, 2, 3),
                          interval=(-1.0, 1.0), name="stationary-phase", seed=None,
                          slope_tol=0.3) -> ExperimentReport:
    """Relative error |I - expansion_k| / |prefactor| against lambda.

    The error must fall like lambda^-k; the metric records the fitted slope.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    rep = ExperimentReport(name, params={"lambdas": lambdas.tolist(), "ks": list(ks),
                                         "interval": list(interval)}, seed=seed)
    quad = np.array([oscillatory_quadrature(F_fn, U_fn, lam, interval, tol=1e-15 + 1e-13 / lam**0.5)
                     for lam in lambdas])
    f2 = 2.0 * F_jet.coeffs[2]
    pref = np.abs(np.sqrt(2j * np.pi / (lambdas * f2)))
    rows = []
    for k in ks:
        exp_vals = np.array([expansion(F_jet, U_jet, lam, k) for lam in lambdas])
        err = np.abs(quad - exp_vals) / pref
        slope, _ = fit_slope(lambdas, err)
        rep.check_le(f"k{k}_lambda_slope", slope, -k + slope_tol)
        rows.extend([lam, k, q, e, er, slope] for lam, q, e, er in zip(lambdas, quad, exp_vals, err))
    rep.add_table("convergence", ["lambda", "k", "quad_value", "expansion_value", "error",
                                  "fitted_slope"], rows)
    return rep
