"""Smooth cutoffs and compactly supported bumps with closed-form derivatives.

The cutoff ``chi`` is 1 on ``|t| <= 1/2`` and 0 on ``|t| >= 1``.  It is
built from the mollified step

    S(s) = f(s) / (f(s) + f(1 - s)),   f(s) = exp(-1/s) for s > 0,

as ``chi(t) = S(2 - 2|t|)``.  The same step tapers the Gaussian bumps used
for planted fields, so every profile here is C-infinity with exact
derivatives available.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CUTOFF_PROFILE = "chi(t) = S(2 - 2|t|), S(s) = f(s)/(f(s)+f(1-s)), f(s) = exp(-1/s)"


def _f(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def _df(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    sp = s[pos]
    out[pos] = np.exp(-1.0 / sp) / sp**2
    return out


def _d2f(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    sp = s[pos]
    out[pos] = np.exp(-1.0 / sp) * (1.0 - 2.0 * sp) / sp**4
    return out


def smoothstep(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    a, b = _f(s), _f(1.0 - np.asarray(s, dtype=float))
    return a / (a + b)


def smoothstep_d1(s):
    s = np.asarray(s, dtype=float)
    a, b = _f(s), _f(1.0 - s)
    da, db = _df(s), -_df(1.0 - s)
    den = a + b
    return (da * den - a * (da + db)) / den**2


def smoothstep_d2(s):
    s = np.asarray(s, dtype=float)
    a, b = _f(s), _f(1.0 - s)
    da, db = _df(s), -_df(1.0 - s)
    dda, ddb = _d2f(s), _d2f(1.0 - s)
    den = a + b
    dden = da + db
    ddden = dda + ddb
    num = da * den - a * dden
    dnum = dda * den - a * ddden
    return (dnum * den - 2.0 * num * dden) / den**3


def cutoff(t):
    t = np.abs(np.asarray(t, dtype=float))
    return smoothstep(2.0 - 2.0 * t)


def cutoff_d1(t):
    t = np.asarray(t, dtype=float)
    return -2.0 * np.sign(t) * smoothstep_d1(2.0 - 2.0 * np.abs(t))


def cutoff_d2(t):
    t = np.asarray(t, dtype=float)
    return 4.0 * smoothstep_d2(2.0 - 2.0 * np.abs(t))


def classic_bump(r):
    """exp(1 - 1/(1 - r^2)) on |r| < 1, zero elsewhere; peak value 1."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


@dataclass(frozen=True)
class GaussianBump:
    """Tapered Gaussian ``exp(-|x-c|^2 / (2 w^2)) * taper(|x-c|)``.

    The taper is 1 for ``r <= r_flat`` and 0 for ``r >= radius``; choosing
    ``r_flat`` several widths out keeps the spectrum Gaussian to round-off
    while the support stays exactly compact.
    """

    center: tuple
    width: float
    radius: float
    r_flat: float | None = None

    @property
    def flat(self):
        return 0.75 * self.radius if self.r_flat is None else self.r_flat

    def _r(self, x):
        diff = [np.asarray(xi, dtype=float) - ci for xi, ci in zip(x, self.center)]
        r2 = sum(d * d for d in diff)
        return diff, np.sqrt(r2)

    def _taper(self, r):
        s = (self.radius - r) / (self.radius - self.flat)
        return smoothstep(s), -smoothstep_d1(s) / (self.radius - self.flat)

    def value(self, x):
        _, r = self._r(x)
        g = np.exp(-0.5 * (r / self.width) ** 2)
        tap, _ = self._taper(r)
        return g * tap

    def grad(self, x):
        diff, r = self._r(x)
        g = np.exp(-0.5 * (r / self.width) ** 2)
        tap, dtap = self._taper(r)
        # d/dr (g * tap) / r, with the Gaussian part written without dividing by r
        radial_over_r = -g * tap / self.width**2
        with np.errstate(invalid="ignore", divide="ignore"):
            extra = np.where(r > 0, g * dtap / np.where(r > 0, r, 1.0), 0.0)
        coef = radial_over_r + extra
        return np.stack(np.broadcast_arrays(*[coef * d for d in diff]))

    def hessian(self, x):
        """Second derivatives, shape (dim, dim, ...)."""
        diff, r = self._r(x)
        dim = len(diff)
        g = np.exp(-0.5 * (r / self.width) ** 2)
        span = self.radius - self.flat
        s = (self.radius - r) / span
        tap = smoothstep(s)
        dtap = -smoothstep_d1(s) / span
        ddtap = smoothstep_d2(s) / span**2
        w2 = self.width**2
        # phi(r) = g * tap ; phi' = g' tap + g tap' ; g' = -r g / w2
        safe_r = np.where(r > 0, r, 1.0)
        dphi = -r * g * tap / w2 + g * dtap
        ddphi = (r * r / w2 - 1.0) * g * tap / w2 - 2.0 * r * g * dtap / w2 + g * ddtap
        # H_ij = phi'' n_i n_j + (phi'/r)(delta_ij - n_i n_j)
        phi_over_r = np.where(r > 0, dphi / safe_r, -g * tap / w2 + 0.0)
        n = [np.where(r > 0, d / safe_r, 0.0) for d in diff]
        shape = np.broadcast(*diff).shape
        out = np.empty((dim, dim) + shape)
        for i in range(dim):
            for j in range(dim):
                nn = n[i] * n[j]
                delta = 1.0 if i == j else 0.0
                out[i, j] = np.broadcast_to(ddphi * nn + phi_over_r * (delta - nn), shape)
        return out
