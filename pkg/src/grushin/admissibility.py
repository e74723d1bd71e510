"""Exponent arithmetic for mixed-norm triples and the restriction windows.

Exponents live in [1, inf].  Finite ones are held as Fraction (float inputs
convert exactly) and infinity stays symbolic as math.inf, so window tests are
exact rational comparisons.  The scaling identity alone is accepted up to
1e-9 to absorb float noise in exponents that arrive from measurements.

A triple (p, q, r) is admissible for the flow of order sigma when the scaling
identity

    2 sigma / p + d1 / q + 2 d2 / r = (d1 + 2 d2) / 2 - gamma_{q,r}

holds and 1/2 - 1/r lies strictly inside the restriction window.  The window
ceiling is 1/(d2-1) at sigma = 1 and 1/d2 for sigma > 1; the floor is
1/(2 d2), raised by 1/(d2 p) on a compact y domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError, NumericalError
from .fields import synthesize

INF = math.inf

_SCALING_TOL = Fraction(1, 10**9)


def as_exponent(value):
    """Coerce to Fraction, keeping infinity symbolic."""
    if isinstance(value, str):
        return INF if value.strip() in ("inf", "infty", "oo") else Fraction(value)
    if isinstance(value, float):
        if math.isinf(value):
            return INF
        return Fraction(value)
    return Fraction(value)


def inv(a):
    """Reciprocal with 1/inf = 0, exact."""
    a = as_exponent(a)
    return Fraction(0) if a == INF else 1 / a


def holder_conjugate(a):
    """a' with 1/a + 1/a' = 1; conjugates 1 <-> inf symbolically."""
    ia = 1 - inv(a)
    return INF if ia == 0 else 1 / ia


def gamma(q, r, sigma, d1, d2):
    """Derivative loss gamma_{q,r} of the dispersive bound at order sigma."""
    dr = Fraction(1, 2) - inv(r)
    dq = Fraction(1, 2) - inv(q)
    sig = as_exponent(sigma)
    if sig == 1:
        return (d2 + 1) * dr + d1 * dq
    return d2 * (2 - sig) * dr + d1 * dq


def sobolev_gap(q, r, sigma, d1, d2):
    """(gamma_Sob, gamma_Stri, gap): what Sobolev embedding alone would cost."""
    dr = Fraction(1, 2) - inv(r)
    dq = Fraction(1, 2) - inv(q)
    g_sob = 2 * d2 * dr + d1 * dq
    g_stri = gamma(q, r, sigma, d1, d2)
    return g_sob, g_stri, g_sob - g_stri


class AdmissibleTriple:
    """Exponent triple (p, q, r) tied to dimensions, order and y-geometry."""

    def __init__(self, p, q, r, sigma=1, d1=1, d2=2, case="euclidean"):
        self.p, self.q, self.r = (as_exponent(a) for a in (p, q, r))
        for a in (self.p, self.q, self.r):
            if a != INF and a < 2:
                raise ConfigError("triple exponents must lie in [2, inf]")
        self.sigma = as_exponent(sigma)
        if not 1 <= self.sigma <= 2:
            raise ConfigError("sigma must lie in [1, 2]")
        if case not in ("euclidean", "compact"):
            raise ConfigError("case must be 'euclidean' or 'compact'")
        if d1 < 1 or d2 < 1:
            raise ConfigError("need d1 >= 1 and d2 >= 1")
        self.d1, self.d2, self.case = int(d1), int(d2), case

    @property
    def gamma(self):
        return gamma(self.q, self.r, self.sigma, self.d1, self.d2)

    def scaling_defect(self):
        lhs = (2 * self.sigma * inv(self.p) + self.d1 * inv(self.q)
               + 2 * self.d2 * inv(self.r))
        rhs = Fraction(self.d1 + 2 * self.d2, 2) - self.gamma
        return lhs - rhs

    def __repr__(self):
        return ("AdmissibleTriple(p=%s, q=%s, r=%s, sigma=%s, d1=%d, d2=%d, %s)"
                % (self.p, self.q, self.r, self.sigma, self.d1, self.d2, self.case))


def is_admissible(triple):
    """(ok, reason).  The triple (inf, 2, 2) is allowed unconditionally."""
    t = triple
    if t.p == INF and t.q == 2 and t.r == 2:
        return True, "sentinel triple"
    if t.sigma == 1 and t.d2 == 1:
        return False, "non-dispersive case excluded"
    dr = Fraction(1, 2) - inv(t.r)
    hi = Fraction(1, t.d2 - 1) if t.sigma == 1 else Fraction(1, t.d2)
    lo = Fraction(1, 2 * t.d2)
    if t.case == "compact":
        lo = lo + inv(t.p) / t.d2
    if not dr < hi:
        return False, "window fails: 1/2 - 1/r = %s is not below %s" % (dr, hi)
    if not dr > lo:
        return False, "window fails: 1/2 - 1/r = %s is not above %s" % (dr, lo)
    defect = t.scaling_defect()
    if abs(defect) > _SCALING_TOL:
        return False, "scaling identity fails by %.3e" % float(defect)
    return True, "admissible"


def solve_p(q, r, sigma, d1, d2):
    """The p the scaling identity forces at given (q, r); inf when 1/p = 0."""
    sig = as_exponent(sigma)
    ip = (Fraction(d1 + 2 * d2, 2) - gamma(q, r, sig, d1, d2)
          - d1 * inv(q) - 2 * d2 * inv(r)) / (2 * sig)
    if ip < 0:
        raise ConfigError("scaling identity forces p < 0 at q=%s, r=%s" % (q, r))
    return INF if ip == 0 else 1 / ip


def admissible_table(d1, d2, sigma, case="euclidean", q=2, n=8):
    """Sweep the restriction window; rows (r, q, p, gamma, gamma_sob, gap).

    The grid splits the open window into n+1 equal parts.  Values of
    1/2 - 1/r beyond 1/2 are unreachable by r <= inf and are skipped, as is
    any grid point the window test rejects (the compact floor depends on p).
    """
    sig = as_exponent(sigma)
    if sig == 1 and d2 == 1:
        raise ConfigError("non-dispersive case excluded")
    q = as_exponent(q)
    hi = Fraction(1, d2 - 1) if sig == 1 else Fraction(1, d2)
    lo = Fraction(1, 2 * d2)
    rows = []
    for j in range(1, n + 1):
        dr = lo + j * (hi - lo) / (n + 1)
        if dr > Fraction(1, 2):
            continue
        r = INF if dr == Fraction(1, 2) else 1 / (Fraction(1, 2) - dr)
        p = solve_p(q, r, sig, d1, d2)
        ok, _ = is_admissible(AdmissibleTriple(p, q, r, sig, d1, d2, case))
        if not ok:
            continue
        g_sob, g_stri, gap = sobolev_gap(q, r, sig, d1, d2)
        rows.append((r, q, p, g_stri, g_sob, gap))
    return rows


def format_exponent(a):
    return "inf" if a == INF else str(a)


def format_table_csv(rows):
    lines = ["r,q,p,gamma,gamma_sob,gap"]
    for row in rows:
        lines.append(",".join(format_exponent(a) for a in row))
    return "\n".join(lines) + "\n"


@dataclass
class MixedNormSpec:
    """Exponents plus the grids a discrete L^p_T L^q_x L^r_y norm runs on."""

    p: object
    q: object
    r: object
    times: object
    n_y: int | None = None

    def __post_init__(self):
        self.p, self.q, self.r = (as_exponent(a) for a in (self.p, self.q, self.r))
        for a in (self.p, self.q, self.r):
            if a != INF and a < 1:
                raise ConfigError("norm exponents must lie in [1, inf]")
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        if self.times.ndim != 1 or self.times.size == 0:
            raise ConfigError("need a one-dimensional, nonempty time grid")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ConfigError("time grid must be strictly increasing")
        if self.times.size == 1 and self.p != INF:
            raise ConfigError("finite p needs at least two time samples")


def _trapezoid_weights(t):
    w = np.zeros_like(t)
    d = np.diff(t)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def mixed_norm(series, spec):
    """Discrete L^p_T L^q_x L^r_y norm of a time series of spectral fields.

    y integration is the rectangle rule (exact for the trigonometric span),
    x integration runs on the Hermite nodes with Lebesgue-converted weights,
    infinite exponents take grid maxima.
    """
    series = list(series)
    if len(series) != spec.times.size:
        raise ConfigError("time grid and field series have different lengths")
    geom = series[0].geometry
    w_axis = geom.x_weights
    slice_norms = np.empty(len(series))
    for i, field in enumerate(series):
        if not field.geometry.same_discretization(geom):
            raise ConfigError("fields in a series must share one discretization")
        vals = synthesize(field, spec.n_y)
        a = np.abs(vals)
        if not np.all(np.isfinite(a)):
            raise NumericalError("overflow: non-finite values in mixed norm")
        y_axes = tuple(range(geom.d1, a.ndim))
        n_y = vals.shape[-1]
        if spec.r == INF:
            g = a.max(axis=y_axes)
        else:
            rr = float(spec.r)
            g = (np.sum(a**rr, axis=y_axes) * geom.y_cell(n_y)) ** (1.0 / rr)
        if spec.q == INF:
            slice_norms[i] = g.max()
        else:
            qq = float(spec.q)
            gq = g**qq
            for _ in range(geom.d1):
                gq = gq @ w_axis
            slice_norms[i] = gq ** (1.0 / qq)
    if not np.all(np.isfinite(slice_norms)):
        raise NumericalError("overflow: non-finite values in mixed norm")
    if spec.p == INF:
        return float(slice_norms.max())
    pp = float(spec.p)
    return float(np.sum(_trapezoid_weights(spec.times) * slice_norms**pp)
                 ** (1.0 / pp))
