"""Normalized Hermite functions and Gauss-Hermite quadrature on Lebesgue measure.

The basis diagonalizing each Fourier fiber of the operator is built from the
L2-normalized Hermite functions h_n (eigenfunctions of -d^2/dx^2 + x^2 with
eigenvalue 2n+1) via rescaling: for eta != 0,

    h_scaled[m,alpha](x; eta) = |eta|^{d1/4} prod_j h_{alpha_j}(|eta|^{1/2} x_j),

with alpha a multi-index of total degree m.  Everything here works at fixed
d1; geometry and lattice handling live in fields.py.

The three-term recurrence is carried with a per-point power-of-two exponent
offset so that evaluation deep in the Gaussian tail (large order, large
argument) neither underflows to zero prematurely nor overflows.  That same
stable evaluation gives quadrature weights for plain Lebesgue measure,
w_i = 1 / (n * h_{n-1}(x_i)^2), which stay finite at orders where the
classical w_i * exp(x_i^2) correction would overflow.
"""

from __future__ import annotations

import math
from itertools import combinations_with_replacement

import numpy as np
from scipy.special import roots_hermite

from .errors import ConfigError, QuadratureError

# rescale mantissas out of this band to keep the recurrence in range
_RESCALE_SMALL = 2.0 ** -512
_RESCALE_BIG = 2.0 ** 512
_LOG2E_HALF = 0.5 / math.log(2.0)
# ldexp exponent clamp: floor sits below -1074 - 512 so a clamped exponent
# still flushes any in-band mantissa to a true zero instead of a subnormal
_CLIP_LO = -2200
_CLIP_HI = 2200


def _start_values(x):
    """Mantissa/exponent pair for h_0(x) = pi^{-1/4} exp(-x^2/2)."""
    x = np.asarray(x, dtype=float)
    expo = np.floor(-x * x * _LOG2E_HALF).astype(np.int64)
    mant = math.pi ** -0.25 * np.exp2(-x * x * _LOG2E_HALF - expo)
    return mant, expo


def _renorm(a, b, expo):
    """Pull the shared exponent of two consecutive rows back into band."""
    mag = np.maximum(np.abs(a), np.abs(b))
    small = mag < _RESCALE_SMALL
    if small.any():
        a[small] *= _RESCALE_BIG
        b[small] *= _RESCALE_BIG
        expo[small] -= 512
    big = mag > _RESCALE_BIG
    if big.any():
        a[big] *= _RESCALE_SMALL
        b[big] *= _RESCALE_SMALL
        expo[big] += 512


def hermite_values(n_max, x):
    """All normalized Hermite functions h_0..h_{n_max} at the points x.

    Returns an array of shape (n_max+1, len(x)).  Values that are genuinely
    below the double-precision floor come out as 0.0.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    prev, expo = _start_values(x)
    out = np.empty((n_max + 1, x.size))
    out[0] = np.ldexp(prev, expo.clip(_CLIP_LO, _CLIP_HI).astype(np.int32))
    if n_max == 0:
        return out
    cur = math.sqrt(2.0) * x * prev
    out[1] = np.ldexp(cur, expo.clip(_CLIP_LO, _CLIP_HI).astype(np.int32))
    for n in range(1, n_max):
        nxt = math.sqrt(2.0 / (n + 1)) * x * cur - math.sqrt(n / (n + 1.0)) * prev
        prev, cur = cur, nxt
        _renorm(prev, cur, expo)
        out[n + 1] = np.ldexp(cur, expo.clip(_CLIP_LO, _CLIP_HI).astype(np.int32))
    return out


def _hermite_single(n, x):
    """h_n at the points x as a mantissa/exponent pair (no value array)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    prev, expo = _start_values(x)
    if n == 0:
        return prev, expo
    cur = math.sqrt(2.0) * x * prev
    for k in range(1, n):
        nxt = math.sqrt(2.0 / (k + 1)) * x * cur - math.sqrt(k / (k + 1.0)) * prev
        prev, cur = cur, nxt
        _renorm(prev, cur, expo)
    return cur, expo


def hermite_function(n, x):
    """Single normalized Hermite function h_n evaluated at x."""
    mant, expo = _hermite_single(n, x)
    return np.ldexp(mant, expo.clip(_CLIP_LO, _CLIP_HI).astype(np.int32))


def gauss_hermite_lebesgue(n):
    """Gauss-Hermite nodes with weights adjusted to plain Lebesgue measure.

    Sum_i w_i f(x_i) approximates int f(x) dx for f with Gaussian-type decay,
    exactly when f(x) = p(x) exp(-x^2) with deg p <= 2n-1.  The weights use
    w_i = 1 / (n * h_{n-1}(x_i)^2), which is stable at large n where the
    textbook exp(x_i^2) correction of the classical weights overflows.
    """
    if n < 1:
        raise ConfigError("quadrature order must be positive")
    nodes, _ = roots_hermite(n)
    mant, expo = _hermite_single(n - 1, nodes)
    # renormalize so squaring the mantissa cannot overflow at the band edge
    m2, e2 = np.frexp(mant)
    w = np.ldexp(1.0 / (n * m2 * m2), (-2 * (expo + e2)).clip(_CLIP_LO, _CLIP_HI).astype(np.int32))
    return nodes, w


def multi_indices(m, d1):
    """All multi-indices alpha in N^d1 with |alpha| = m, in lexicographic order."""
    if d1 == 1:
        return [(m,)]
    out = []
    # place m units into d1 slots; combinations give the descending profiles
    for bars in combinations_with_replacement(range(m + 1), d1 - 1):
        cuts = (0,) + bars + (m,)
        alpha = tuple(cuts[i + 1] - cuts[i] for i in range(d1))
        out.append(alpha)
    return sorted(out)


def multiplicity(m, d1):
    """Number of multi-indices of total degree m in d1 variables."""
    return math.comb(m + d1 - 1, d1 - 1)


def position_matrix(n):
    """Matrix of multiplication by x on span(h_0..h_{n-1}), truncated."""
    a = np.zeros((n, n))
    for k in range(n - 1):
        c = math.sqrt((k + 1) / 2.0)
        a[k, k + 1] = c
        a[k + 1, k] = c
    return a


def derivative_matrix(n):
    """Matrix of d/dx on span(h_0..h_{n-1}), truncated."""
    a = np.zeros((n, n))
    for k in range(n - 1):
        c = math.sqrt((k + 1) / 2.0)
        a[k, k + 1] = c
        a[k + 1, k] = -c
    return a


class HermiteBasis:
    """Scaled Hermite eigenbasis for the x-variables at fixed d1.

    Holds the Lebesgue Gauss-Hermite rule of the requested order together
    with the flattened mode table [(m, alpha)] for m <= m_max, and evaluates
    per-axis basis matrices at any effective frequency.  The quadrature order
    must be at least 2(m_max+1) so that products of two retained modes are
    integrated exactly; the default 4(m_max+1) leaves headroom for rescaled
    frequencies away from 1.
    """

    def __init__(self, d1, m_max, quad_order=None):
        if d1 < 1:
            raise ConfigError("d1 must be a positive integer")
        if m_max < 0:
            raise ConfigError("m_max must be nonnegative")
        if quad_order is None:
            quad_order = 4 * (m_max + 1)
        if quad_order < 2 * (m_max + 1):
            raise QuadratureError(
                "quadrature underresolved: quad_order %d < 2*(m_max+1) = %d"
                % (quad_order, 2 * (m_max + 1))
            )
        self.d1 = d1
        self.m_max = m_max
        self.quad_order = quad_order
        self.nodes, self.weights = gauss_hermite_lebesgue(quad_order)
        self.modes = [(m, alpha) for m in range(m_max + 1) for alpha in multi_indices(m, d1)]
        self.mode_m = np.array([m for m, _ in self.modes])
        self._axis_cache = {}

    @property
    def n_modes(self):
        return len(self.modes)

    def axis_values(self, scale):
        """h_a(sqrt(scale) * nodes) for a = 0..m_max, shape (n_nodes, m_max+1)."""
        key = float(scale)
        hit = self._axis_cache.get(key)
        if hit is None:
            vals = hermite_values(self.m_max, math.sqrt(scale) * self.nodes)
            hit = np.ascontiguousarray(vals.T)
            self._axis_cache[key] = hit
        return hit

    def axis_matrix(self, eta_eff):
        """Scaled one-dimensional eigenfunctions at the nodes, eta_eff^{1/4} h_a(sqrt(eta_eff) x)."""
        if eta_eff <= 0:
            raise ConfigError("degenerate frequency: eta must be nonzero")
        return float(eta_eff) ** 0.25 * self.axis_values(eta_eff)


def eval_scaled(x, m, k, eta, d1=1, *, m_max_hint=None):
    """Value of the scaled eigenfunction h_scaled[m, k](x; eta).

    x is a point of R^{d1} (scalar allowed when d1 = 1), k indexes the
    lexicographic multi-index list of degree m.  eta may be a scalar (d2 = 1
    fiber frequency) or a vector; only |eta| enters.  eta = 0 is rejected:
    the zero fiber carries the unscaled basis and is handled by the geometry.
    """
    amp = float(np.linalg.norm(np.atleast_1d(np.asarray(eta, dtype=float))))
    if amp == 0.0:
        raise ConfigError("degenerate frequency: eta must be nonzero")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if xs.shape[-1] != d1 and d1 == 1:
        xs = xs.reshape(-1, 1)
    idx = multi_indices(m, d1)
    if not 0 <= k < len(idx):
        raise ConfigError("mode index k out of range for degree m")
    alpha = idx[k]
    root = math.sqrt(amp)
    val = amp ** (d1 / 4.0)
    for j in range(d1):
        val = val * hermite_function(alpha[j], root * xs[..., j])
    return val[0] if val.size == 1 else val
