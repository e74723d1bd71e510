"""Geometry, spectral fields, and both directions of the diagonalizing transform.

A field u(x, y) on R^{d1} x (periodic box)^{d2} is stored by its coefficients
against the tensor eigenbasis: scaled Hermite functions in x (per Fourier
fiber) times normalized exponentials e_k(y) = exp(i (2 pi / L) k.y) / L^{d2/2}.
The operator -Delta_x - |x|^2 Delta_y acts diagonally with eigenvalue
(2m + d1) |eta| on the (m, eta) component, eta = (2 pi / L) k.

The physical-side grid is fixed per geometry: a Gauss-Hermite node set in
each x variable (optionally rescaled by 1/sqrt(x_scale), with Lebesgue
weights rescaled accordingly) times a uniform y grid.  Rescaling moves the
effective frequency seen by the quadrature to |eta| / x_scale, which is what
lets one geometry resolve a whole dyadic annulus with a modest node count.
Per-shell orthonormality defects are measured at build time; transforms
refuse to move significant mass through shells the quadrature cannot
represent.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import ConfigError, NumericalError, QuadratureError
from .hermite import HermiteBasis, multi_indices

TAU = 2.0 * math.pi

# relative mass allowed on under-resolved shells before transforms refuse
_BAD_SHELL_MASS = 1e-8


def _auto_quad_order(d1, m_max, scale_lo, scale_hi):
    # calibrated so the per-shell Gram defect stays below ~1e-11 across the
    # whole scale range (measured law: threshold ~ (13 + 1.7 m) * scale on the
    # oscillatory side and ~ (12 + 1.7 m) / scale on the tail side)
    stretch = max(scale_hi, 1.0 / scale_lo)
    return max(4 * (m_max + 1), int(math.ceil((14 + 2 * m_max) * stretch)) + 8)


class Geometry:
    """Discretization: x quadrature grid, y lattice, and the mode table.

    case is "euclidean_box" (periodic stand-in box, default L = 64 pi) or
    "torus" (L = 2 pi, fixed).  K_max bounds each integer frequency axis,
    m_max the Hermite degree.  x_scale rescales the Gauss-Hermite nodes by
    1/sqrt(x_scale); choose it near the frequency scale of interest.
    """

    def __init__(self, d1=1, d2=1, case="euclidean_box", L=None, K_max=8,
                 m_max=8, quad_order=None, x_scale=1.0, defect_tol=1e-9):
        if d1 < 1 or d2 < 1:
            raise ConfigError("d1 and d2 must be positive integers")
        if case == "torus":
            if L is not None and not math.isclose(L, TAU):
                raise ConfigError("torus case fixes L = 2 pi")
            L = TAU
        elif case == "euclidean_box":
            if L is None:
                L = 64.0 * math.pi
            if L <= 0:
                raise ConfigError("box length L must be positive")
        else:
            raise ConfigError("case must be 'euclidean_box' or 'torus'")
        if K_max < 1:
            raise ConfigError("K_max must be at least 1")
        if x_scale <= 0:
            raise ConfigError("x_scale must be positive")

        self.d1 = int(d1)
        self.d2 = int(d2)
        self.case = case
        self.L = float(L)
        self.K_max = int(K_max)
        self.m_max = int(m_max)
        self.x_scale = float(x_scale)
        self.defect_tol = float(defect_tol)
        self.delta_eta = TAU / self.L

        # integer frequency lattice in FFT order along each y axis
        self.n_lat = 2 * self.K_max + 1
        self.k_axis = np.concatenate([np.arange(self.K_max + 1), np.arange(-self.K_max, 0)])
        self.lat_shape = (self.n_lat,) * self.d2
        self.lat_size = self.n_lat ** self.d2
        grids = np.meshgrid(*([self.k_axis] * self.d2), indexing="ij")
        self.k_grid = np.stack(grids)  # (d2,) + lat_shape
        s_flat = sum(g.astype(np.int64) ** 2 for g in grids).ravel()
        self.s_flat = s_flat
        self.shell_s = np.unique(s_flat)
        self.n_shells = self.shell_s.size
        self.shell_of_flat = np.searchsorted(self.shell_s, s_flat)
        order = np.argsort(s_flat, kind="stable")
        self.flat_by_shell = order
        self.shell_bounds = np.searchsorted(s_flat[order], self.shell_s)
        self.eta_abs_shell = self.delta_eta * np.sqrt(self.shell_s.astype(float))

        scales = self.eta_abs_shell[self.shell_s > 0] / self.x_scale
        if quad_order is None:
            if scales.size == 0:
                raise ConfigError("lattice has no nonzero frequencies")
            quad_order = _auto_quad_order(d1, m_max, scales.min(), scales.max())
        self.basis = HermiteBasis(d1, m_max, quad_order=quad_order)
        self.quad_order = self.basis.quad_order
        self.n_modes = self.basis.n_modes
        self.mode_m = self.basis.mode_m
        self.alpha_axes = tuple(
            np.array([alpha[j] for _, alpha in self.basis.modes]) for j in range(d1)
        )

        root = math.sqrt(self.x_scale)
        self.x_nodes = self.basis.nodes / root
        self.x_weights = self.basis.weights / root

        # per-shell physical one-axis basis matrices, stacked; the zero fiber
        # (if present) carries the unscaled Hermite basis
        mats = np.empty((self.n_shells, self.quad_order, self.m_max + 1))
        for j in range(self.n_shells):
            if self.shell_s[j] == 0:
                mats[j] = self.basis.axis_values(1.0 / self.x_scale)
            else:
                eta = self.eta_abs_shell[j]
                mats[j] = eta ** 0.25 * self.basis.axis_values(eta / self.x_scale)
        self.shell_matrix = mats
        gram = np.einsum("sxa,x,sxb->sab", mats, self.x_weights, mats, optimize=True)
        gram -= np.eye(self.m_max + 1)
        self.shell_defect = np.abs(gram).max(axis=(1, 2))
        self.bad_shell = self.shell_defect > self.defect_tol

    # -- descriptors ---------------------------------------------------

    def describe(self):
        return {
            "d1": self.d1,
            "d2": self.d2,
            "case": self.case,
            "L": self.L,
            "K_max": self.K_max,
            "m_max": self.m_max,
            "quad_order": self.quad_order,
            "x_scale": self.x_scale,
        }

    def __repr__(self):
        return "Geometry(%s)" % ", ".join("%s=%r" % kv for kv in self.describe().items())

    def same_discretization(self, other):
        return self.describe() == other.describe()

    @property
    def max_shell_defect(self):
        return float(self.shell_defect.max())

    def shell_indices(self, j):
        """Flat lattice indices belonging to shell j."""
        b0 = self.shell_bounds[j]
        b1 = self.shell_bounds[j + 1] if j + 1 < self.n_shells else self.lat_size
        return self.flat_by_shell[b0:b1]

    def eigenvalues(self):
        """(2m + d1)|eta| table, shape (n_modes, n_shells)."""
        return np.outer(2.0 * self.mode_m + self.d1, self.eta_abs_shell)

    def eta_flat(self):
        """Physical frequency vectors on the flattened lattice, (d2, lat_size)."""
        return self.delta_eta * self.k_grid.reshape(self.d2, -1).astype(float)

    def grid_y(self, n_y):
        return self.L * np.arange(n_y) / n_y

    def y_cell(self, n_y):
        return (self.L / n_y) ** self.d2


class SpectralField:
    """Coefficient array against the eigenbasis of one geometry.

    coeffs has shape (n_modes,) + lat_shape, complex.  Mode axis runs over
    the flattened (m, alpha) table of the basis; lattice axes are in FFT
    order.  Operations return new fields; nothing mutates in place.
    """

    __slots__ = ("geometry", "coeffs")

    def __init__(self, geometry, coeffs):
        coeffs = np.asarray(coeffs, dtype=complex)
        want = (geometry.n_modes,) + geometry.lat_shape
        if coeffs.shape != want:
            raise ConfigError("coefficient shape %s, expected %s" % (coeffs.shape, want))
        self.geometry = geometry
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, geometry):
        return cls(geometry, np.zeros((geometry.n_modes,) + geometry.lat_shape, complex))

    def copy(self):
        return SpectralField(self.geometry, self.coeffs.copy())

    def flat(self):
        return self.coeffs.reshape(self.geometry.n_modes, -1)

    def l2_norm(self):
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other):
        self._check_mate(other)
        return SpectralField(self.geometry, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_mate(other)
        return SpectralField(self.geometry, self.coeffs - other.coeffs)

    def __mul__(self, z):
        return SpectralField(self.geometry, self.coeffs * z)

    __rmul__ = __mul__

    def _check_mate(self, other):
        if other.geometry is not self.geometry and not self.geometry.same_discretization(other.geometry):
            raise ConfigError("fields live on different discretizations")


def _check_shell_mass(geom, flat_coeffs, label):
    if not geom.bad_shell.any():
        return
    total = np.linalg.norm(flat_coeffs)
    if total == 0.0:
        return
    bad_flat = geom.bad_shell[geom.shell_of_flat]
    bad = np.linalg.norm(flat_coeffs[:, bad_flat])
    if bad > _BAD_SHELL_MASS * total:
        worst = float(geom.shell_defect.max())
        raise QuadratureError(
            "quadrature underresolved: %s puts relative mass %.3e on shells "
            "with Gram defect up to %.3e; raise quad_order or adjust x_scale"
            % (label, bad / total, worst)
        )


def synthesize(field, n_y=None, check=True):
    """Grid values of the field, shape (quad_order,)*d1 + (n_y,)*d2."""
    geom = field.geometry
    d1, d2 = geom.d1, geom.d2
    if n_y is None:
        n_y = geom.n_lat
    if n_y < geom.n_lat:
        raise ConfigError("n_y must be at least 2*K_max + 1")
    fc = field.flat()
    if check:
        _check_shell_mass(geom, fc, "synthesis input")
    n_x = geom.quad_order
    mm = geom.m_max + 1
    cf = np.zeros((n_x,) * d1 + (geom.lat_size,), dtype=complex)
    for j in range(geom.n_shells):
        idx = geom.shell_indices(j)
        sub = fc[:, idx]
        if not sub.any():
            continue
        p = geom.shell_matrix[j]
        if d1 == 1:
            cf[:, idx] = p @ sub
        else:
            t = np.zeros((mm,) * d1 + (idx.size,), dtype=complex)
            t[tuple(a for a in geom.alpha_axes)] = sub
            if d1 == 2:
                cf[:, :, idx] = np.einsum("xa,yb,abk->xyk", p, p, t, optimize=True)
            elif d1 == 3:
                cf[:, :, :, idx] = np.einsum("xa,yb,zc,abck->xyzk", p, p, p, t, optimize=True)
            else:
                raise ConfigError("d1 > 3 synthesis not supported")
    cf = cf.reshape((n_x,) * d1 + geom.lat_shape)
    out = np.zeros((n_x,) * d1 + (n_y,) * d2, dtype=complex)
    sel = tuple(np.ix_(*([geom.k_axis % n_y] * d2)))
    out[(slice(None),) * d1 + sel] = cf
    axes = tuple(range(d1, d1 + d2))
    out = np.fft.ifftn(out, axes=axes)
    out *= n_y ** d2 / geom.L ** (d2 / 2.0)
    return out


def analyze(values, geom, check=True):
    """Spectral coefficients of grid values sampled on the geometry's grid."""
    d1, d2 = geom.d1, geom.d2
    values = np.asarray(values, dtype=complex)
    n_x = geom.quad_order
    if values.shape[:d1] != (n_x,) * d1 or len(values.shape) != d1 + d2:
        raise ConfigError("grid shape %s does not match geometry" % (values.shape,))
    n_y = values.shape[d1]
    if any(s != n_y for s in values.shape[d1:]):
        raise ConfigError("y grid must be uniform across axes")
    if n_y < geom.n_lat:
        raise ConfigError("n_y must be at least 2*K_max + 1")
    axes = tuple(range(d1, d1 + d2))
    c = np.fft.fftn(values, axes=axes) * (geom.L ** (d2 / 2.0) / n_y ** d2)
    sel = tuple(np.ix_(*([geom.k_axis % n_y] * d2)))
    c = c[(slice(None),) * d1 + sel]
    cf = c.reshape((n_x,) * d1 + (geom.lat_size,))
    out = np.zeros((geom.n_modes, geom.lat_size), dtype=complex)
    w = geom.x_weights
    for j in range(geom.n_shells):
        idx = geom.shell_indices(j)
        block = cf[..., idx]
        wp = w[:, None] * geom.shell_matrix[j]
        if d1 == 1:
            out[:, idx] = wp.T @ block
        elif d1 == 2:
            t = np.einsum("xa,yb,xyk->abk", wp, wp, block, optimize=True)
            out[:, idx] = t[tuple(a for a in geom.alpha_axes)]
        elif d1 == 3:
            t = np.einsum("xa,yb,zc,xyzk->abck", wp, wp, wp, block, optimize=True)
            out[:, idx] = t[tuple(a for a in geom.alpha_axes)]
        else:
            raise ConfigError("d1 > 3 analysis not supported")
    if check:
        _check_shell_mass(geom, out, "analysis output")
    return SpectralField(geom, out.reshape((geom.n_modes,) + geom.lat_shape))


def random_field(geom, rng, s=None, amplitude=1.0, zero_fiber=True):
    """Gaussian random field; if s is given, shaped like an H^s sample."""
    re = rng.standard_normal((geom.n_modes, geom.lat_size))
    im = rng.standard_normal((geom.n_modes, geom.lat_size))
    g = (re + 1j * im) / math.sqrt(2.0)
    if s is not None:
        lam = geom.eigenvalues()[:, geom.shell_of_flat]
        g *= (1.0 + lam) ** (-s / 2.0)
    if not zero_fiber:
        g[:, geom.s_flat == 0] = 0.0
    g *= amplitude
    return SpectralField(geom, g.reshape((geom.n_modes,) + geom.lat_shape))


# -- dyadic frequency decomposition ------------------------------------


def _smooth_step(t):
    """psi(t): 0 for t <= 0, 1 for t >= 1, C-infinity monotone in between."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    out = np.where(t <= 0.0, 0.0, np.where(t >= 1.0, 1.0, a / (a + b)))
    return out


class DyadicCutoff:
    """Smooth annulus bump chi(rho) = theta(rho) - theta(2 rho).

    theta is a smooth decreasing step equal to 1 on [0, flat_end] and
    supported in [0, supp_end].  The induced chi is a Littlewood-Paley bump:
    chi = 1 on [supp_end/2, flat_end], supp chi in [flat_end/2, supp_end],
    and sum over dyadic I of chi(rho / I) = 1 for every rho > 0 (telescoping,
    at most two nonzero terms).  Defaults (5/4, 2) put the flat interval at
    [1, 5/4] and the support inside [5/8, 2].
    """

    def __init__(self, flat_end=1.25, supp_end=2.0):
        if not (0.0 < flat_end < supp_end):
            raise ConfigError("need 0 < flat_end < supp_end")
        if supp_end > 2.0 * flat_end:
            raise ConfigError("supp_end > 2*flat_end leaves a gap where chi < 1")
        if not (supp_end / 2.0 <= 1.0 <= flat_end):
            raise ConfigError("flat interval [supp_end/2, flat_end] must contain 1")
        self.flat_end = float(flat_end)
        self.supp_end = float(supp_end)

    @property
    def c_lo(self):
        return self.flat_end / 2.0

    @property
    def c_hi(self):
        return self.supp_end

    def theta(self, rho):
        rho = np.asarray(rho, dtype=float)
        return _smooth_step((self.supp_end - rho) / (self.supp_end - self.flat_end))

    def chi(self, rho):
        rho = np.asarray(rho, dtype=float)
        return self.theta(rho) - self.theta(2.0 * rho)


def dyadic_exponents(geom, cutoff=None):
    """Integer j such that chi(rho / 2^j) can meet the nonzero lattice shells."""
    cutoff = cutoff or DyadicCutoff()
    rho_min = geom.delta_eta
    rho_max = float(geom.eta_abs_shell[-1])
    j_lo = math.floor(math.log2(rho_min / cutoff.c_hi))
    j_hi = math.ceil(math.log2(rho_max / cutoff.c_lo))
    return range(j_lo, j_hi + 1)


def apply_cutoff(field, scale, cutoff=None):
    """Multiply by chi(|eta| / scale); the zero fiber is annihilated."""
    cutoff = cutoff or DyadicCutoff()
    geom = field.geometry
    w = cutoff.chi(geom.eta_abs_shell / scale)
    w[geom.shell_s == 0] = 0.0
    fc = field.flat() * w[geom.shell_of_flat]
    return SpectralField(geom, fc.reshape(field.coeffs.shape))


def block_members(A, d1, exponents):
    """(m, I) pairs with A <= 1 + (2m + d1) I < 2A, I = 2^j over the given j."""
    if A < 1 or A != 2 ** int(round(math.log2(A))):
        raise ConfigError("block label A must be a power of two, A >= 1")
    out = []
    for j in exponents:
        I = 2.0 ** j
        m = 0
        while True:
            val = 1.0 + (2 * m + d1) * I
            if val >= 2 * A:
                break
            if val >= A:
                out.append((m, I))
            m += 1
    return out


def block_labels(geom):
    """Power-of-two block labels wide enough to absorb every member scale.

    The top labels can exceed 1 + lambda_max because member scales reach past
    the largest lattice frequency before their cutoff dies on the lattice;
    labels whose members never meet the lattice just contribute zero weight.
    """
    lam_max = (2 * geom.m_max + geom.d1) * float(geom.eta_abs_shell[-1])
    out = []
    a = 1.0
    while a <= 4.0 * (1.0 + lam_max):
        out.append(a)
        a *= 2.0
    return out


def block_weight_table(geom, A, cutoff=None):
    """w_A(m, |eta|) = sum over member scales of chi(|eta| / I), per shell.

    Shape (n_modes, n_shells).  The zero fiber belongs to no block.
    """
    cutoff = cutoff or DyadicCutoff()
    members = block_members(A, geom.d1, dyadic_exponents(geom, cutoff))
    table = np.zeros((geom.n_modes, geom.n_shells))
    by_m = {}
    for m, I in members:
        by_m.setdefault(m, []).append(I)
    for i, m in enumerate(geom.mode_m):
        for I in by_m.get(int(m), ()):
            table[i] += cutoff.chi(geom.eta_abs_shell / I)
    table[:, geom.shell_s == 0] = 0.0
    return table


def project_block(field, A, cutoff=None):
    geom = field.geometry
    w = block_weight_table(geom, A, cutoff)
    fc = field.flat() * w[:, geom.shell_of_flat]
    return SpectralField(geom, fc.reshape(field.coeffs.shape))


def project_mode(field, m):
    if not 0 <= m <= field.geometry.m_max:
        raise ConfigError("mode degree m out of range")
    fc = field.flat().copy()
    fc[field.geometry.mode_m != m] = 0.0
    return SpectralField(field.geometry, fc.reshape(field.coeffs.shape))


def block_norms(field, cutoff=None):
    """Dict A -> ||P_A u||_{L^2}, over all labels with members."""
    geom = field.geometry
    out = {}
    for A in block_labels(geom):
        w = block_weight_table(geom, A, cutoff)[:, geom.shell_of_flat]
        out[A] = float(np.linalg.norm(w * field.flat()))
    return out


def quasi_orthogonality_ratio(field, cutoff=None):
    """sum_A ||P_A u||^2 / ||u||^2, zero fiber excluded from both sides."""
    geom = field.geometry
    fc = field.flat().copy()
    fc[:, geom.s_flat == 0] = 0.0
    total = np.sum(np.abs(fc) ** 2)
    if total == 0.0:
        raise ConfigError("field has no mass off the zero fiber")
    acc = 0.0
    for A in block_labels(geom):
        w = block_weight_table(geom, A, cutoff)[:, geom.shell_of_flat]
        acc += np.sum((w * np.abs(fc)) ** 2)
    return acc / total


# -- Sobolev scales and operator symbols --------------------------------


def symbol_table(geom, s, homogeneous=False):
    """((2m+d1)|eta|)^s or (1 + (2m+d1)|eta|)^s per (mode, shell)."""
    lam = geom.eigenvalues()
    if not homogeneous:
        return (1.0 + lam) ** s
    if s == 0:
        return np.ones_like(lam)
    out = np.zeros_like(lam)
    nz = lam > 0
    out[nz] = lam[nz] ** s
    if s < 0:
        out[~nz] = np.inf
    return out


def apply_symbol(field, s, homogeneous=False):
    geom = field.geometry
    tab = symbol_table(geom, s, homogeneous)
    if homogeneous and s < 0:
        fiber_mass = np.linalg.norm(field.flat()[:, geom.s_flat == 0])
        if fiber_mass > 0.0:
            raise NumericalError(
                "singular fiber: negative homogeneous power with mass at eta = 0"
            )
        tab = np.where(np.isfinite(tab), tab, 0.0)
    fc = field.flat() * tab[:, geom.shell_of_flat]
    return SpectralField(geom, fc.reshape(field.coeffs.shape))


def sobolev_norm(field, s, homogeneous=False):
    geom = field.geometry
    tab = symbol_table(geom, s, homogeneous)
    mass = np.abs(field.flat()) ** 2
    if homogeneous and s < 0:
        fiber = geom.s_flat == 0
        if np.linalg.norm(field.flat()[:, fiber]) > 0.0:
            raise NumericalError(
                "singular fiber: negative homogeneous power with mass at eta = 0"
            )
        mass = mass.copy()
        mass[:, fiber] = 0.0
        tab = np.where(np.isfinite(tab), tab, 0.0)
    return math.sqrt(float(np.sum(tab[:, geom.shell_of_flat] * mass)))


def _ladder_neighbors(geom, axis):
    """Flat-mode indices of alpha +- e_axis (or -1 when truncated away)."""
    cache = getattr(geom, "_ladder_cache", None)
    if cache is None:
        cache = geom._ladder_cache = {}
    if axis in cache:
        return cache[axis]
    table = {alpha: i for i, (_, alpha) in enumerate(geom.basis.modes)}
    up = np.full(geom.n_modes, -1, dtype=int)
    down = np.full(geom.n_modes, -1, dtype=int)
    for i, (_, alpha) in enumerate(geom.basis.modes):
        lifted = list(alpha)
        lifted[axis] += 1
        up[i] = table.get(tuple(lifted), -1)
        if alpha[axis] > 0:
            lowered = list(alpha)
            lowered[axis] -= 1
            down[i] = table[tuple(lowered)]
    cache[axis] = (up, down)
    return up, down


def _axis_degree(geom, axis):
    return geom.alpha_axes[axis].astype(float)


def dx_apply(field, axis=0):
    """d/dx_axis in mode space; raising past m_max is truncated."""
    geom = field.geometry
    up, down = _ladder_neighbors(geom, axis)
    a = _axis_degree(geom, axis)
    root_eta = np.sqrt(np.where(geom.shell_s > 0, geom.eta_abs_shell, 1.0))
    fc = field.flat()
    out = np.zeros_like(fc)
    has_dn = down >= 0
    out[down[has_dn]] += np.sqrt(a[has_dn] / 2.0)[:, None] * fc[has_dn]
    has_up = up >= 0
    out[up[has_up]] -= np.sqrt((a[has_up] + 1.0) / 2.0)[:, None] * fc[has_up]
    out *= root_eta[geom.shell_of_flat]
    return SpectralField(geom, out.reshape(field.coeffs.shape))


def xmul_apply(field, axis=0):
    """Multiplication by x_axis in mode space; raising past m_max is truncated."""
    geom = field.geometry
    up, down = _ladder_neighbors(geom, axis)
    a = _axis_degree(geom, axis)
    inv_root = 1.0 / np.sqrt(np.where(geom.shell_s > 0, geom.eta_abs_shell, 1.0))
    fc = field.flat()
    out = np.zeros_like(fc)
    has_dn = down >= 0
    out[down[has_dn]] += np.sqrt(a[has_dn] / 2.0)[:, None] * fc[has_dn]
    has_up = up >= 0
    out[up[has_up]] += np.sqrt((a[has_up] + 1.0) / 2.0)[:, None] * fc[has_up]
    out *= inv_root[geom.shell_of_flat]
    return SpectralField(geom, out.reshape(field.coeffs.shape))


def dy_apply(field, axis=0):
    """d/dy_axis: multiplication by i eta_axis."""
    geom = field.geometry
    eta = geom.eta_flat()[axis]
    fc = field.flat() * (1j * eta)
    return SpectralField(geom, fc.reshape(field.coeffs.shape))


def _x_laplace_matrix(geom, scale):
    """Mode-space matrix of -Delta_x (compressed to the retained modes).

    In the basis scaled to frequency |eta|, -d^2/dx_j^2 has diagonal
    |eta| (a_j + 1/2) and couples alpha to alpha + 2 e_j with weight
    -|eta| sqrt((a_j+1)(a_j+2))/2.
    """
    n = geom.n_modes
    lap = np.zeros((n, n))
    for axis in range(geom.d1):
        up, _ = _ladder_neighbors(geom, axis)
        a = _axis_degree(geom, axis)
        for i in range(n):
            lap[i, i] += a[i] + 0.5
            j = up[i]
            jj = up[j] if j >= 0 else -1
            if jj >= 0:
                c = math.sqrt((a[i] + 1.0) * (a[i] + 2.0)) / 2.0
                lap[jj, i] -= c
                lap[i, jj] -= c
    return scale * lap


def x_sobolev_norm(field, s):
    """||(1 - Delta_x)^{s/2} u||_{L^2} via the truncated quadratic form."""
    geom = field.geometry
    fc = field.flat()
    total = 0.0
    cache = {}
    for j in range(geom.n_shells):
        idx = geom.shell_indices(j)
        sub = fc[:, idx]
        if not sub.any():
            continue
        key = float(geom.eta_abs_shell[j]) if geom.shell_s[j] > 0 else 1.0
        if key not in cache:
            mat = np.eye(geom.n_modes) + _x_laplace_matrix(geom, key)
            cache[key] = np.linalg.eigh(mat)
        evals, evecs = cache[key]
        proj = evecs.T @ sub
        total += float(np.sum(evals[:, None] ** s * np.abs(proj) ** 2))
    return math.sqrt(total)


# -- serialization -------------------------------------------------------

_MAGIC = "# grushin-field v1 "


def save_field(field, path):
    """Text table of retained coefficients with a geometry header.

    Row format: m k_intra k_1 .. k_d2 re im, floats as %.17g (binary64
    round-trips bit-exactly).  Only nonzero coefficients are written.
    """
    geom = field.geometry
    intra = []
    seen = {}
    for m, alpha in geom.basis.modes:
        seen.setdefault(m, 0)
        intra.append(seen[m])
        seen[m] += 1
    fc = field.flat()
    kcols = geom.k_grid.reshape(geom.d2, -1)
    with open(path, "w") as fh:
        fh.write(_MAGIC + json.dumps(geom.describe(), sort_keys=True) + "\n")
        fh.write("# m k %s re im\n" % " ".join("k%d" % (i + 1) for i in range(geom.d2)))
        rows, cols = np.nonzero(fc)
        for r, c in zip(rows, cols):
            z = fc[r, c]
            ks = " ".join(str(int(kcols[i, c])) for i in range(geom.d2))
            fh.write(
                "%d %d %s %s %s\n"
                % (geom.mode_m[r], intra[r], ks, format(z.real, ".17g"), format(z.imag, ".17g"))
            )


def load_field(path):
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith(_MAGIC):
            raise ConfigError("not a grushin field file")
        desc = json.loads(header[len(_MAGIC):])
        geom = Geometry(**desc)
        field = SpectralField.zeros(geom)
        fc = field.flat()
        mode_of = {}
        seen = {}
        for i, (m, _) in enumerate(geom.basis.modes):
            seen.setdefault(m, 0)
            mode_of[(m, seen[m])] = i
            seen[m] += 1
        pos_of_k = {int(k): i for i, k in enumerate(geom.k_axis)}
        stride = [geom.n_lat ** (geom.d2 - 1 - i) for i in range(geom.d2)]
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            parts = line.split()
            m, k = int(parts[0]), int(parts[1])
            ks = [int(p) for p in parts[2 : 2 + geom.d2]]
            re, im = float(parts[2 + geom.d2]), float(parts[3 + geom.d2])
            col = sum(pos_of_k[kk] * st for kk, st in zip(ks, stride))
            fc[mode_of[(m, k)], col] = complex(re, im)
        return SpectralField(geom, fc.reshape((geom.n_modes,) + geom.lat_shape))
