"""Desk-scale Monte-Carlo probes of the time-space estimates.

The central object is the quotient

    || flow(t) u0 ||_{L^p_T L^q_x L^r_y}  /  || u0 ||_{H^s}

for random data localized on one dyadic block.  Uniform boundedness across
blocks is operationalized as a max/min gate over per-block suprema, paired
with a negative control (Sobolev weight reduced by 1/2) that must show
growth, or the gate is declared insensitive.

Block geometries are rescalings of one fixed lattice: block A uses spacing
A/8 and Hermite scale A, so the datum window [5A/8, 2A] always sits on
shells with |eta| / x_scale in the same band and the resolution profile is
identical across blocks.  Scaling tests exploit the same trick: the
rescaled datum u(lam x, lam^2 y) lives exactly on the lattice with box
L / lam^2 and Hermite scale lam^2 x_scale, with the original coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .admissibility import (
    AdmissibleTriple,
    MixedNormSpec,
    format_exponent,
    is_admissible,
    mixed_norm,
)
from .dispersion import modewise_constant_prime
from .errors import ConfigError, NumericalError
from .fields import (
    DyadicCutoff,
    Geometry,
    SpectralField,
    _smooth_step,
    apply_cutoff,
    block_members,
    block_weight_table,
    project_mode,
    random_field,
    sobolev_norm,
    synthesize,
    x_sobolev_norm,
)
from .propagators import evolve, modewise_timescale

TAU = 2.0 * math.pi


def _pow2(value, what):
    j = int(round(math.log2(value)))
    if value <= 0 or 2.0**j != value:
        raise ConfigError("%s must be a power of two, got %s" % (what, value))
    return j


def _flow_sign(sigma):
    return "minus" if sigma == 1.0 else "plus"


def time_grid(T, lam_max, sigma=1.0, floor_n=33):
    """Uniform grid on [0, T], at least 64 samples per fastest phase period."""
    if T <= 0:
        raise ConfigError("time horizon must be positive")
    n = max(floor_n, int(math.ceil(64.0 * T * max(lam_max, 0.0) ** sigma / TAU)) + 1)
    return np.linspace(0.0, T, n)


def datum_lambda_max(u0):
    """Largest eigenvalue actually carrying mass in the datum."""
    geom = u0.geometry
    lam = geom.eigenvalues()[:, geom.shell_of_flat]
    mask = np.abs(u0.flat()) > 0.0
    return float(lam[mask].max()) if mask.any() else 0.0


def strichartz_quotient(u0, triple, epsilon=0.0, T=1.0, weight="inhomogeneous",
                        s_shift=0.0, n_y=None, times=None, sign=None):
    """Mixed-norm trajectory size over the Sobolev size of the datum.

    The Sobolev exponent is gamma_{q,r} + epsilon + s_shift; s_shift < 0
    turns the quotient into its own negative control.  No admissibility is
    enforced here so that deliberately broken triples can be measured.
    """
    if u0.l2_norm() == 0.0:
        raise ConfigError("zero datum")
    if weight not in ("inhomogeneous", "homogeneous"):
        raise ConfigError("weight must be 'inhomogeneous' or 'homogeneous'")
    sigma = float(triple.sigma)
    if times is None:
        times = time_grid(T, datum_lambda_max(u0), sigma)
    if sign is None:
        sign = _flow_sign(sigma)
    series = [evolve(u0, sigma, float(t), sign) for t in times]
    spec = MixedNormSpec(triple.p, triple.q, triple.r, times, n_y)
    num = mixed_norm(series, spec)
    s = float(triple.gamma) + epsilon + s_shift
    den = sobolev_norm(u0, s, homogeneous=(weight == "homogeneous"))
    if den == 0.0:
        raise NumericalError("Sobolev weight annihilated the datum")
    return num / den


# -- dyadic block scan ---------------------------------------------------


def block_geometry(A, d1=1, d2=2, m_max=0, K_max=16, cutoff=None):
    """Lattice tuned to dyadic block A: spacing A/8, Hermite scale A."""
    _pow2(A, "block label A")
    cutoff = cutoff or DyadicCutoff()
    L = 16.0 * math.pi / A
    delta = TAU / L
    j_lo = math.floor(math.log2(delta / cutoff.c_hi))
    j_hi = math.ceil(math.log2(delta * K_max * math.sqrt(d2) / cutoff.c_lo))
    members = block_members(A, d1, range(j_lo, j_hi + 1))
    scales = [I for m, I in members if m <= m_max] or [float(A)]
    s_lo = max(delta, cutoff.c_lo * min(scales)) / A
    s_hi = cutoff.c_hi * max(scales) / A
    quad = int(math.ceil((14 + 2 * m_max) * max(s_hi, 1.0 / s_lo))) + 16
    return Geometry(d1=d1, d2=d2, L=L, K_max=K_max, m_max=m_max,
                    quad_order=quad, x_scale=float(A))


def block_datum(geom, A, rng, cutoff=None):
    """Unit random datum on the m = 0 slice of dyadic block A."""
    u = random_field(geom, rng)
    if geom.m_max > 0:
        u = project_mode(u, 0)
    w = block_weight_table(geom, A, cutoff)
    fc = u.flat() * w[:, geom.shell_of_flat]
    v = SpectralField(geom, fc.reshape(u.coeffs.shape))
    n = v.l2_norm()
    if n == 0.0:
        raise NumericalError("block %s meets no lattice frequency" % A)
    return v * (1.0 / n)


@dataclass
class QuotientExperiment:
    """One scan: random block data against the estimate's quotient gate."""

    triple: AdmissibleTriple
    epsilon: float = 0.1
    A_max: int = 8
    samples: int = 32
    seed: int = 0
    T1: float = 3.0
    K_max: int = 16
    n_y: int = 48

    def __post_init__(self):
        ok, why = is_admissible(self.triple)
        if not ok:
            raise ConfigError("inadmissible triple: " + why)
        if self.samples < 1:
            raise ConfigError("need at least one sample per block")
        if self.A_max < 1:
            raise ConfigError("need at least two blocks to compare")


@dataclass
class ScanResult:
    A_values: list
    rows: list
    sup_pos: np.ndarray
    sup_neg: np.ndarray
    gate_ratio: float
    neg_slope: float
    verdict: str
    experiment: QuotientExperiment

    def csv(self):
        lines = ["A,m,sample,quotient,constant,ratio"]
        for A, m, si, q, c, r in self.rows:
            lines.append("%g,%d,%d,%.17g,%.17g,%.17g" % (A, m, si, q, c, r))
        return "\n".join(lines) + "\n"

    def summary(self):
        t = self.experiment.triple
        return {
            "experiment": "strichartz-scan",
            "triple": {"p": format_exponent(t.p), "q": format_exponent(t.q),
                       "r": format_exponent(t.r)},
            "sigma": float(t.sigma),
            "case": t.case,
            "epsilon": self.experiment.epsilon,
            "seed": self.experiment.seed,
            "samples": self.experiment.samples,
            "A_values": [float(a) for a in self.A_values],
            "sup_quotient": [float(v) for v in self.sup_pos],
            "sup_negative": [float(v) for v in self.sup_neg],
            "gate_ratio": float(self.gate_ratio),
            "negative_slope": float(self.neg_slope),
            "verdict": self.verdict,
        }


def quotient_scan(exp):
    """Sup quotients per block, the max/min gate, and the negative control.

    Per-sample randomness is keyed by (seed, block index, sample index), so
    any row can be reproduced in isolation.
    """
    t = exp.triple
    sigma = float(t.sigma)
    g = float(t.gamma)
    cutoff = DyadicCutoff()
    A_values = [2.0**j for j in range(exp.A_max + 1)]
    rows = []
    sup_pos = np.zeros(len(A_values))
    sup_neg = np.zeros(len(A_values))
    for ai, A in enumerate(A_values):
        geom = block_geometry(A, t.d1, t.d2, 0, exp.K_max, cutoff)
        T = exp.T1 / A**sigma
        const = A ** (g / 2.0 + exp.epsilon / 4.0)
        for si in range(exp.samples):
            rng = np.random.default_rng(np.random.SeedSequence([exp.seed, ai, si]))
            u0 = block_datum(geom, A, rng, cutoff)
            times = time_grid(T, datum_lambda_max(u0), sigma)
            series = [evolve(u0, sigma, float(tt), _flow_sign(sigma))
                      for tt in times]
            spec = MixedNormSpec(t.p, t.q, t.r, times, exp.n_y)
            num = mixed_norm(series, spec)
            q_pos = num / sobolev_norm(u0, g + exp.epsilon)
            q_neg = num / sobolev_norm(u0, g + exp.epsilon - 0.5)
            rows.append((A, 0, si, q_pos, const, num / const))
            sup_pos[ai] = max(sup_pos[ai], q_pos)
            sup_neg[ai] = max(sup_neg[ai], q_neg)
    gate = float(sup_pos.max() / sup_pos.min())
    slope = float(np.polyfit(np.log2(A_values), np.log2(sup_neg), 1)[0])
    if gate > 10.0:
        verdict = "not bounded"
    elif slope < 0.2:
        verdict = "insensitive control"
    else:
        verdict = "bounded"
    return ScanResult(A_values, rows, sup_pos, sup_neg, gate, slope,
                      verdict, exp)


# -- exact lattice rescaling ----------------------------------------------


def rescale_field(u0, lam):
    """u(lam x, lam^2 y), exact on the lattice with box L / lam^2.

    Power-of-two lam keeps every shell value bitwise identical, so the
    rescaled field reuses the original Gauss rules.  The zero fiber does not
    follow the anisotropic dilation (its transverse scale is pinned), so
    data carrying fiber mass are refused.
    """
    _pow2(lam, "scaling factor")
    g = u0.geometry
    if g.case != "euclidean_box":
        raise ConfigError("scaling tests need the euclidean box")
    if np.linalg.norm(u0.flat()[:, g.s_flat == 0]) > 0.0:
        raise ConfigError("rescaling needs a datum without zero-fiber mass")
    g2 = Geometry(d1=g.d1, d2=g.d2, case=g.case, L=g.L / lam**2,
                  K_max=g.K_max, m_max=g.m_max, quad_order=g.quad_order,
                  x_scale=g.x_scale * lam**2, defect_tol=g.defect_tol)
    factor = float(lam) ** (-(g.d1 + 2 * g.d2) / 2.0)
    return SpectralField(g2, factor * u0.coeffs.copy())


def scaling_check(u0, lam, triple, epsilon=0.0, T=1.0, n_y=48):
    """(quotient, rescaled quotient) with the homogeneous Sobolev weight.

    For an admissible triple the two agree up to discretization (exactly,
    in the continuum, when epsilon = 0); a broken scaling identity shows up
    as the power lam^(2 sigma (1/p - 1/p_broken)).
    """
    sigma = float(triple.sigma)
    q1 = strichartz_quotient(u0, triple, epsilon, T, weight="homogeneous",
                             n_y=n_y)
    u2 = rescale_field(u0, lam)
    q2 = strichartz_quotient(u2, triple, epsilon, T / float(lam) ** (2 * sigma),
                             weight="homogeneous", n_y=n_y)
    return q1, q2


# -- the non-dispersive line ----------------------------------------------


def counterexample_d2_1(N=8, T_horizon=1.0, L=16.0 * math.pi, eta_factor=5.0,
                        n_checks=9):
    """Traveling-wave check for the flow at d1 = d2 = 1, sigma = 1.

    The datum stacks ground-state fibers with weight e^{-eta/N^2}; every
    mode-0 eigenvalue equals |eta| exactly, so the flow is translation:
    u(t) = u0(., . - t).  The check evolves through the spectral pipeline
    and compares against a grid roll at grid-aligned times.
    """
    if N < 2:
        raise ConfigError("N must be at least 2")
    if T_horizon <= 0:
        raise ConfigError("horizon must be positive")
    if T_horizon > L / 4.0:
        raise ConfigError("periodic box wraps: need T_horizon <= L / 4")
    delta = TAU / L
    eta_cap = eta_factor * N * N
    K = int(round(eta_cap / delta))
    geom = Geometry(d1=1, d2=1, L=L, K_max=K, m_max=0,
                    x_scale=math.sqrt(delta * eta_cap))
    u0 = SpectralField.zeros(geom)
    pos = geom.k_axis > 0
    eta = delta * geom.k_axis[pos].astype(float)
    u0.coeffs[0, pos] = (delta * math.pi**0.25 * math.sqrt(geom.L / N)
                         * eta**-0.25 * np.exp(-eta / N**2))

    vals0 = synthesize(u0)
    n_y = vals0.shape[-1]
    h = geom.L / n_y
    w = geom.x_weights

    def lp(v, p):
        return float(np.sum(w @ np.abs(v) ** p * h) ** (1.0 / p))

    ref_l2, ref_l4, ref_linf = lp(vals0, 2), lp(vals0, 4), float(
        np.abs(vals0).max())
    shifts = sorted({int(round(j * T_horizon / ((n_checks - 1) * h)))
                     for j in range(n_checks)})
    times, defects, linfs, l4s = [], [], [], []
    for shift in shifts:
        t = shift * h
        vt = synthesize(evolve(u0, 1.0, t, "minus"))
        ref = np.roll(vals0, shift, axis=-1)
        times.append(t)
        defects.append(lp(vt - ref, 2) / ref_l2)
        linfs.append(float(np.abs(vt).max()))
        l4s.append(lp(vt, 4))
    defect = max(defects)
    drift = max(abs(v - ref_linf) for v in linfs) / ref_linf
    l4_lo = min(l4s) / ref_l4
    l4_hi = max(l4s) / ref_l4
    ok = defect <= 1e-3 and drift <= 0.01
    return {
        "N": N,
        "L": geom.L,
        "K_max": geom.K_max,
        "quad_order": geom.quad_order,
        "eta_cap": eta_cap,
        "times": times,
        "translation_defect": defect,
        "linf_drift": drift,
        "l4_ratio": [l4_lo, l4_hi],
        "verdict": "non-dispersive confirmed" if ok else "dispersion detected",
    }


# -- modewise estimates ----------------------------------------------------


class InnerCutoff:
    """A bump chi-tilde with chi * chi-tilde = chi-tilde for the default chi."""

    def __init__(self, lo=1.02, hi=1.23, outer=None):
        outer = outer or DyadicCutoff()
        if not (1.0 <= lo < hi <= outer.flat_end):
            raise ConfigError("inner bump must sit inside the flat interval")
        self.lo, self.hi = float(lo), float(hi)
        self.margin = (hi - lo) / 4.0

    def chi(self, rho):
        rho = np.asarray(rho, dtype=float)
        return (_smooth_step((rho - self.lo) / self.margin)
                * _smooth_step((self.hi - rho) / self.margin))


def block_label_of(m, I, d1=1):
    """The dyadic A with A <= 1 + (2m + d1) I < 2A."""
    v = 1.0 + (2 * m + d1) * I
    return 2.0 ** math.floor(math.log2(v))


def member_scale(m, A, d1=1):
    """The power-of-two I putting mode m inside block A."""
    _pow2(A, "block label A")
    j = math.ceil(math.log2((A - 1.0) / (2 * m + d1))) if A > 1 else None
    if j is None:
        # A = 1 owns every small scale; pick the largest
        j = math.floor(math.log2(1.0 / (2 * m + d1)))
        while 1.0 + (2 * m + d1) * 2.0**j >= 2.0:
            j -= 1
    I = 2.0**j
    if not A <= 1.0 + (2 * m + d1) * I < 2 * A:
        raise ConfigError("no dyadic scale puts mode %d inside block %g" % (m, A))
    return I


def modewise_geometry(m, I, d1=1, d2=2, case="euclidean", K_max=16):
    if case == "euclidean":
        L = 16.0 * math.pi / I
        quad = int(math.ceil((14 + 2 * m) * 2.0)) + 16
        return Geometry(d1=d1, d2=d2, L=L, K_max=K_max, m_max=m,
                        quad_order=quad, x_scale=float(I))
    return Geometry(d1=d1, d2=d2, case="torus", K_max=K_max, m_max=m,
                    x_scale=float(I))


def mode_datum(geom, m, I, rng, cutoff=None):
    """Unit random mode-m datum concentrated where chi(|eta|/I) is active."""
    cutoff = cutoff or DyadicCutoff()
    u = project_mode(random_field(geom, rng), m)
    w = cutoff.chi(geom.eta_abs_shell / I)
    keep = (w > 1e-3)[geom.shell_of_flat]
    fc = u.flat()
    fc[:, ~keep] = 0.0
    v = SpectralField(geom, fc.reshape(u.coeffs.shape))
    n = v.l2_norm()
    if n == 0.0:
        raise NumericalError("annulus at scale %g meets no lattice frequency" % I)
    return v * (1.0 / n)


def modewise_strichartz_check(m, I, triple, case="euclidean", samples=8,
                              seed=0, epsilon=0.0, c_T=3.0, n_y=48, K_max=16,
                              gluing_windows=0):
    """Quotients of the frozen-mode flow against C'(A, m) times the x-weight.

    The compact case runs on the torus with the horizon capped by the
    modewise window 1 / ((m+1) A^(sigma-1)); setting gluing_windows > 1
    additionally reports the full-horizon norm over that many windows next
    to the glued one (they agree: p-th powers of the time norm add).
    """
    sigma = float(triple.sigma)
    A = block_label_of(m, I, triple.d1)
    geom = modewise_geometry(m, I, triple.d1, triple.d2, case, K_max)
    cutoff = DyadicCutoff()
    lam_bar = (2 * m + triple.d1) * 1.25 * I
    T = c_T / lam_bar**sigma
    if case == "compact":
        T = min(T, modewise_timescale(m, A, sigma, 1.0))
    s_x = (triple.d1 + epsilon) * (0.5 - float(1 / triple.q if triple.q
                                                != math.inf else 0.0))
    cprime = modewise_constant_prime(A, m, sigma, triple.d1, triple.d2,
                                     triple.r)
    quotients = []
    last = None
    for si in range(samples):
        rng = np.random.default_rng(np.random.SeedSequence([seed, m, si]))
        u0 = mode_datum(geom, m, I, rng, cutoff)
        times = time_grid(T, datum_lambda_max(u0), sigma)
        series = [evolve(apply_cutoff(u0, I, cutoff), sigma, float(t), "plus",
                         frozen_m=m) for t in times]
        num = mixed_norm(series, MixedNormSpec(triple.p, triple.q, triple.r,
                                               times, n_y))
        den = cprime * x_sobolev_norm(u0, s_x)
        quotients.append(num / den)
        last = (series, times)
    half = max(quotients[: max(1, samples // 2)])
    sup = max(quotients)
    report = {
        "m": m, "I": I, "A": A, "sigma": sigma, "case": case, "T": T,
        "samples": samples, "sup_quotient": sup, "quotients": quotients,
        "flagged": sup > 1.5 * half,
    }
    if gluing_windows > 1 and triple.p != math.inf:
        report["gluing"] = _gluing_norms(last[0], last[1], float(triple.p),
                                         triple, n_y, gluing_windows)
    return report


def _gluing_norms(series, times, p, triple, n_y, windows):
    """Full-horizon time norm vs the p-th-power sum over subwindows."""
    n = len(times)
    cuts = np.linspace(0, n - 1, windows + 1).round().astype(int)
    full = mixed_norm(series, MixedNormSpec(triple.p, triple.q, triple.r,
                                            times, n_y))
    acc = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        sub = mixed_norm(series[a:b + 1],
                         MixedNormSpec(triple.p, triple.q, triple.r,
                                       times[a:b + 1], n_y))
        acc += sub**p
    return {"full": full, "glued": acc ** (1.0 / p), "windows": int(windows)}


def modewise_sweep(m_values, A, triple, case="euclidean", samples=8, seed=0,
                   **kw):
    """Quotient/C' landscape across modes inside one block."""
    out = []
    for m in m_values:
        I = member_scale(m, A, triple.d1)
        out.append(modewise_strichartz_check(m, I, triple, case, samples,
                                             seed, **kw))
    return out
