"""Kernel quadrature against independent oracles, decay laws, mode constants."""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import j0

from grushin.dispersion import (
    DecayFit,
    KernelQuery,
    fit_decay,
    format_decay_csv,
    kernel,
    modewise_constant,
    modewise_constant_prime,
    phase_hessian_det,
    sphere_transform,
    summability_ratio,
    sup_kernel,
    surface_measure_decay,
)
from grushin.errors import ConfigError, QuadratureError
from grushin.fields import DyadicCutoff

CUT = DyadicCutoff()


# -- kernel values against oracles -------------------------------------------

def test_kernel_at_rest_d1():
    # closed form: the annulus profile integrates to 13/8 over the line
    k = kernel(KernelQuery(1, 1.5, 0.0, [0.0]))
    assert abs(k - 13.0 / 8.0) < 1e-9
    direct, _ = quad(CUT.chi, 0.0, 2.5, limit=200)
    assert abs(k - 2.0 * direct) < 1e-8


def test_kernel_at_rest_higher_d():
    for d, area in ((2, 2 * np.pi), (3, 4 * np.pi)):
        k = kernel(KernelQuery(d, 1.0, 0.0, [0.0] * d))
        direct, _ = quad(lambda r: CUT.chi(r) * r ** (d - 1), 0.0, 2.5, limit=200)
        assert abs(k - area * direct) < 1e-8


def test_kernel_oscillatory_vs_adaptive_quad():
    t = 50.0
    re, _ = quad(lambda r: CUT.chi(r) * np.cos(t * r * r), 0, 2.5, limit=2000)
    im, _ = quad(lambda r: CUT.chi(r) * np.sin(t * r * r), 0, 2.5, limit=2000)
    want = 2.0 * complex(re, im)
    got = kernel(KernelQuery(1, 2.0, t, [0.0]))
    assert abs(got - want) < 1e-6


def test_kernel_vs_tensor_grid():
    # independent 2d tensor trapezoid vs the radial reduction
    t, Y, sigma = 3.0, np.array([1.2, -0.7]), 1.5
    g = np.linspace(-2.5, 2.5, 1201)
    h = g[1] - g[0]
    ex, ey = np.meshgrid(g, g, indexing="ij")
    rho = np.hypot(ex, ey)
    integrand = CUT.chi(rho) * np.exp(1j * (t * rho**sigma - Y[0] * ex - Y[1] * ey))
    want = integrand.sum() * h * h
    got = kernel(KernelQuery(2, sigma, t, Y))
    assert abs(got - want) < 1e-6


def test_kernel_nonstationary_zone():
    for d, sigma in ((1, 1.5), (2, 1.0)):
        q = KernelQuery(d, sigma, 100.0, [1000.0] + [0.0] * (d - 1))
        assert abs(kernel(q)) <= 1e-4


def test_kernel_rotation_invariance():
    th = 0.83
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    Y = np.array([0.9, 1.7])
    a = kernel(KernelQuery(2, 1.25, 7.0, Y))
    b = kernel(KernelQuery(2, 1.25, 7.0, R @ Y))
    assert abs(a - b) < 1e-12


def test_kernel_budget_refused():
    with pytest.raises(QuadratureError, match="underresolved"):
        kernel(KernelQuery(1, 1.0, 2000.0, [0.0]))


def test_query_validation():
    with pytest.raises(ConfigError):
        KernelQuery(4, 1.0, 1.0, [0.0] * 4)
    with pytest.raises(ConfigError):
        KernelQuery(1, 0.5, 1.0, [0.0])
    with pytest.raises(ConfigError):
        KernelQuery(1, 1.0, -1.0, [0.0])
    with pytest.raises(ConfigError):
        KernelQuery(2, 1.0, 1.0, [0.0])


# -- decay envelopes -----------------------------------------------------------

def test_sup_kernel_finds_resonance():
    # at sigma = 1 the stationary offset is exactly t for every rho
    sup, s_at, far = sup_kernel(1.0, 2, 200.0)
    assert abs(s_at - 200.0) < 5.0
    assert far < 0.01 * sup


@pytest.mark.parametrize("sigma,d,want", [
    (2.0, 2, -1.0),
    (1.0, 2, -0.5),
    (1.0, 1, 0.0),
])
def test_decay_slopes(sigma, d, want):
    fit = fit_decay(sigma, d, t_grid=np.geomspace(3.0, 300.0, 8))
    assert abs(fit.slope - want) < 0.1
    assert fit.monotone


def test_fit_grid_validation():
    with pytest.raises(ConfigError):
        fit_decay(2.0, 1, t_grid=np.geomspace(10.0, 100.0, 5))


def test_decay_csv():
    fit = DecayFit(1.5, 1, np.array([10.0, 100.0]), np.array([0.5, 0.1]),
                   np.zeros(2), np.zeros(2), -0.7, True, False)
    text = format_decay_csv(fit)
    lines = text.splitlines()
    assert lines[0] == "sigma,d,t,sup_k,slope"
    assert len(lines) == 3 and lines[1].startswith("1.5,1,10,")


# -- stationary phase ingredients ---------------------------------------------

def test_hessian_determinant_formula():
    rng = np.random.default_rng(np.random.SeedSequence([31, 7]))
    for sigma in (1.25, 1.5, 1.75):
        for dim in (1, 2, 3):
            eta = rng.normal(size=dim)
            eta *= (0.5 + rng.random()) / np.linalg.norm(eta) * 2.0
            want = sigma**dim * (sigma - 1.0) * np.linalg.norm(eta) ** (
                dim * (sigma - 2.0))
            got = phase_hessian_det(eta, sigma)
            assert abs(got - want) < 1e-6 * want


def test_sphere_transform_closed_forms():
    for xi in (0.5, 3.0, 20.0):
        assert abs(sphere_transform(2, xi) - 2 * np.pi * j0(xi)) < 1e-8
        assert abs(sphere_transform(3, xi) - 4 * np.pi * np.sin(xi) / xi) < 1e-8


def test_surface_measure_decay():
    for d, want in ((2, -0.5), (3, -1.0)):
        slope, _, _ = surface_measure_decay(d)
        assert abs(slope - want) < 0.1


# -- mode constants -------------------------------------------------------------

def test_modewise_constant_unit():
    for (r, p) in ((6, 6), (4, 8), (2, np.inf)):
        assert modewise_constant(1, 0, 1.0, 1, 2, r, p) == 1.0


def test_modewise_constant_prime_frozen():
    for A in (1.0, 4.0, 32.0):
        for m in (0, 2, 7):
            want = (A**1.5 / (m + 1) ** 2) ** (1.0 / 3.0)
            assert abs(modewise_constant_prime(A, m, 1.0, 1, 2, 6) - want) < 1e-14
    with pytest.raises(ConfigError):
        modewise_constant_prime(2.0, 0, 1.0, 1, 1, 6)


def test_modewise_constant_compact_branch():
    from grushin.admissibility import gamma

    a = modewise_constant(8.0, 3, 1.5, 1, 2, 6, 6, case="compact")
    g = float(gamma(2, 6, 1.5, 1, 2))
    want = 8.0 ** (g / 2 + 0.5 / 6) / 4.0 ** (2.0 / 3.0 - 1.0 / 6.0)
    assert abs(a - want) < 1e-14


def test_summability_ratio_constant_in_A():
    A = [2.0**j for j in range(9)]
    ratios = summability_ratio(A, 1.0, 1, 2, 6, 6)
    assert ratios.max() / ratios.min() < 1.0 + 1e-10
    with pytest.raises(ConfigError):
        summability_ratio(A, 1.0, 1, 2, 4, 8)
