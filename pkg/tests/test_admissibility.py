"""Exponent arithmetic, restriction windows, discrete mixed norms."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from grushin.admissibility import (
    INF,
    AdmissibleTriple,
    MixedNormSpec,
    admissible_table,
    as_exponent,
    format_table_csv,
    gamma,
    holder_conjugate,
    inv,
    is_admissible,
    mixed_norm,
    sobolev_gap,
    solve_p,
)
from grushin.errors import ConfigError, NumericalError
from grushin.fields import Geometry, SpectralField, random_field


# -- rational plumbing -------------------------------------------------------

def test_as_exponent_forms():
    assert as_exponent("4/3") == Fraction(4, 3)
    assert as_exponent(6) == 6
    assert as_exponent(1.5) == Fraction(3, 2)
    assert as_exponent("inf") == INF
    assert as_exponent(math.inf) == INF


def test_inv_and_conjugate():
    assert inv(INF) == 0
    assert inv(4) == Fraction(1, 4)
    assert holder_conjugate(INF) == 1
    assert holder_conjugate(1) == INF
    assert holder_conjugate(4) == Fraction(4, 3)
    assert holder_conjugate(2) == 2


# -- gamma and the Sobolev comparison ----------------------------------------

def test_gamma_vanishes_at_two_two():
    for sig in (1, Fraction(3, 2), 2):
        assert gamma(2, 2, sig, 3, 5) == 0


def test_gamma_frozen_values():
    assert gamma(2, 6, 1, 1, 2) == 1
    assert gamma(2, 6, Fraction(3, 2), 1, 2) == Fraction(1, 3)


def test_gamma_sigma_two_drops_r():
    assert gamma(2, 17, 2, 1, 2) == 0
    assert gamma(4, 6, 2, 3, 2) == 3 * Fraction(1, 4)


def test_sobolev_gap_frozen():
    assert sobolev_gap(2, 2, 1, 1, 2)[2] == 0
    g_sob, g_stri, gap = sobolev_gap(2, 6, 1, 1, 2)
    assert (g_sob, g_stri, gap) == (Fraction(4, 3), 1, Fraction(1, 3))
    assert sobolev_gap(2, 6, Fraction(3, 2), 1, 2)[2] == 1


@given(
    r1=st.sampled_from([2, Fraction(5, 2), 3, 4, 6, 12, INF]),
    r2=st.sampled_from([2, Fraction(5, 2), 3, 4, 6, 12, INF]),
    q=st.sampled_from([2, 3, 4, INF]),
    sig=st.sampled_from([1, Fraction(5, 4), Fraction(3, 2), 2]),
)
def test_gamma_monotone_in_r(r1, r2, q, sig):
    lo, hi = sorted([r1, r2], key=inv, reverse=True)
    assert gamma(q, lo, sig, 1, 2) <= gamma(q, hi, sig, 1, 2)


# -- admissibility -----------------------------------------------------------

def test_euclidean_example_triple():
    ok, why = is_admissible(AdmissibleTriple(6, 2, 6, 1, 1, 2))
    assert ok, why
    assert AdmissibleTriple(6, 2, 6, 1, 1, 2).scaling_defect() == 0


def test_sentinel_triple():
    ok, why = is_admissible(AdmissibleTriple(INF, 2, 2, 1, 1, 2))
    assert ok and "sentinel" in why
    ok, _ = is_admissible(AdmissibleTriple(INF, 2, 2, Fraction(3, 2), 1, 1))
    assert ok


def test_boundary_rejected():
    ok, why = is_admissible(AdmissibleTriple(4, 2, 4, 1, 1, 2))
    assert not ok and "window" in why


def test_nondispersive_rejected():
    ok, why = is_admissible(AdmissibleTriple(6, 2, 6, 1, 1, 1))
    assert not ok and why == "non-dispersive case excluded"


def test_compact_floor_depends_on_p():
    ok, _ = is_admissible(AdmissibleTriple(6, 2, 6, 1, 1, 2, case="compact"))
    assert not ok
    p = solve_p(2, 12, 1, 1, 2)
    ok, why = is_admissible(AdmissibleTriple(p, 2, 12, 1, 1, 2, case="compact"))
    assert ok, why


def test_solve_p_values():
    assert solve_p(2, 6, 1, 1, 2) == 6
    assert solve_p(2, 2, Fraction(3, 2), 1, 2) == INF


def test_scaling_is_an_equality():
    sig = Fraction(3, 2)
    for j in range(1, 9):
        dr = Fraction(1, 4) + j * Fraction(1, 40)
        if dr >= Fraction(1, 2):
            continue
        r = 1 / (Fraction(1, 2) - dr)
        p = solve_p(2, r, sig, 1, 2)
        if p == INF or p < 2:
            continue
        ok, why = is_admissible(AdmissibleTriple(p, 2, r, sig, 1, 2))
        assert ok, why
        bumped = AdmissibleTriple(float(p) + 0.01, 2, r, sig, 1, 2)
        ok, why = is_admissible(bumped)
        assert not ok and "scaling" in why


def test_triple_validation():
    with pytest.raises(ConfigError):
        AdmissibleTriple(1.5, 2, 2)
    with pytest.raises(ConfigError):
        AdmissibleTriple(4, 2, 4, sigma=2.5)
    with pytest.raises(ConfigError):
        AdmissibleTriple(4, 2, 4, case="flat")
    with pytest.raises(ConfigError):
        AdmissibleTriple(4, 2, 4, d2=0)


# -- table dump --------------------------------------------------------------

def test_table_contains_reference_row():
    rows = admissible_table(1, 2, 1)
    target = (6, 2, 6, 1, Fraction(4, 3), Fraction(1, 3))
    assert any(tuple(row) == target for row in rows)
    for row in rows:
        ok, why = is_admissible(AdmissibleTriple(row[2], row[1], row[0], 1, 1, 2))
        assert ok, why


def test_table_csv_format():
    text = format_table_csv(admissible_table(1, 2, 1))
    assert text.splitlines()[0] == "r,q,p,gamma,gamma_sob,gap"
    assert "6,2,6,1,4/3,1/3" in text.splitlines()


def test_table_rejects_nondispersive():
    with pytest.raises(ConfigError):
        admissible_table(1, 1, 1)


def test_table_fractional_case():
    rows = admissible_table(1, 2, Fraction(3, 2))
    assert rows
    for row in rows:
        trip = AdmissibleTriple(row[2], row[1], row[0], Fraction(3, 2), 1, 2)
        assert is_admissible(trip)[0]
    # d2 = 1 leaves no room: the floor 1/(2 d2) meets the reachable maximum
    assert admissible_table(1, 1, Fraction(3, 2)) == []


# -- mixed norms -------------------------------------------------------------

@pytest.fixture(scope="module")
def geom():
    return Geometry(d1=1, d2=1, case="torus", K_max=4, m_max=3)


def test_mixed_norm_zero_field(geom):
    spec = MixedNormSpec(4, 2, 6, np.linspace(0.0, 1.0, 5))
    series = [SpectralField.zeros(geom)] * 5
    assert mixed_norm(series, spec) == 0.0


def test_mixed_norm_parseval_slice(geom):
    rng = np.random.default_rng(np.random.SeedSequence([21, 5]))
    u = random_field(geom, rng)
    spec = MixedNormSpec(INF, 2, 2, [0.0])
    assert abs(mixed_norm([u], spec) - u.l2_norm()) < 1e-8


def test_mixed_norm_separable(geom):
    u = SpectralField.zeros(geom)
    k_pos = int(np.where(geom.k_axis == 2)[0][0])
    u.coeffs[0, k_pos] = 0.7
    times = np.linspace(0.0, 2.0, 9)
    spec = MixedNormSpec(4, 2, 6, times)
    got = mixed_norm([u] * 9, spec)
    want = 2.0**0.25 * 0.7 * geom.L ** (1.0 / 6.0 - 0.5)
    assert abs(got - want) < 1e-6


def test_mixed_norm_sup_in_x(geom):
    u = SpectralField.zeros(geom)
    k_pos = int(np.where(geom.k_axis == 1)[0][0])
    u.coeffs[0, k_pos] = 1.0
    spec = MixedNormSpec(INF, INF, INF, [0.0])
    want = np.pi**-0.25 / np.sqrt(geom.L)
    assert abs(mixed_norm([u], spec) - want) < 0.05 * want


def test_mixed_norm_overflow(geom):
    u = SpectralField.zeros(geom)
    u.coeffs[0, 0] = np.inf
    spec = MixedNormSpec(INF, 2, 2, [0.0])
    with np.errstate(invalid="ignore"), pytest.raises(NumericalError):
        mixed_norm([u], spec)


def test_mixed_norm_validation(geom):
    with pytest.raises(ConfigError):
        MixedNormSpec(0.5, 2, 2, [0.0])
    with pytest.raises(ConfigError):
        MixedNormSpec(2, 2, 2, [1.0, 0.5])
    with pytest.raises(ConfigError):
        MixedNormSpec(2, 2, 2, [0.0])
    spec = MixedNormSpec(INF, 2, 2, [0.0, 1.0])
    with pytest.raises(ConfigError):
        mixed_norm([SpectralField.zeros(geom)], spec)
