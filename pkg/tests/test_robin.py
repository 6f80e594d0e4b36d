"""Robin constants: flat closed form, curved-torus corrections, reports."""

import math

import numpy as np
import pytest

from svmtori import pendulum, robin

R_SPHERE = -(1.0 + math.log(math.pi)) / (4.0 * math.pi)


def test_flat_square_closed_form():
    # |eta(i)| = Gamma(1/4) / (2 * pi^{3/4}) turns the a=1 value into gammas
    eta_i = math.gamma(0.25) / (2.0 * math.pi**0.75)
    expected = -math.log(2.0 * math.pi) / (2.0 * math.pi) - math.log(eta_i**4) / (4.0 * math.pi)
    assert abs(robin.robin_flat(1.0) - expected) < 1e-14
    # frozen regression value
    assert abs(robin.robin_flat(1.0) - (-0.208577793243501)) < 1e-13


def test_flat_eta_against_high_precision():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    for a in (1.0, 1.37, 2.5):
        tau = mp.mpc(0, a * a)
        eta = mp.qp(mp.exp(2j * mp.pi * tau)) * mp.exp(2j * mp.pi * tau / 24)
        ref = float(mp.log(abs(eta) ** 4 * a * a))
        assert abs(robin.log_eta4_a2(a) - ref) < 1e-13


def test_flat_modular_symmetry():
    for a in (1.3, 2.7, 5.0):
        assert abs(robin.robin_flat(a) - robin.robin_flat(1.0 / a)) < 1e-12


def test_flat_square_is_minimum():
    assert robin.robin_flat(1.0) < robin.robin_flat(1.2) < robin.robin_flat(1.5)


def test_rectangle_consistency():
    a = 1.8
    assert abs(robin.robin_flat_rect(a, 1.0 / a) - robin.robin_flat(a)) < 1e-14
    # scaling both sides by c shifts by log(c)/(2*pi)
    base = robin.robin_flat_rect(1.0, 2.0)
    scaled = robin.robin_flat_rect(3.0, 6.0)
    assert abs(scaled - base - math.log(3.0) / (2.0 * math.pi)) < 1e-12


def test_sphere_value():
    assert abs(robin.robin_sphere() - R_SPHERE) < 1e-15
    assert abs(robin.robin_sphere() - (-0.170672181464924)) < 1e-14


def test_difference_routes_agree():
    orbit = pendulum.solve_orbit(1.5)
    dq, de, da = robin.robin_difference(orbit)
    assert abs(dq - de) < 1e-10
    assert abs(dq - da) < 1e-10
    assert dq < 0.0


def test_okikiolu_against_conformal_green_route():
    """Independent check: R_g from the flat Green's function of the metric.

    For g = e^f g_0 the Green's function is G_0 + w(p) + w(q) + kappa with
    w'' = e^f - 1 (zero-mean), kappa = -int e^f w, and
    R_g(q) = R_0 + 2 w(q) + f(q)/(4 pi) + kappa.  On a steady-vortex profile
    this is constant in q and must equal the orbit-average formula.
    """
    a = 1.5
    orbit = pendulum.solve_orbit(a, 8192)
    f = orbit.f
    k = 2.0 * np.pi * np.fft.rfftfreq(f.size, d=a / f.size)
    w_hat = np.fft.rfft(np.exp(f) - 1.0)
    w_hat[1:] /= -k[1:] ** 2
    w_hat[0] = 0.0
    w = np.fft.irfft(w_hat, f.size)
    r_g = robin.robin_flat(a) + 2.0 * w + f / (4.0 * np.pi) - np.mean(np.exp(f) * w)
    assert r_g.max() - r_g.min() < 1e-10  # constancy = steady-vortex property
    assert abs(np.mean(r_g) - robin.robin_okikiolu(a)) < 1e-9


def test_okikiolu_approaches_sphere():
    r3 = robin.robin_okikiolu(3.0)
    r6 = robin.robin_okikiolu(6.0)
    assert abs(r6 - R_SPHERE) < abs(r3 - R_SPHERE)
    assert abs(r6 - R_SPHERE) < 1e-3


def test_gauss_bonnet():
    orbit = pendulum.solve_orbit(2.0)
    assert abs(robin.gauss_bonnet_residual(orbit)) < 1e-10
    k_profile = robin.curvature_profile(orbit)
    assert k_profile.max() > 0.0 > k_profile.min()  # genus-1: signed curvature


def test_report_consistency():
    rep = robin.robin_report(1.5)
    assert rep.a == 1.5
    assert abs(rep.R1 - rep.R0 - rep.diff_action) < 1e-15
    assert abs(rep.T - 1.5) < 1e-11
    assert rep.R1 < rep.R0


def test_figure2_table_monotone():
    grid = [1.26, 1.5, 2.0, 3.0, 6.0]
    rows = robin.figure2_table(grid)
    diffs = [r.R1 - r.R0 for r in rows]
    assert all(d < 0.0 for d in diffs)
    assert all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:]))
    r1s = [r.R1 for r in rows]
    gaps = [abs(v - R_SPHERE) for v in r1s]
    assert all(g2 < g1 for g1, g2 in zip(gaps, gaps[1:]))
