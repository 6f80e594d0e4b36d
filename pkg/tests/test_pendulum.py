"""Hamiltonian orbit machinery: period function, action, symplectic orbits."""

import numpy as np
import pytest

from svmtori import pendulum


def test_hamiltonian_values():
    assert pendulum.hamiltonian(0.0, 0.0) == 0.0
    # V(f) = 8*pi*(e^f - f - 1)
    assert abs(pendulum.hamiltonian(1.0, 0.0) - pendulum.EIGHT_PI * (np.e - 2.0)) < 1e-12
    assert abs(pendulum.hamiltonian(0.0, 2.0) - 2.0) < 1e-15


def test_turning_points_bracket_well():
    for e in (1e-6, 1.0, 100.0):
        lo, hi = pendulum.turning_points(e)
        assert lo < 0.0 < hi
        assert abs(pendulum.hamiltonian(lo, 0.0) - e) < 1e-9 * max(e, 1.0)
        assert abs(pendulum.hamiltonian(hi, 0.0) - e) < 1e-9 * max(e, 1.0)


def test_period_zero_limit():
    assert abs(pendulum.period_zero_limit() - np.sqrt(np.pi / 2.0)) < 1e-9


def test_period_monotone_with_lower_bound():
    es = [10.0**k for k in range(-3, 4)]
    ts = [pendulum.period(e) for e in es]
    assert all(t2 > t1 for t1, t2 in zip(ts, ts[1:]))
    for e, t in zip(es, ts):
        assert t > np.sqrt(2.0 * e) / (4.0 * np.pi)


def test_period_against_shooting():
    for e in (0.1, 1.0, 50.0):
        assert abs(pendulum.period(e) - pendulum.shooting_period(e)) < 1e-8


def test_action_derivative_is_period():
    # H'(I) = 2*pi/T  <=>  dI/dE = T/(2*pi)
    e, h = 2.0, 1e-5
    di = (pendulum.action(e + h) - pendulum.action(e - h)) / (2.0 * h)
    assert abs(di - pendulum.period(e) / (2.0 * np.pi)) < 1e-9


def test_energy_for_period_inverts_period():
    a = 1.7
    e = pendulum.energy_for_period(a)
    assert abs(pendulum.period(e) - a) < 1e-11
    with pytest.raises(ValueError):
        pendulum.energy_for_period(1.0)  # below the a -> sqrt(pi/2) threshold


def test_orbit_invariants():
    orbit = pendulum.solve_orbit(1.5)
    assert orbit.n == 4096
    assert orbit.x[0] == 0.0
    assert orbit.p[0] == 0.0
    assert orbit.f[0] == orbit.f.min()  # starts at the well bottom
    assert orbit.energy_drift() < 1e-11
    assert orbit.closure_error < 1e-9
    # the conformal factor integrates to the flat cell volume (up to
    # integrator error; the continuum identity is exact)
    assert abs(orbit.mean_exp_f() - 1.0) < 1e-10


def test_orbit_symmetry():
    orbit = pendulum.solve_orbit(2.0, 1024)
    f, p = orbit.f, orbit.p
    # time-reversal symmetry about the midpoint
    assert np.max(np.abs(f[1:] - f[:0:-1])) < 1e-8
    assert np.max(np.abs(p[1:] + p[:0:-1])) < 1e-8


def test_tile_orbit():
    base = pendulum.solve_orbit(1.5, 512)
    tiled = pendulum.tile_orbit(base, 3)
    assert tiled.a == pytest.approx(4.5)
    assert tiled.n == 3 * base.n
    assert np.array_equal(tiled.f[:512], base.f)
    assert np.array_equal(tiled.f[512:1024], base.f)


def test_orbit_refinement_consistency():
    coarse = pendulum.solve_orbit(1.5, 256)
    fine = pendulum.solve_orbit(1.5, 1024)
    assert np.max(np.abs(fine.f[::4] - coarse.f)) < 1e-9
