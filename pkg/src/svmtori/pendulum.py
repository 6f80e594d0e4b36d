"""Periodic orbits of the pendulum-type equation f'' = 8*pi*(1 - e^f).

The equation is Hamiltonian with

    H(f, p) = p**2/2 + 8*pi*(e^f - f - 1),

a single equilibrium at the origin and a potential well U(f) = 8*pi*(e^f-f-1)
that grows exponentially for f > 0 and linearly for f < 0.  Every positive
energy level E carries a periodic orbit oscillating between the two roots
f_min(E) <= 0 <= f_max(E) of U(f) = E.  The period T(E) increases strictly
from T(0+) = sqrt(pi/2) and the orbit of period a defines the conformal
factor e^{f(x)} of a non-flat torus with unit volume.

Conventions: orbits are phased to start at the minimum of f, i.e. the initial
condition is (f_min(E), 0), and sampled on the uniform grid x_i = i*a/n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import brentq
from scipy.special import roots_legendre

EIGHT_PI = 8.0 * np.pi
PERIOD_AT_ZERO = float(np.sqrt(np.pi / 2.0))  # linearized period T(0+)

_QUAD_NODES = 512
_GL_THETA, _GL_WEIGHT = roots_legendre(_QUAD_NODES)
# map Gauss-Legendre nodes from (-1,1) to (0, pi/2)
_GL_THETA = 0.25 * np.pi * (_GL_THETA + 1.0)
_GL_WEIGHT = 0.25 * np.pi * _GL_WEIGHT


def _well_gap(f):
    """e^f - f - 1, evaluated without cancellation for small |f|."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    small = np.abs(f) < 1e-2
    fs = f[small]
    # truncated exponential series starting at the quadratic term
    acc = np.zeros_like(fs)
    term = np.ones_like(fs)
    fact = 1.0
    for k in range(2, 10):
        fact *= k
        term = term * fs if k > 2 else fs * fs
        acc += term / fact
    out[small] = acc
    fl = f[~small]
    out[~small] = np.expm1(fl) - fl
    return out if out.ndim else float(out)


def hamiltonian(f: float, p: float) -> float:
    """First integral H(f,p) = p^2/2 + 8*pi*(e^f - f - 1); zero only at (0,0)."""
    return 0.5 * p * p + EIGHT_PI * _well_gap(f)


def vector_field(f: float, p: float):
    """Phase-space derivative (df/dx, dp/dx) = (p, 8*pi*(1 - e^f))."""
    return p, EIGHT_PI * (1.0 - np.exp(f))


def turning_points(E: float):
    """Roots (f_min, f_max) of 8*pi*(e^f - f - 1) = E with f_min <= 0 <= f_max."""
    if E < 0.0:
        raise ValueError(f"energy must be nonnegative, got E={E}")
    if E == 0.0:
        return 0.0, 0.0
    c = E / EIGHT_PI

    def gap(f):
        return _well_gap(f) - c

    # right root: e^f - f - 1 is increasing on f > 0
    hi = 1.0
    while gap(hi) < 0.0:
        hi *= 2.0
    f_max = brentq(gap, 0.0, hi, xtol=1e-15, rtol=8.9e-16)
    # left root: the well is asymptotically linear, f_min ~ -(c + 1)
    lo = -(c + 1.0)
    if gap(lo) < 0.0:  # paranoia: only possible through rounding at tiny E
        lo -= 1.0
    f_min = brentq(gap, lo, 0.0, xtol=1e-15, rtol=8.9e-16)
    return f_min, f_max


def _orbit_quadrature(E: float):
    """Common setup for period/action: theta-substituted integrand samples.

    Substituting f = f_min + (f_max - f_min)*sin^2(theta) removes the
    inverse-square-root endpoint singularities, so Gauss-Legendre in theta
    converges spectrally.  E - U(f) is evaluated as U(f_turn) - U(f) in a
    cancellation-free expm1 form (writing E = U at the nearer turning point),
    which stays positive and relatively accurate arbitrarily close to the
    turning points and for arbitrarily small E.
    """
    f_min, f_max = turning_points(E)
    span = f_max - f_min
    st = np.sin(_GL_THETA)
    f = f_min + span * st * st
    dfdtheta = span * np.sin(2.0 * _GL_THETA)
    left = _GL_THETA < 0.25 * np.pi
    gap_from_turn = np.empty_like(f)
    # U(f_min) - U(f) with delta = f - f_min >= 0
    d = f[left] - f_min
    gap_from_turn[left] = d - np.exp(f_min) * np.expm1(d)
    # U(f_max) - U(f) with delta = f_max - f >= 0
    d = f_max - f[~left]
    gap_from_turn[~left] = np.exp(f[~left]) * np.expm1(d) - d
    v2 = 2.0 * EIGHT_PI * np.maximum(gap_from_turn, 0.0)
    return np.sqrt(v2), dfdtheta


def period(E: float) -> float:
    """Period T(E) = 2 * integral df / sqrt(2(E - U(f))) of the closed orbit."""
    if E <= 0.0:
        raise ValueError(
            "period(E) requires E > 0; the E->0 limit is exposed via period_zero_limit()"
        )
    speed, dfdtheta = _orbit_quadrature(E)
    return 2.0 * float(np.dot(_GL_WEIGHT, dfdtheta / speed))


def period_zero_limit() -> float:
    """T(E->0+) by Richardson extrapolation of the quadrature period."""
    es = np.array([1e-4, 5e-5, 2.5e-5])
    ts = [period(e) for e in es]
    # Neville elimination of the O(E) and O(E^2) terms at E = 0
    for level in range(1, len(es)):
        ts = [
            (es[i] * ts[i + 1] - es[i + level] * ts[i]) / (es[i] - es[i + level])
            for i in range(len(ts) - 1)
        ]
    return float(ts[0])


def action(E: float) -> float:
    """Action I(E) = (1/pi) * integral sqrt(2(E - U(f))) df (phase area / 2pi)."""
    if E < 0.0:
        raise ValueError(f"energy must be nonnegative, got E={E}")
    if E == 0.0:
        return 0.0
    speed, dfdtheta = _orbit_quadrature(E)
    return float(np.dot(_GL_WEIGHT, speed * dfdtheta)) / np.pi


def energy_for_period(a: float) -> float:
    """Invert T(E) = a on the principal branch.

    Only defined above the bifurcation threshold sqrt(pi/2) where nontrivial
    tori exist; below it the flat solution is the only one.
    """
    if not a > PERIOD_AT_ZERO:
        raise ValueError(
            f"no nontrivial orbit: need a > sqrt(pi/2) = {PERIOD_AT_ZERO:.10f}, got a={a}"
        )
    e_lo = 1e-14
    if period(e_lo) >= a:
        raise ValueError(
            f"a={a} is inside the root tolerance of the threshold sqrt(pi/2); "
            "no resolvable orbit"
        )
    e_hi = 1.0
    while period(e_hi) < a:
        e_hi *= 4.0
    return brentq(lambda e: period(e) - a, e_lo, e_hi, xtol=1e-300, rtol=8.9e-16)


# ---------------------------------------------------------------------------
# fixed-step symplectic integration (Yoshida 6th-order composition)
# ---------------------------------------------------------------------------

_W1 = 0.78451361047755726382
_W2 = 0.23557321335935813368
_W3 = -1.17767998417887100695
_W0 = 1.0 - 2.0 * (_W1 + _W2 + _W3)
_YOSHIDA6 = np.array([_W1, _W2, _W3, _W0, _W3, _W2, _W1])


@njit(cache=True)
def _integrate_samples(f0, p0, h_sample, n_samples, substeps, coeffs):
    """March n_samples intervals of the leapfrog composition, recording states.

    State updates use Kahan-compensated accumulation: at high energies the
    march spans ~1e6 substeps and uncompensated roundoff random-walks the
    energy above the 1e-9 drift budget.
    """
    f_out = np.empty(n_samples)
    p_out = np.empty(n_samples)
    f = f0
    p = p0
    fc = 0.0  # compensation carries
    pc = 0.0
    h = h_sample / substeps
    for i in range(n_samples):
        f_out[i] = f
        p_out[i] = p
        for _ in range(substeps):
            for c in coeffs:
                hc = c * h
                d = 0.5 * hc * EIGHT_PI * (1.0 - np.exp(f)) - pc
                t = p + d
                pc = (t - p) - d
                p = t
                d = hc * p - fc
                t = f + d
                fc = (t - f) - d
                f = t
                d = 0.5 * hc * EIGHT_PI * (1.0 - np.exp(f)) - pc
                t = p + d
                pc = (t - p) - d
                p = t
    return f_out, p_out, f, p


@dataclass
class Orbit:
    """One minimal period of f on the uniform grid x_i = i*a/n, i = 0..n-1."""

    a: float
    E: float
    x: np.ndarray
    f: np.ndarray
    p: np.ndarray
    closure_error: float = 0.0

    def __post_init__(self):
        if not (len(self.x) == len(self.f) == len(self.p)):
            raise ValueError("orbit sample arrays must have equal length")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def ef(self) -> np.ndarray:
        return np.exp(self.f)

    def energy_drift(self) -> float:
        h = 0.5 * self.p**2 + EIGHT_PI * _well_gap(self.f)
        return float(np.max(np.abs(h - self.E)))

    def mean_exp_f(self) -> float:
        """(1/a) * integral e^f dx by the periodic trapezoid rule (= plain mean)."""
        return float(np.mean(self.ef))


def default_substeps(E: float, a: float, n_samples: int) -> int:
    """Substep count keeping the absolute energy drift near 1e-10.

    The local stiffness is omega_max = sqrt(8*pi*e^{f_max}); the 6th-order
    drift scales like E*(omega*h)^6, so aim omega*h_sub <= target with
    target shrinking slowly as E grows.
    """
    if E <= 0.0:
        return 1
    _, f_max = turning_points(E)
    omega = np.sqrt(EIGHT_PI * np.exp(f_max))
    target = 0.008 / max(1.0, E) ** (1.0 / 6.0)
    h_sample = a / n_samples
    return max(1, int(np.ceil(omega * h_sample / target)))


def solve_orbit(a: float, n_samples: int = 4096, substeps: int | None = None) -> Orbit:
    """Integrate one period of the orbit with T(E) = a.

    Uses a fixed-step 6th-order symplectic composition; energy drift is
    monitored (Orbit.energy_drift), never corrected.
    """
    if n_samples < 64:
        raise ValueError(f"n_samples must be >= 64, got {n_samples}")
    E = energy_for_period(a)
    f_min, _ = turning_points(E)
    if substeps is None:
        substeps = default_substeps(E, a, n_samples)
    h_sample = a / n_samples
    f, p, f_end, p_end = _integrate_samples(
        f_min, 0.0, h_sample, n_samples, substeps, _YOSHIDA6
    )
    closure = float(np.hypot(f_end - f_min, p_end - 0.0))
    x = np.arange(n_samples) * h_sample
    return Orbit(a=a, E=E, x=x, f=f, p=p, closure_error=closure)


def tile_orbit(orbit: Orbit, k: int) -> Orbit:
    """Profile over a cell of width k*a containing k oscillations of f.

    The result is not a minimal-period orbit for k > 1; it is the sampled
    conformal factor of the torus whose fundamental cell holds k bumps.
    """
    if k < 1:
        raise ValueError("tile count must be >= 1")
    if k == 1:
        return orbit
    n = orbit.n
    x = np.arange(n * k) * (orbit.a / n)
    return Orbit(
        a=orbit.a * k,
        E=orbit.E,
        x=x,
        f=np.tile(orbit.f, k),
        p=np.tile(orbit.p, k),
        closure_error=orbit.closure_error,
    )


def shooting_period(E: float, rtol: float = 1e-12, atol: float = 1e-13) -> float:
    """Independent period via ODE shooting: first return of p to 0 going down.

    Integrates from (f_min, 0); p rises, vanishes at f_max after half a
    period, so T = 2 * t_event.  Used as the cross-check oracle for the
    quadrature period.
    """
    from scipy.integrate import solve_ivp

    if E <= 0.0:
        raise ValueError("shooting_period requires E > 0")
    f_min, _ = turning_points(E)

    def rhs(_, y):
        return [y[1], EIGHT_PI * (1.0 - np.exp(y[0]))]

    def p_vanishes(_, y):
        return y[1]

    p_vanishes.terminal = True
    p_vanishes.direction = -1.0

    t_guess = 4.0 * max(1.0, np.sqrt(2.0 * E) / (4.0 * np.pi) + 1.0)
    sol = solve_ivp(
        rhs,
        (0.0, t_guess),
        [f_min, 0.0],
        method="DOP853",
        rtol=rtol,
        atol=atol,
        events=p_vanishes,
        dense_output=False,
    )
    if not sol.t_events[0].size:
        raise RuntimeError(f"shooting integration found no return event for E={E}")
    return 2.0 * float(sol.t_events[0][0])
