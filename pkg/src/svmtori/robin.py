"""Robin functions of tori and the round sphere.

For the flat torus R^2/(a Z x a^-1 Z) the Robin function (log-regularized
Green's function on the diagonal) has the closed form

    R0(a) = -log(2*pi)/(2*pi) - log(|eta(i a^2)|^4 a^2)/(4*pi)

with eta the Dedekind eta function.  For the non-flat unit-volume torus
generated by a periodic orbit f of f'' = 8*pi*(1 - e^f), the difference
R1 - R0 to the flat Robin value admits three equivalent expressions (an
orbit quadrature, an energy form, and an action form); computing all three
and comparing is the main internal consistency check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import pendulum

TWO_PI = 2.0 * np.pi
FOUR_PI = 4.0 * np.pi


def log_eta4_a2(a: float) -> float:
    """log(|eta(i a^2)|^4 * a^2) by the q-series, q = e^{-2 pi a^2}.

    For a < 1 the a <-> 1/a symmetry (modular transformation of eta) is
    applied first so q <= e^{-2 pi} and a handful of factors suffice.
    """
    if a <= 0.0:
        raise ValueError(f"aspect parameter must be positive, got a={a}")
    if a < 1.0:
        a = 1.0 / a
    log_q = -TWO_PI * a * a
    q = np.exp(log_q)
    total = log_q / 6.0  # 4 * (1/24) * log q
    qn = q
    while qn > 1e-18:
        total += 4.0 * np.log1p(-qn)
        qn *= q
    return total + 2.0 * np.log(a)


def robin_flat(a: float) -> float:
    """Robin function of the flat torus with sides (a, 1/a), volume 1."""
    return -np.log(TWO_PI) / TWO_PI - log_eta4_a2(a) / FOUR_PI


def robin_flat_rect(l1: float, l2: float) -> float:
    """Robin function of the flat torus with arbitrary sides (l1, l2).

    Scaling the unit-volume torus by c = sqrt(l1*l2) shifts the
    log-regularized Green's value by log(c)/(2*pi).
    """
    if l1 <= 0.0 or l2 <= 0.0:
        raise ValueError("side lengths must be positive")
    c = np.sqrt(l1 * l2)
    return robin_flat(np.sqrt(l1 / l2)) + np.log(c) / TWO_PI


def robin_sphere() -> float:
    """Robin function of the round sphere of area 1: -(1 + log pi)/(4 pi)."""
    return -(1.0 + np.log(np.pi)) / FOUR_PI


def robin_difference(orbit: pendulum.Orbit):
    """Three independent evaluations of R1 - R0 for the orbit's torus.

    Returns (diff_quadrature, diff_energy, diff_action):

      diff_quadrature = (1/(4 pi a)) int f dx + (1/((8 pi)^2 a)) int f'^2 dx
      diff_energy     = -H/(32 pi^2) + (1/(32 pi^2 a)) int f'^2 dx
      diff_action     = (1/(32 pi^2)) (I * H'(I) - H),  H'(I) = 2 pi / T

    The integrals use the periodic trapezoid rule (plain means on the
    uniform grid); H'(I) is taken as 2 pi / T exactly rather than by
    differencing.
    """
    if not np.all(np.isfinite(orbit.f)) or not np.all(np.isfinite(orbit.p)):
        raise ValueError("orbit contains non-finite samples")
    mean_f = float(np.mean(orbit.f))
    mean_p2 = float(np.mean(orbit.p**2))
    E = orbit.E
    diff_quadrature = mean_f / FOUR_PI + mean_p2 / (64.0 * np.pi**2)
    diff_energy = -E / (32.0 * np.pi**2) + mean_p2 / (32.0 * np.pi**2)
    I = pendulum.action(E)
    diff_action = (I * TWO_PI / orbit.a - E) / (32.0 * np.pi**2)
    return diff_quadrature, diff_energy, diff_action


def robin_okikiolu(a: float, n_samples: int = 4096) -> float:
    """R1 of the non-flat torus of aspect a: flat value plus action-form diff."""
    orbit = pendulum.solve_orbit(a, n_samples)
    return robin_flat(a) + robin_difference(orbit)[2]


def curvature_profile(orbit: pendulum.Orbit) -> np.ndarray:
    """Gaussian curvature K1(x) = 4*pi*(1 - e^{-f}) along the orbit."""
    return FOUR_PI * (1.0 - np.exp(-orbit.f))


def gauss_bonnet_residual(orbit: pendulum.Orbit) -> float:
    """int K1 e^f dx over the period; zero for a genus-one surface."""
    k1 = curvature_profile(orbit)
    return float(np.mean(k1 * orbit.ef) * orbit.a)


@dataclass
class RobinReport:
    """Per-torus record backing one row of the difference/limit table."""

    a: float
    E: float
    T: float
    I: float
    R0: float
    diff_quadrature: float
    diff_energy: float
    diff_action: float
    R1: float
    K_profile: np.ndarray | None = field(default=None, repr=False)


def robin_report(a: float, n_samples: int = 4096, with_curvature: bool = False) -> RobinReport:
    """Assemble the full Robin record for one non-flat torus."""
    orbit = pendulum.solve_orbit(a, n_samples)
    dq, de, da_ = robin_difference(orbit)
    r0 = robin_flat(a)
    return RobinReport(
        a=a,
        E=orbit.E,
        T=orbit.a,
        I=pendulum.action(orbit.E),
        R0=r0,
        diff_quadrature=dq,
        diff_energy=de,
        diff_action=da_,
        R1=r0 + da_,
        K_profile=curvature_profile(orbit) if with_curvature else None,
    )


def figure2_table(a_grid, n_samples: int = 4096) -> list[RobinReport]:
    """RobinReport rows for an ascending grid of aspect parameters."""
    reports = [robin_report(a, n_samples) for a in sorted(a_grid)]
    return reports
