"""Isometric embedding of the cylinder with metric e^f (dx^2 + dy^2) as a
surface of revolution in R^3.

With f a periodic orbit of f'' = 8*pi*(1 - e^f) on a cell of width a, the map

    (x, y) |-> ( X(x), F(x) sin(2 pi a y), F(x) cos(2 pi a y) ),
    F = e^{f/2} / (2 pi a),    X' = sqrt( e^f (1 - f'^2 / (16 pi^2 a^2)) )

pulls the Euclidean metric back to e^f (dx^2 + dy^2); the radicand is bounded
below by 1 - 2E/(16 pi^2 a^2) > 0, so X is strictly increasing.  For large a
the profile is nearly spherical with a thin neck where f is very negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pendulum import Orbit

TWO_PI = 2.0 * np.pi


def flat_orbit(a: float, n_samples: int = 256) -> Orbit:
    """The trivial profile f = 0 (flat torus); embeds as a round cylinder."""
    if a <= 0.0:
        raise ValueError("cell width must be positive")
    x = np.arange(n_samples) * (a / n_samples)
    zeros = np.zeros(n_samples)
    return Orbit(a=a, E=0.0, x=x, f=zeros, p=zeros.copy())


def spectral_derivative(samples: np.ndarray, period: float) -> np.ndarray:
    """Derivative of a smooth periodic sample array by FFT differentiation."""
    n = len(samples)
    k = TWO_PI / period * np.fft.rfftfreq(n, d=1.0 / n)
    coeffs = 1j * k * np.fft.rfft(samples)
    if n % 2 == 0:
        coeffs[-1] = 0.0  # Nyquist mode carries no usable derivative phase
    return np.fft.irfft(coeffs, n)


def _spectral_antiderivative(samples: np.ndarray, period: float) -> np.ndarray:
    """Zero-mean antiderivative of a zero-mean periodic sample array."""
    n = len(samples)
    k = TWO_PI / period * np.fft.rfftfreq(n, d=1.0 / n)
    coeffs = np.fft.rfft(samples)
    out = np.zeros_like(coeffs)
    out[1:] = coeffs[1:] / (1j * k[1:])
    if n % 2 == 0:
        out[-1] = 0.0
    return np.fft.irfft(out, n)


@dataclass
class GeneratorCurve:
    """Profile of the surface of revolution over one cell, endpoints included.

    Arrays x, X, F have n+1 entries with x[0] = 0, x[n] = a; the final row
    repeats the first by periodicity (F) and adds the total advance (X).
    """

    a: float
    x: np.ndarray
    X: np.ndarray
    F: np.ndarray
    radicand_min: float
    radicand_bound: float

    @property
    def n(self) -> int:
        """Number of distinct samples (the last row duplicates x = 0)."""
        return len(self.x) - 1

    def closure_error(self) -> float:
        return abs(self.F[-1] - self.F[0])


def generator_curve(orbit: Orbit) -> GeneratorCurve:
    """Generator (X(x), F(x)) of the revolution surface for the given profile.

    X is the spectral antiderivative of sqrt(e^f (1 - p^2/(16 pi^2 a^2))) on
    the orbit's own grid, with X(0) = 0.
    """
    a = orbit.a
    denom = 16.0 * np.pi**2 * a * a
    radicand = 1.0 - orbit.p**2 / denom
    bound = 1.0 - 2.0 * orbit.E / denom
    rad_min = float(np.min(radicand))
    if rad_min <= 0.0:
        raise ArithmeticError(
            f"embedding radicand min {rad_min:.3e} <= 0; "
            f"inconsistent orbit (analytic bound {bound:.3e})"
        )
    ef = orbit.ef
    xdot = np.sqrt(ef * radicand)
    F = np.sqrt(ef) / (TWO_PI * a)

    slope = float(np.mean(xdot))
    X_per = _spectral_antiderivative(xdot - slope, a)
    X = slope * orbit.x + (X_per - X_per[0])

    x_full = np.append(orbit.x, a)
    X_full = np.append(X, slope * a)
    F_full = np.append(F, F[0])
    # X is analytically increasing, but under-resolved deep-neck profiles give
    # the spectral quadrature micro-backtracks near the neck. Those are
    # harmless for meshing; only a macroscopic fold means the sampled curve is
    # not an embedding at this resolution.
    span = X_full[-1] - X_full[0]
    fold = float(np.min(np.diff(X_full)))
    if fold < -1e-3 * span:
        raise ArithmeticError(
            f"X(x) folds back by {-fold:.3e} over span {span:.3e}; "
            "profile under-resolved (increase the orbit sample count)"
        )
    return GeneratorCurve(
        a=a, x=x_full, X=X_full, F=F_full, radicand_min=rad_min, radicand_bound=bound
    )


def pullback_check(curve: GeneratorCurve, orbit: Orbit) -> float:
    """max_x |X'^2 + F'^2 - e^f| with derivatives taken from the sampled curve.

    Both derivatives come from trigonometric differentiation of the stored
    samples (X detrended by its linear advance), so the check compares the
    integrated curve against the profile independently of how X was built.
    """
    n = curve.n
    x, X, F = curve.x[:n], curve.X[:n], curve.F[:n]
    slope = (curve.X[-1] - curve.X[0]) / curve.a
    xdot = slope + spectral_derivative(X - slope * x, curve.a)
    fdot = spectral_derivative(F, curve.a)
    return float(np.max(np.abs(xdot**2 + fdot**2 - orbit.ef)))


@dataclass
class RevolutionMesh:
    """Triangulated surface of revolution of one fundamental cell.

    `vertices` has n_axial * n_angular rows (x, y, z); rings follow the
    generator samples from x = 0 to x = a inclusive, so the tube is closed in
    the angular direction and open at the two end circles (which coincide
    after the periodic identification).
    """

    vertices: np.ndarray
    faces: np.ndarray
    n_axial: int
    n_angular: int


def mesh(curve: GeneratorCurve, n_angular: int = 64) -> RevolutionMesh:
    """Revolve the generator: ring j at angle 2*pi*j/n_angular.

    Vertex (i, j) sits at (X_i, F_i sin phi_j, F_i cos phi_j), index
    i * n_angular + j; two triangles per quad, angular wraparound.
    """
    if n_angular < 8:
        raise ValueError(f"n_angular must be >= 8, got {n_angular}")
    n_axial = len(curve.x)
    phi = TWO_PI * np.arange(n_angular) / n_angular
    sin_phi, cos_phi = np.sin(phi), np.cos(phi)
    verts = np.empty((n_axial * n_angular, 3))
    verts[:, 0] = np.repeat(curve.X, n_angular)
    radii = np.repeat(curve.F, n_angular)
    verts[:, 1] = radii * np.tile(sin_phi, n_axial)
    verts[:, 2] = radii * np.tile(cos_phi, n_axial)

    quads_i = np.repeat(np.arange(n_axial - 1), n_angular)
    quads_j = np.tile(np.arange(n_angular), n_axial - 1)
    jp = (quads_j + 1) % n_angular
    v00 = quads_i * n_angular + quads_j
    v01 = quads_i * n_angular + jp
    v10 = (quads_i + 1) * n_angular + quads_j
    v11 = (quads_i + 1) * n_angular + jp
    faces = np.empty((2 * len(v00), 3), dtype=np.int64)
    faces[0::2] = np.column_stack([v00, v10, v11])
    faces[1::2] = np.column_stack([v00, v11, v01])
    return RevolutionMesh(vertices=verts, faces=faces, n_axial=n_axial, n_angular=n_angular)
