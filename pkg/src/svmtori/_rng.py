"""Counter-based random streams and a ziggurat normal sampler for the MC kernels.

Each walker owns an independent splitmix64-style stream identified by
(seed, stream_id).  The stream state advances by a per-stream odd gamma, so
streams are distinct full-period cycles and results do not depend on how
walkers are scheduled across threads.  Gaussians come from a 256-layer
ziggurat, which keeps the hot path free of libm calls (one table lookup and
two multiplies for ~98.9% of draws).
"""

from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_KEYMIX = np.uint64(0xD1342543DE82EF95)
_U53 = 1.1102230246251565e-16  # 2^-53
_TWO53 = 9007199254740992.0  # 2^53


def _build_ziggurat(n: int = 256):
    """Solve for the 256-layer ziggurat of the standard normal density.

    Layers i = 0..n-1 have equal area v; layer 0 is the base rectangle plus
    the tail beyond r.  Returns (r, v, X, F) with X[0] = v/f(r) > X[1] = r >
    ... > X[n] = 0 and F = exp(-X^2/2).
    """
    from scipy.optimize import brentq
    from scipy.special import erfc

    def f(x):
        return np.exp(-0.5 * x * x)

    def tail(r):
        return np.sqrt(np.pi / 2.0) * erfc(r / np.sqrt(2.0))

    def top_gap(r):
        v = r * f(r) + tail(r)
        x = r
        for _ in range(n - 2):
            arg = f(x) + v / x
            if arg >= 1.0:
                return 1.0  # layer stack overshot the mode: r too small
            x = np.sqrt(-2.0 * np.log(arg))
        return (f(x) + v / x) - 1.0

    r = brentq(top_gap, 3.0, 4.0, xtol=2e-15)
    v = r * f(r) + tail(r)
    X = np.empty(n + 1)
    X[0] = v / f(r)
    X[1] = r
    for i in range(2, n):
        X[i] = np.sqrt(-2.0 * np.log(f(X[i - 1]) + v / X[i - 1]))
    X[n] = 0.0
    return r, v, X, f(X)


ZIG_R, ZIG_V, _ZIG_X, _ZIG_F = _build_ziggurat()
ZIG_INV_R = 1.0 / ZIG_R
# acceptance thresholds against the 53-bit mantissa draw, and scale factors
_ZIG_K = np.floor((_ZIG_X[1:257] / _ZIG_X[0:256]) * _TWO53).astype(np.uint64)
_ZIG_W = (_ZIG_X[0:256] / _TWO53).copy()


@njit(inline="always")
def mix64(z):
    """Stafford variant 13 finalizer: bijective avalanche mix of a uint64."""
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(inline="always")
def stream_init(seed, stream_id):
    """Derive (state, gamma) for one logical stream.

    gamma is odd and guarded against low bit-diversity so every stream is a
    distinct full-period splitmix64 cycle (no overlapping subsequences).
    """
    s = mix64(np.uint64(seed) ^ (np.uint64(stream_id) * _KEYMIX))
    g = (mix64(s + _GOLDEN) << np.uint64(1)) | np.uint64(1)
    d = g ^ (g >> np.uint64(1))
    # popcount of d; numba has no intrinsic for uint64 popcount pre-0.57 APIs
    d = d - ((d >> np.uint64(1)) & np.uint64(0x5555555555555555))
    d = (d & np.uint64(0x3333333333333333)) + ((d >> np.uint64(2)) & np.uint64(0x3333333333333333))
    d = (d + (d >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    pc = (d * np.uint64(0x0101010101010101)) >> np.uint64(56)
    if pc < np.uint64(24):
        g = g ^ np.uint64(0xAAAAAAAAAAAAAAAA)
    return s, g


@njit(inline="always")
def next_u64(s, g):
    s = s + g
    return mix64(s), s


@njit(inline="always")
def next_unit(s, g):
    """Uniform double in (0,1], plus advanced state."""
    z, s = next_u64(s, g)
    return (np.float64(z >> np.uint64(11)) + 1.0) * _U53, s


@njit(inline="always")
def next_normal(s, g):
    """Standard normal draw via the ziggurat, plus advanced state."""
    while True:
        z, s = next_u64(s, g)
        idx = np.int64(z & np.uint64(0xFF))
        sign = z & np.uint64(0x100)
        mant = z >> np.uint64(11)
        x = np.float64(mant) * _ZIG_W[idx]
        if mant < _ZIG_K[idx]:
            return (-x if sign else x), s
        if idx == 0:
            # Marsaglia tail sample beyond r
            while True:
                u1, s = next_unit(s, g)
                xt = -np.log(u1) * ZIG_INV_R
                u2, s = next_unit(s, g)
                yt = -np.log(u2)
                if yt + yt > xt * xt:
                    break
            v = ZIG_R + xt
            return (-v if sign else v), s
        u, s = next_unit(s, g)
        y = _ZIG_F[idx] + u * (_ZIG_F[idx + 1] - _ZIG_F[idx])
        if y < np.exp(-0.5 * x * x):
            return (-x if sign else x), s


@njit(cache=True)
def normals(seed, stream_id, n):
    """n standard normals from one stream (test/diagnostic helper)."""
    out = np.empty(n)
    s, g = stream_init(seed, stream_id)
    for i in range(n):
        out[i], s = next_normal(s, g)
    return out


@njit(cache=True)
def uniforms(seed, stream_id, n):
    """n uniform(0,1] doubles from one stream (test/diagnostic helper)."""
    out = np.empty(n)
    s, g = stream_init(seed, stream_id)
    for i in range(n):
        out[i], s = next_unit(s, g)
    return out
