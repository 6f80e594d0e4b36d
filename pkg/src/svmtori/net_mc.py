"""Monte Carlo narrow-escape times on flat and conformally flat tori.

Euler-Maruyama walkers with fixed dt diffuse until they first enter a small
window B_eps(q); the mean sojourn time over volume-uniform starts is compared
against the closed-form asymptotics

    n=2:  (V/nu) * ( -log(eps)/(2*pi) + R )
    n=3:  (V/nu) * ( 1/(4*pi*eps)     + R )

with R the Robin constant of the manifold.  On the non-flat torus (conformal
factor e^f from the pendulum orbit) the generator is nu*e^{-f}*Lap in
isothermal coordinates, i.e. per-coordinate increments sqrt(2*nu*e^{-f} dt)
with no drift, and the geodesic window is the coordinate ball of radius
eps*e^{-f(q)/2}.

Determinism: walker w draws from its own counter-based stream (seed, w), and
results land in preallocated slots, so output is bit-identical for any thread
count.  Boundary-crossing bias of the fixed-step scheme is first order in
sqrt(dt) and handled by the step-size precondition sqrt(2*n*nu*dt) <= eps/10,
not by bridge corrections.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from dataclasses import dataclass, replace

import numpy as np
import numba
from numba import njit, prange

from ._rng import next_normal, next_unit, stream_init
from . import lattice_spectral, pendulum, robin

TWO_PI = 2.0 * np.pi
FOUR_PI = 4.0 * np.pi


# ---------------------------------------------------------------------------
# manifold parsing

@dataclass(frozen=True)
class Manifold:
    kind: str             # "flat2" | "flat3" | "okikiolu"
    sides: tuple[float, ...]
    a: float | None = None

    @property
    def n(self) -> int:
        return len(self.sides)

    @property
    def flat_volume(self) -> float:
        return float(np.prod(self.sides))


def parse_manifold(spec: str) -> Manifold:
    """Parse "flat2:a=1", "flat3:L1,L2,L3", or "okikiolu:a=1.5"."""
    try:
        kind, _, rest = spec.partition(":")
        if kind in ("flat2", "okikiolu"):
            if not rest.startswith("a="):
                raise ValueError
            a = float(rest[2:])
            return Manifold(kind=kind, sides=(a, 1.0 / a), a=a)
        if kind == "flat3":
            sides = tuple(float(v) for v in rest.split(","))
            if len(sides) != 3:
                raise ValueError
            return Manifold(kind="flat3", sides=sides)
    except (ValueError, ZeroDivisionError):
        pass
    raise ValueError(
        f"bad manifold {spec!r}; expected flat2:a=A, flat3:L1,L2,L3, or okikiolu:a=A"
    )


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class NetConfig:
    """One narrow-escape experiment; dt="auto" saturates the step bound."""

    manifold: str
    eps: float
    walkers: int
    seed: int
    q: tuple[float, ...]
    nu: float = 1.0
    dt: float | str = "auto"
    max_steps: int | None = None
    profile_samples: int = 4096
    # 1.0 is the steady metric; other values deform e^f -> e^{scale*f}, which
    # is no longer a solution (used as the power control in drainage tests)
    f_scale: float = 1.0


def resolve_dt(config: NetConfig) -> float:
    """Fixed time step; "auto" means sqrt(2*n*nu*dt) = eps/10 exactly."""
    m = parse_manifold(config.manifold)
    if config.dt == "auto":
        return config.eps**2 / (200.0 * m.n * config.nu)
    dt = float(config.dt)
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if math.sqrt(2.0 * m.n * config.nu * dt) > config.eps / 10.0 * (1.0 + 1e-12):
        raise ValueError(
            f"step bound violated: sqrt(2*n*nu*dt)={math.sqrt(2*m.n*config.nu*dt):.3e} "
            f"> eps/10={config.eps/10:.3e}"
        )
    return dt


def _validate(config: NetConfig, m: Manifold) -> None:
    if config.eps <= 0.0:
        raise ValueError("eps must be positive")
    if config.eps >= min(m.sides) / 10.0:
        raise ValueError(
            f"eps={config.eps} must stay below a tenth of the shortest side "
            f"{min(m.sides)}"
        )
    if config.nu <= 0.0:
        raise ValueError("nu must be positive")
    if len(config.q) != m.n:
        raise ValueError(f"window center needs {m.n} coordinates, got {len(config.q)}")
    if config.walkers < 1:
        raise ValueError("walkers must be >= 1")


# ---------------------------------------------------------------------------
# kernels

@njit(inline="always")
def _mi(d, L):
    """Minimal-image reduction of a coordinate difference."""
    return d - L * np.rint(d / L)


@njit(inline="always")
def _interp(tab, pos, inv_h):
    """Linear interpolation on a wraparound table (tab[-1] repeats tab[0])."""
    xi = pos * inv_h
    i = np.int64(xi)
    frac = xi - i
    return tab[i] + frac * (tab[i + 1] - tab[i])


@njit(cache=True)
def _walk_flat2(s, g, x, y, ax, ay, qx, qy, eps2, sigma, max_steps):
    k = np.int64(0)
    while k < max_steps:
        dx = _mi(x - qx, ax)
        dy = _mi(y - qy, ay)
        if dx * dx + dy * dy <= eps2:
            return k
        z, s = next_normal(s, g)
        x += sigma * z
        z, s = next_normal(s, g)
        y += sigma * z
        k += 1
    return np.int64(-1)


@njit(cache=True)
def _walk_flat3(s, g, x, y, z3, l0, l1, l2, q0, q1, q2, eps2, sigma, max_steps):
    k = np.int64(0)
    while k < max_steps:
        d0 = _mi(x - q0, l0)
        d1 = _mi(y - q1, l1)
        d2 = _mi(z3 - q2, l2)
        if d0 * d0 + d1 * d1 + d2 * d2 <= eps2:
            return k
        w, s = next_normal(s, g)
        x += sigma * w
        w, s = next_normal(s, g)
        y += sigma * w
        w, s = next_normal(s, g)
        z3 += sigma * w
        k += 1
    return np.int64(-1)


@njit(cache=True)
def _walk_conformal2(s, g, x, y, ax, ay, qx, qy, rad2, sig_tab, inv_h, max_steps):
    k = np.int64(0)
    while k < max_steps:
        dx = _mi(x - qx, ax)
        dy = _mi(y - qy, ay)
        if dx * dx + dy * dy <= rad2:
            return k
        sig = _interp(sig_tab, x, inv_h)
        z, s = next_normal(s, g)
        x += sig * z
        z, s = next_normal(s, g)
        y += sig * z
        if x >= ax:
            x -= ax
        elif x < 0.0:
            x += ax
        k += 1
    return np.int64(-1)


@njit(parallel=True, cache=True)
def _run_flat2(n, id_offset, seed, ax, ay, qx, qy, eps2, sigma, max_steps, out):
    for w in prange(n):
        s, g = stream_init(seed, id_offset + w)
        while True:
            u, s = next_unit(s, g)
            x0 = ax * u
            u, s = next_unit(s, g)
            y0 = ay * u
            dx = _mi(x0 - qx, ax)
            dy = _mi(y0 - qy, ay)
            if dx * dx + dy * dy > eps2:
                break
        out[w] = _walk_flat2(s, g, x0, y0, ax, ay, qx, qy, eps2, sigma, max_steps)


@njit(parallel=True, cache=True)
def _run_flat2_fixed(n, id_offset, seed, x0, y0, ax, ay, qx, qy, eps2, sigma,
                     max_steps, out):
    for w in prange(n):
        s, g = stream_init(seed, id_offset + w)
        out[w] = _walk_flat2(s, g, x0, y0, ax, ay, qx, qy, eps2, sigma, max_steps)


@njit(parallel=True, cache=True)
def _run_flat3(n, id_offset, seed, l0, l1, l2, q0, q1, q2, eps2, sigma, max_steps, out):
    for w in prange(n):
        s, g = stream_init(seed, id_offset + w)
        while True:
            u, s = next_unit(s, g)
            x0 = l0 * u
            u, s = next_unit(s, g)
            y0 = l1 * u
            u, s = next_unit(s, g)
            z0 = l2 * u
            d0 = _mi(x0 - q0, l0)
            d1 = _mi(y0 - q1, l1)
            d2 = _mi(z0 - q2, l2)
            if d0 * d0 + d1 * d1 + d2 * d2 > eps2:
                break
        out[w] = _walk_flat3(s, g, x0, y0, z0, l0, l1, l2, q0, q1, q2, eps2,
                             sigma, max_steps)


@njit(parallel=True, cache=True)
def _run_flat3_fixed(n, id_offset, seed, x0, y0, z0, l0, l1, l2, q0, q1, q2,
                     eps2, sigma, max_steps, out):
    for w in prange(n):
        s, g = stream_init(seed, id_offset + w)
        out[w] = _walk_flat3(s, g, x0, y0, z0, l0, l1, l2, q0, q1, q2, eps2,
                             sigma, max_steps)


@njit(parallel=True, cache=True)
def _run_conformal2(n, id_offset, seed, ax, ay, qx, qy, rad2, sig_tab, acc_tab,
                    inv_h, max_steps, out):
    for w in prange(n):
        s, g = stream_init(seed, id_offset + w)
        while True:
            u, s = next_unit(s, g)
            x0 = ax * u
            u, s = next_unit(s, g)
            y0 = ay * u
            u, s = next_unit(s, g)
            if u > _interp(acc_tab, x0, inv_h):
                continue  # volume-measure rejection against e^f
            dx = _mi(x0 - qx, ax)
            dy = _mi(y0 - qy, ay)
            if dx * dx + dy * dy > rad2:
                break
        out[w] = _walk_conformal2(s, g, x0, y0, ax, ay, qx, qy, rad2, sig_tab,
                                  inv_h, max_steps)


# ---------------------------------------------------------------------------
# tables and dispatch

def _conformal_tables(config: NetConfig, m: Manifold, dt: float):
    """Wraparound tables for the conformal walk: step sigma(x) and start
    acceptance e^{f(x) - f_max}, plus the window radius at q."""
    orbit = pendulum.solve_orbit(m.a, config.profile_samples)
    f = config.f_scale * orbit.f
    ftab = np.append(f, f[0])
    sig_tab = math.sqrt(2.0 * config.nu * dt) * np.exp(-0.5 * ftab)
    acc_tab = np.exp(ftab - np.max(ftab))
    inv_h = config.profile_samples / m.a
    f_q = _interp.py_func(ftab, config.q[0] % m.a, inv_h)
    radius = config.eps * math.exp(-0.5 * f_q)
    # the coordinate radius blows up as e^{-f(q)/2} where f is very negative
    # (deformed controls especially); past half the cell the "window" stops
    # being a hole and the start sampler could never place a walker outside it
    if radius >= min(m.sides) / 2.0:
        raise ValueError(
            f"window radius eps*e^(-f(q)/2) = {radius:.3e} reaches half the "
            f"shortest side {min(m.sides):.3e}; shrink eps or move q"
        )
    sig_max = float(np.max(sig_tab))
    if sig_max * 8.0 > min(m.sides):
        raise ValueError(
            f"conformal step sigma_max={sig_max:.3e} too large for the cell; "
            "reduce dt or the aspect"
        )
    return sig_tab, acc_tab, inv_h, radius


def _theory_scale_estimate(config: NetConfig, m: Manifold) -> float:
    """Crude mean-sojourn overestimate used only to size the censoring cap.

    The 0.2 slack absorbs the Robin-constant shift of deformed (f_scale != 1)
    metrics, whose volume factor is included explicitly.
    """
    if m.kind == "okikiolu":
        orbit = pendulum.solve_orbit(m.a, 512)
        v = float(np.mean(np.exp(config.f_scale * orbit.f)))
        return v * (-math.log(config.eps) / TWO_PI + 0.2) / config.nu
    if m.n == 2:
        r0 = robin.robin_flat(m.a if m.a else 1.0)
        return abs(-math.log(config.eps) / TWO_PI + r0) / config.nu
    v = m.flat_volume
    return v * (1.0 / (FOUR_PI * config.eps) + 1.0) / config.nu


def _resolve(config: NetConfig):
    m = parse_manifold(config.manifold)
    _validate(config, m)
    dt = resolve_dt(config)
    if config.max_steps is None:
        cap = int(math.ceil(30.0 * _theory_scale_estimate(config, m) / dt))
    else:
        cap = int(config.max_steps)
    return m, dt, cap


def _dispatch(config: NetConfig, id_offset: int, start=None) -> tuple[np.ndarray, float]:
    """Run the walker batch; returns (absorption step counts, dt)."""
    m, dt, cap = _resolve(config)
    out = np.empty(config.walkers, dtype=np.int64)
    n = config.walkers
    # plain ints so id_offset + w stays int64 inside the kernels (uint64+int64
    # would promote to float64); stream_init casts to uint64 itself
    seed = int(config.seed)
    off = int(id_offset)
    sigma = math.sqrt(2.0 * config.nu * dt)
    if m.kind == "flat2":
        ax, ay = m.sides
        qx, qy = config.q
        if start is None:
            _run_flat2(n, off, seed, ax, ay, qx, qy, config.eps**2, sigma, cap, out)
        else:
            _run_flat2_fixed(n, off, seed, start[0], start[1], ax, ay, qx, qy,
                             config.eps**2, sigma, cap, out)
    elif m.kind == "flat3":
        l0, l1, l2 = m.sides
        q0, q1, q2 = config.q
        if start is None:
            _run_flat3(n, off, seed, l0, l1, l2, q0, q1, q2, config.eps**2,
                       sigma, cap, out)
        else:
            _run_flat3_fixed(n, off, seed, start[0], start[1], start[2], l0, l1,
                             l2, q0, q1, q2, config.eps**2, sigma, cap, out)
    else:
        if start is not None:
            raise ValueError("fixed-start runs are implemented for flat tori only")
        sig_tab, acc_tab, inv_h, radius = _conformal_tables(config, m, dt)
        ax, ay = m.sides
        qx, qy = config.q
        _run_conformal2(n, off, seed, ax, ay, qx, qy, radius**2, sig_tab,
                        acc_tab, inv_h, cap, out)
    return out, dt


# ---------------------------------------------------------------------------
# public operations

@dataclass
class NetResult:
    """Aggregated sojourn statistics for one window."""

    mean: float
    stderr: float
    walkers: int
    absorbed_fraction: float
    censored: int
    dt: float
    wall_clock_s: float


def sample_sojourn(config: NetConfig, walker_id: int) -> float:
    """First-passage time of one walker (its own stream); NaN if censored."""
    one = replace(config, walkers=1)
    steps, dt = _dispatch(one, id_offset=walker_id)
    if steps[0] < 0:
        warnings.warn(f"walker {walker_id} censored at the step cap")
        return float("nan")
    return float(steps[0]) * dt


def average_net(config: NetConfig, id_offset: int = 0, start=None) -> NetResult:
    """Mean sojourn over walkers; censored walkers excluded with a warning."""
    if config.walkers < 100:
        raise ValueError("average_net needs at least 100 walkers")
    t0 = time.perf_counter()
    steps, dt = _dispatch(config, id_offset=id_offset, start=start)
    wall = time.perf_counter() - t0
    absorbed = steps >= 0
    n_abs = int(np.sum(absorbed))
    censored = config.walkers - n_abs
    if censored:
        warnings.warn(
            f"{censored} of {config.walkers} walkers censored at the step cap; "
            "their sojourns are excluded"
        )
    if n_abs == 0:
        raise ArithmeticError("all walkers censored; cap far too small")
    times = steps[absorbed].astype(np.float64) * dt
    mean = float(np.mean(times))
    stderr = float(np.std(times, ddof=1) / math.sqrt(n_abs)) if n_abs > 1 else float("inf")
    return NetResult(
        mean=mean,
        stderr=stderr,
        walkers=n_abs,
        absorbed_fraction=n_abs / config.walkers,
        censored=censored,
        dt=dt,
        wall_clock_s=wall,
    )


def theory_average(config: NetConfig) -> float:
    """Closed-form mean narrow-escape time for the configured manifold."""
    m = parse_manifold(config.manifold)
    if config.f_scale != 1.0:
        raise ValueError("closed-form theory applies to the steady metric only")
    if m.kind == "flat2":
        r = robin.robin_flat(m.a)
        return (-math.log(config.eps) / TWO_PI + r) / config.nu
    if m.kind == "flat3":
        r = lattice_spectral.robin_via_time_integral(lattice_spectral.FlatTorus(m.sides))
        v = m.flat_volume
        return v * (1.0 / (FOUR_PI * config.eps) + r) / config.nu
    r1 = robin.robin_okikiolu(m.a, config.profile_samples)
    return (-math.log(config.eps) / TWO_PI + r1) / config.nu


def pointwise_green_check(config: NetConfig, p1, p2) -> dict:
    """Compare v(p1) - v(p2) from fixed starts against -(V/nu)(G1 - G2).

    Flat manifolds only (G from the Ewald sum); the pass flag asks for
    agreement within 3 combined standard errors.
    """
    m = parse_manifold(config.manifold)
    if m.kind not in ("flat2", "flat3"):
        raise ValueError("pointwise check needs a computable Green's function (flat)")
    p1 = tuple(float(v) for v in p1)
    p2 = tuple(float(v) for v in p2)
    torus = lattice_spectral.FlatTorus(m.sides)
    q = np.asarray(config.q)
    res1 = average_net(config, id_offset=0, start=p1)
    res2 = average_net(config, id_offset=config.walkers, start=p2)
    if p1 == p2:
        theory_diff = 0.0
    else:
        g1 = lattice_spectral.green(torus, np.asarray(p1) - q)
        g2 = lattice_spectral.green(torus, np.asarray(p2) - q)
        theory_diff = -(m.flat_volume / config.nu) * (g1 - g2)
    mc_diff = res1.mean - res2.mean
    comb_se = math.hypot(res1.stderr, res2.stderr)
    z = (mc_diff - theory_diff) / comb_se if comb_se > 0 else 0.0
    return {
        "p1": p1,
        "p2": p2,
        "mean1": res1.mean,
        "mean2": res2.mean,
        "stderr1": res1.stderr,
        "stderr2": res2.stderr,
        "mc_diff": mc_diff,
        "theory_diff": theory_diff,
        "combined_se": comb_se,
        "z": z,
        "ok": abs(mc_diff - theory_diff) <= 3.0 * comb_se,
    }


@dataclass
class DrainageReport:
    """Window-position invariance test on the non-flat torus."""

    a: float
    eps: float
    walkers: int
    q_list: list
    means: list
    stderrs: list
    max_dev: float
    tolerance: float
    uniform_ok: bool
    control_means: list
    control_stderrs: list
    control_max_dev: float
    control_tolerance: float
    control_exceeds: bool


def uniform_drainage_test(
    a: float,
    eps: float,
    q_list=None,
    walkers: int = 20000,
    nu: float = 1.0,
    dt="auto",
    seed: int = 20240,
    allowance: float = 5.0,
    control_scale: float = 2.0,
    control_walkers: int | None = None,
) -> DrainageReport:
    """Mean sojourn at several window positions; steady metric vs a control.

    On the steady (uniform-drainage) metric the means agree within
    3*combined SE + allowance*eps*|mean| (the O(eps) term absorbs the
    window-shape error).  The control deforms e^f -> e^{control_scale*f},
    which is not a solution; doubling f (rather than halving it) makes its
    window dependence ~25x the tolerance, so far fewer control walkers are
    needed to see the spread exceed the same bound.
    """
    if q_list is None:
        # extrema of f: the orbit minimum sits at x=0, the maximum at x=a/2
        q_list = [(a / 2.0, 0.5 / a), (0.0, 0.5 / a)]
    if control_walkers is None:
        control_walkers = max(100, walkers // 20)

    def batch(scale, count):
        means, ses = [], []
        for i, q in enumerate(q_list):
            cfg = NetConfig(
                manifold=f"okikiolu:a={a!r}", eps=eps, walkers=count, seed=seed,
                q=tuple(q), nu=nu, dt=dt, f_scale=scale,
            )
            res = average_net(cfg, id_offset=i * count)
            means.append(res.mean)
            ses.append(res.stderr)
        return means, ses

    means, ses = batch(1.0, walkers)
    dev, tol = _spread(means, ses, allowance * eps)
    c_means, c_ses = batch(control_scale, control_walkers)
    c_dev, c_tol = _spread(c_means, c_ses, allowance * eps)
    return DrainageReport(
        a=a, eps=eps, walkers=walkers, q_list=list(q_list),
        means=means, stderrs=ses, max_dev=dev, tolerance=tol,
        uniform_ok=dev <= tol,
        control_means=c_means, control_stderrs=c_ses,
        control_max_dev=c_dev, control_tolerance=c_tol,
        control_exceeds=c_dev > c_tol,
    )


def _spread(means, ses, rel_allowance):
    """Worst pairwise deviation and its tolerance 3*SE_comb + allowance*|mean|."""
    dev = 0.0
    tol = float("inf")
    for i in range(len(means)):
        for j in range(i + 1, len(means)):
            d = abs(means[i] - means[j])
            t = 3.0 * math.hypot(ses[i], ses[j]) + rel_allowance * abs(means[i])
            if d > dev:
                dev = d
            if t < tol:
                tol = t
    return dev, tol


# ---------------------------------------------------------------------------
# threading

def apply_thread_cap() -> int:
    """Honor the SVMTORI_THREADS environment variable; returns active count."""
    cap = os.environ.get("SVMTORI_THREADS")
    if cap:
        numba.set_num_threads(max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS)))
    return numba.get_num_threads()
