"""Narrow-escape Monte Carlo: determinism, invariants, cheap-statistics checks.

Heavy criterion-scale runs live in the acceptance tests; everything here uses
coarse windows (large eps) so the whole module stays under about a minute.
"""

import math
import warnings

import numba
import numpy as np
import pytest

from svmtori import net_mc as nm

Q2 = (0.5, 0.5)


def cfg(**kw):
    base = dict(manifold="flat2:a=1", eps=0.05, walkers=200, seed=7, q=Q2)
    base.update(kw)
    return nm.NetConfig(**base)


# ---------------------------------------------------------------------------
# parsing and validation

def test_parse_manifold():
    m = nm.parse_manifold("flat2:a=1.5")
    assert m.kind == "flat2" and m.n == 2
    assert m.sides == (1.5, 1.0 / 1.5)
    m = nm.parse_manifold("flat3:1,2,0.5")
    assert m.kind == "flat3" and m.sides == (1.0, 2.0, 0.5) and m.flat_volume == 1.0
    m = nm.parse_manifold("okikiolu:a=2")
    assert m.kind == "okikiolu" and m.a == 2.0
    for bad in ("flat2:1", "flat3:1,2", "circle:a=1", "okikiolu:a=zero"):
        with pytest.raises(ValueError):
            nm.parse_manifold(bad)


def test_config_validation():
    with pytest.raises(ValueError):
        nm.average_net(cfg(eps=0.2))  # eps must stay under a tenth of the side
    with pytest.raises(ValueError):
        nm.average_net(cfg(dt=1e-3))  # violates sqrt(2 n nu dt) <= eps/10
    with pytest.raises(ValueError):
        nm.average_net(cfg(q=(0.5, 0.5, 0.5)))
    with pytest.raises(ValueError):
        nm.average_net(cfg(nu=-1.0))
    with pytest.raises(ValueError):
        nm.average_net(cfg(walkers=50))  # averages need >= 100 walkers


def test_resolve_dt_auto_saturates_bound():
    c = cfg()
    dt = nm.resolve_dt(c)
    assert dt == pytest.approx(c.eps**2 / 400.0)
    assert math.sqrt(2.0 * 2 * c.nu * dt) == pytest.approx(c.eps / 10.0)
    assert nm.resolve_dt(cfg(dt=1e-6)) == 1e-6


# ---------------------------------------------------------------------------
# determinism and exact invariants

def test_rerun_is_bit_identical():
    r1 = nm.average_net(cfg())
    r2 = nm.average_net(cfg())
    assert r1.mean == r2.mean
    assert r1.stderr == r2.stderr


def test_thread_count_invariance():
    means = {}
    for manifold in ("flat2:a=1", "okikiolu:a=1.5"):
        q = Q2 if manifold.startswith("flat") else (0.75, 1.0 / 3.0)
        vals = []
        for k in (1, 4, 8):
            numba.set_num_threads(k)
            vals.append(nm.average_net(cfg(manifold=manifold, q=q)).mean)
        numba.set_num_threads(8)
        means[manifold] = vals
        assert vals[0] == vals[1] == vals[2]


def test_nu_time_change_is_exact():
    r1 = nm.average_net(cfg(walkers=300, nu=1.0))
    r2 = nm.average_net(cfg(walkers=300, nu=0.5))
    assert 2.0 * r1.mean == r2.mean  # same trajectories, dt doubled exactly
    assert r1.censored == r2.censored


def test_start_at_window_absorbs_immediately():
    res = nm.average_net(cfg(walkers=100), start=Q2)
    assert res.mean == 0.0
    assert res.stderr == 0.0


def test_sample_sojourn_matches_batch_slot():
    c = cfg()
    steps, dt = nm._dispatch(c, id_offset=0)
    assert nm.sample_sojourn(c, 7) == steps[7] * dt
    assert nm.sample_sojourn(c, 0) >= 0.0


# ---------------------------------------------------------------------------
# statistics against closed forms (fixed seeds, verified once)

def test_flat2_matches_theory():
    res = nm.average_net(cfg(walkers=2000))
    th = nm.theory_average(cfg())
    assert res.censored == 0
    assert abs(res.mean - th) < 3.0 * res.stderr


def test_flat3_matches_theory():
    c = cfg(manifold="flat3:1,1,1", eps=0.08, walkers=800, q=(0.5, 0.5, 0.5))
    res = nm.average_net(c)
    th = nm.theory_average(c)
    assert abs(res.mean - th) < 3.0 * res.stderr


def test_okikiolu_matches_theory():
    c = cfg(manifold="okikiolu:a=1.5", eps=0.04, walkers=1000, q=(0.75, 1.0 / 3.0),
            seed=5)
    res = nm.average_net(c)
    th = nm.theory_average(c)
    assert abs(res.mean - th) < 3.0 * res.stderr


def test_okikiolu_theory_ignores_window_position():
    c1 = cfg(manifold="okikiolu:a=1.5", q=(0.75, 0.2))
    c2 = cfg(manifold="okikiolu:a=1.5", q=(0.1, 0.6))
    assert nm.theory_average(c1) == nm.theory_average(c2)


def test_theory_rejects_deformed_metric():
    with pytest.raises(ValueError):
        nm.theory_average(cfg(manifold="okikiolu:a=1.5", f_scale=0.5))


# ---------------------------------------------------------------------------
# censoring

def test_censored_walkers_warn_and_are_excluded():
    c = cfg(walkers=300, max_steps=30000)
    with pytest.warns(UserWarning, match="censored"):
        res = nm.average_net(c)
    assert res.censored > 0
    assert 0.0 < res.absorbed_fraction < 1.0
    assert res.walkers == 300 - res.censored


def test_all_censored_raises():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ArithmeticError):
            nm.average_net(cfg(walkers=100, max_steps=1))


# ---------------------------------------------------------------------------
# pointwise Green check and the drainage experiment

def test_pointwise_check_trivia():
    c = cfg(walkers=150)
    rep = nm.pointwise_green_check(c, (0.25, 0.25), (0.25, 0.25))
    assert rep["theory_diff"] == 0.0
    a = nm.pointwise_green_check(c, (0.2, 0.2), (0.9, 0.6))
    b = nm.pointwise_green_check(c, (0.9, 0.6), (0.2, 0.2))
    assert a["theory_diff"] == -b["theory_diff"]
    with pytest.raises(ValueError):
        nm.pointwise_green_check(cfg(manifold="okikiolu:a=1.5"), (0.2, 0.2), (0.9, 0.6))


def test_pointwise_check_signed_difference():
    c = cfg(walkers=2500, seed=11)
    # near the window vs antipodal: v is smaller near the window
    rep = nm.pointwise_green_check(c, (0.58, 0.5), (0.0, 0.0))
    assert rep["theory_diff"] < 0.0
    assert rep["mc_diff"] < 0.0
    assert rep["ok"]


def test_uniform_drainage_cheap():
    # criterion-scale geometry (eps=0.01) at a fraction of the walker budget;
    # the doubled-f control needs eps this small so its window at the f-minimum
    # (coordinate radius eps*e^{-f}) still fits in the cell
    rep = nm.uniform_drainage_test(1.5, 0.01, walkers=250, control_walkers=150,
                                   seed=3)
    assert rep.uniform_ok
    assert rep.control_exceeds
    assert rep.max_dev <= rep.tolerance
    assert rep.control_max_dev > rep.control_tolerance
    assert len(rep.means) == len(rep.q_list) == 2


def test_oversized_deformed_window_rejected():
    # eps=0.04 with f doubled puts the f-minimum window radius at
    # 0.04*e^{3.3} > the whole cell; the start sampler must refuse, not spin
    with pytest.raises(ValueError, match="window radius"):
        nm.uniform_drainage_test(1.5, 0.04, walkers=100, control_walkers=100,
                                 seed=3)


def test_drainage_tolerance_tightens_with_eps():
    # tolerance = 3*hypot(SE) + (allowance*eps)*|mean|: halving eps halves the
    # window-shape allowance while the statistical term stays put
    means = [0.52, 0.50]
    ses = [0.010, 0.012]
    d1, t1 = nm._spread(means, ses, 5.0 * 0.04)
    d2, t2 = nm._spread(means, ses, 5.0 * 0.02)
    assert d1 == d2 == pytest.approx(0.02)
    assert t2 < t1
    assert t1 - t2 == pytest.approx(5.0 * 0.02 * 0.52)
