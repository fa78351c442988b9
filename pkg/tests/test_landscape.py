import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from statsmodels.stats.proportion import proportion_confint

from npplab.core import EnergyLevel, Instance, SignVector, inner
from npplab.errors import CapExceeded, MarginError
from npplab.instances import sample_instance
from npplab.landscape import (
    ObstructionParams,
    TrialRecord,
    aggregate,
    ball_count,
    binary_entropy,
    eps_preset,
    eta_for,
    implied_constant,
    nearest_solution_flips,
    obstruction_trial,
    repel_trial,
    rounding_hardness_trial,
    small_ball_bound,
    wilson,
)
from npplab.lowdeg import JuntaAlgorithm
from npplab.solvers import brute_force, count_solutions_mitm, enumerate_solutions

ZERO = EnergyLevel(1)


def test_binary_entropy():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0 == binary_entropy(1.0)
    assert binary_entropy(0.25) == pytest.approx(0.811278, abs=1e-6)


def test_ball_count_examples():
    b = ball_count(10, 5)
    assert b.exact == 638 and b.bound == 1024
    b0 = ball_count(7, 0)
    assert b0.exact == 1 and b0.bound == 1


def test_eta_examples():
    assert eta_for(24, 24) == pytest.approx(1 / 48, rel=1e-15)
    eta = 1 / 48
    assert 2 * eta * math.log2(1 / eta) == pytest.approx(math.log2(48) / 24)
    assert eta_for(32, 64) == pytest.approx(1 / 128, rel=1e-15)
    with pytest.raises(ValueError):
        eta_for(0, 10)


def test_small_ball_examples():
    assert small_ball_bound(3, 1.0) == pytest.approx(0.25 / math.sqrt(2 * math.pi), rel=1e-12)
    vals = [small_ball_bound(e, 1.0) for e in range(1, 60)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    sig = [small_ball_bound(4, s) for s in (0.1, 0.5, 1, 2, 10)]
    assert all(a > b for a, b in zip(sig, sig[1:]))
    with pytest.raises(ValueError):
        small_ball_bound(3, 0.0)


def test_small_ball_monte_carlo_example():
    z = np.random.default_rng(0).standard_normal(1_000_000)
    assert np.mean(np.abs(z) <= 0.125) <= small_ball_bound(3, 1.0)


def test_eps_presets():
    assert eps_preset("ldp", 8, 100) == 2.0**-4
    assert eps_preset("lcd", 8, 64, degree=4) == pytest.approx(4 / 64)
    assert eps_preset(0.3, 8, 64) == 0.3


def test_nearest_examples(g1234):
    g = sample_instance(10, "gaussian", 40, 3)
    x = brute_force(g).x
    assert nearest_solution_flips(g, EnergyLevel(0), x, 3) == 0
    assert nearest_solution_flips(g1234, ZERO, SignVector.all_plus(4), 4) == 2
    g124 = Instance.from_ints((1, 2, 4))
    for bits in range(8):
        assert nearest_solution_flips(g124, ZERO, SignVector(3, bits), 3) is None


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-30, 30), min_size=1, max_size=9), st.integers(0, 511), st.integers(0, 6))
def test_nearest_matches_exhaustive(vals, bits, e):
    g = Instance.from_ints(vals, scale_bits=3)
    lvl = EnergyLevel(e)
    T = lvl.threshold(3)
    x = SignVector(g.n, bits & ((1 << g.n) - 1))
    dists = [
        (x.bits ^ y).bit_count()
        for y in range(1 << g.n)
        if abs(inner(g, SignVector(g.n, y))) <= T
    ]
    want = min(dists) if dists else None
    assert nearest_solution_flips(g, lvl, x, g.n) == want


def test_nearest_work_cap():
    g = sample_instance(60, "gaussian", 40, 0)
    with pytest.raises(CapExceeded):
        nearest_solution_flips(g, EnergyLevel(30), SignVector.all_plus(60), 20)


def test_repel_examples():
    g = Instance.from_ints((1, 1, 2, 4))
    assert repel_trial(g, ZERO, 2) is False
    assert repel_trial(g, ZERO, 4) is True
    for k in range(1, 4):
        assert repel_trial(Instance.from_ints((1, 2, 4)), ZERO, k) is False


@pytest.mark.parametrize("n,e,k", [(12, 6, 2), (14, 8, 3), (16, 7, 1), (18, 9, 2)])
def test_repel_methods_agree(n, e, k):
    lvl = EnergyLevel(e)
    for s in range(25):
        g = sample_instance(n, "gaussian", 32, s)
        ref = repel_trial(g, lvl, k, "enumerate")
        assert repel_trial(g, lvl, k, "reduction") == ref == repel_trial(g, lvl, k)


def _params(**kw):
    base = dict(n=10, scale_bits=40, dist="gaussian", energy=6, eps=0.25, eta=0.1, mode="resampled",
                solver="bf", trials=1, seed=3)
    base.update(kw)
    return ObstructionParams(**base)


def test_obstruction_eps_zero_never_differs():
    p = _params(eps=0.0)
    assert not any(obstruction_trial(p, t).s_diff for t in range(30))


def test_obstruction_own_solution_blocks_s_cond():
    # g' = g and x solves g, so x itself is a solution of g' at distance 0
    rec = obstruction_trial(_params(n=12, eps=0.0, energy=1), 0)
    assert rec.s_solve_g and rec.s_solve_gp and not rec.s_cond and rec.nearest_flips == 0


def test_obstruction_trial_is_deterministic():
    p = _params()
    a = [obstruction_trial(p, t) for t in range(5)]
    b = [obstruction_trial(p, t) for t in range(5)]
    strip = lambda r: r.__class__(**{**r.__dict__, "elapsed_ms": 0.0})
    assert list(map(strip, a)) == list(map(strip, b))


def test_obstruction_param_validation():
    with pytest.raises(ValueError):
        _params(eta=0.5)
    with pytest.raises(MarginError):
        _params(energy=31)
    with pytest.raises(MarginError):
        _params(mode="correlated", energy=27)
    with pytest.raises(ValueError):
        _params(solver="nope")


def test_rounding_sign_junta_never_resamples():
    A = JuntaAlgorithm.sliding(10, 1)
    for s in range(20):
        g = sample_instance(10, "gaussian", 40, s)
        rec = rounding_hardness_trial(A, g, EnergyLevel(4), 1.0, s)
        assert rec.resampled == 0 and rec.tilde_in_s == rec.star_in_s


def test_rounding_zero_junta_is_uniform_point():
    n, e, m = 10, 3, 4000
    A = JuntaAlgorithm(n, 1, tuple(() for _ in range(n)), "table", tuple((0.0,) for _ in range(n)))
    g = sample_instance(n, "gaussian", 40, 1)
    lvl = EnergyLevel(e)
    hits = sum(rounding_hardness_trial(A, g, lvl, 0.5, s).tilde_in_s for s in range(m))
    p = count_solutions_mitm(g, lvl) / 2**n
    lo, hi = proportion_confint(hits, m, alpha=1e-4, method="wilson")
    assert lo <= p <= hi


def test_rounding_big_radius_is_optimum():
    n = 8
    A = JuntaAlgorithm.sliding(n, 2)
    for s in range(10):
        g = sample_instance(n, "gaussian", 40, s)
        lvl = EnergyLevel(5)
        rec = rounding_hardness_trial(A, g, lvl, 2 * math.sqrt(n) + 0.01, s)
        assert rec.hat_in_s == (brute_force(g).energy >= 5)


@pytest.mark.parametrize("s,t", [(0, 100), (100, 100), (50, 100), (3, 17), (1, 1), (999, 1000)])
def test_wilson_matches_statsmodels(s, t):
    est = wilson(s, t)
    lo, hi = proportion_confint(s, t, alpha=0.05, method="wilson")
    assert est.lo == pytest.approx(lo, abs=1e-12) and est.hi == pytest.approx(hi, abs=1e-12)


def test_wilson_examples():
    assert wilson(0, 100).point == 0 and wilson(0, 100).hi == pytest.approx(0.0370, abs=5e-5)
    assert wilson(100, 100).lo == pytest.approx(0.9630, abs=5e-5)
    w = wilson(50, 100)
    assert w.point - w.lo == pytest.approx(w.hi - w.point, abs=1e-12)


def test_aggregate_conditional():
    recs = [TrialRecord(t, t % 2 == 0, True, True, True, t % 4 == 0, None) for t in range(40)]
    est = aggregate(recs, "not s_cond", "s_diff")
    assert (est.successes, est.trials) == (10, 20)
    with pytest.raises(ValueError):
        aggregate(recs, "s_cond", lambda r: False)


def test_implied_constant():
    assert implied_constant(0.0, -5) == -math.inf
    assert implied_constant(0.25, -5) == 3.0


def test_ball_enumeration_oracle():
    lvl = EnergyLevel(4)
    g = sample_instance(12, "gaussian", 40, 7)
    assert 2 * len(enumerate_solutions(g, lvl, 1 << 12)) == count_solutions_mitm(g, lvl)
