import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ruinlab.distributions import Degenerate, Exponential, IndependentMargins, Pareto
from ruinlab.geometry import Allocation, RuinSetSpec, build_gauge
from ruinlab.montecarlo import HorizonPolicy, run_ensemble
from ruinlab.process import (
    ErlangArrivals,
    ExpArrivals,
    FixedArrivals,
    LogNormalArrivals,
    NetProfitViolation,
    RiskModel,
    drift_c,
    drift_c_star,
    sample_increment,
    sample_increments,
    simulate_walk,
)
from ruinlab.rng import Stream

HALF = Allocation((0.5, 0.5))
ONE = Allocation((1.0,))
L1 = build_gauge(RuinSetSpec.sum_negative(2), HALF)
L1_1d = build_gauge(RuinSetSpec.sum_negative(1), ONE)


def test_drift_examples():
    m = RiskModel(IndependentMargins((Pareto(2.0),)), ExpArrivals(1.0), [3.0], ONE)
    np.testing.assert_allclose(drift_c(m), [1.0])
    m2 = RiskModel(IndependentMargins((Pareto(2.5), Pareto(2.5))), FixedArrivals(1.0), [2.75, 2.75], HALF)
    np.testing.assert_allclose(drift_c(m2), [2.75 - 5 / 3] * 2)


def test_brownian_parameters_do_not_move_c(pareto_walk):
    pert = pareto_walk.replace(delta=[1.0, 2.0], brownian_drift=[0.1, 0.0], brownian_cov=np.eye(2))
    np.testing.assert_array_equal(drift_c(pert), drift_c(pareto_walk))


def test_c_star_examples(pareto_walk):
    np.testing.assert_array_equal(drift_c_star(pareto_walk), drift_c(pareto_walk))
    m = RiskModel(IndependentMargins((Pareto(2.0),)), ExpArrivals(1.0), [3.0], ONE, delta=[2.0], brownian_drift=[0.05])
    np.testing.assert_allclose(drift_c_star(m), [1.1])


def test_net_profit_violation():
    with pytest.raises(NetProfitViolation):
        RiskModel(IndependentMargins((Pareto(2.0), Pareto(2.0))), ExpArrivals(1.0), [1.9, 3.0], HALF)
    # a positive Brownian drift can rescue a negative c
    m = RiskModel(IndependentMargins((Pareto(2.0),)), ExpArrivals(1.0), [1.9], ONE, delta=[1.0], brownian_drift=[0.2])
    assert drift_c(m)[0] < 0 < drift_c_star(m)[0]


def test_invalid_parameters():
    claims = IndependentMargins((Pareto(2.0), Pareto(2.0)))
    with pytest.raises(ValueError):
        RiskModel(claims, ExpArrivals(1.0), [-1.0, 3.0], HALF)
    with pytest.raises(ValueError):
        RiskModel(claims, ExpArrivals(1.0), [3.0, 3.0], HALF, delta=[-1.0, 0.0])
    with pytest.raises(ValueError):
        RiskModel(claims, ExpArrivals(1.0), [3.0, 3.0], HALF, brownian_cov=[[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ValueError):
        RiskModel(claims, ExpArrivals(1.0), [3.0, 3.0], ONE)


def test_model_arrays_are_read_only(pareto_walk):
    with pytest.raises(ValueError):
        pareto_walk.premium[0] = 10.0


def test_singular_covariance_is_accepted():
    claims = IndependentMargins((Pareto(2.0), Pareto(2.0)))
    m = RiskModel(claims, ExpArrivals(1.0), [3.0, 3.0], HALF, delta=[1.0, 1.0], brownian_cov=np.ones((2, 2)))
    inc = sample_increments(m, Stream(0), 20_000)
    np.testing.assert_allclose(inc.dB[:, 0], inc.dB[:, 1], atol=1e-4)


def test_forced_increment_arithmetic():
    # X = (4, 2) forced, theta = 1, p = (5, 3): W = Z = X - p
    m = RiskModel(IndependentMargins((Degenerate(4.0), Degenerate(2.0))), FixedArrivals(1.0), [5.0, 3.0], HALF)
    inc = sample_increment(m, Stream(0))
    np.testing.assert_allclose(inc.W, [-1.0, -1.0])
    np.testing.assert_allclose(inc.Z, [-1.0, -1.0])
    np.testing.assert_array_equal(inc.dB, [0.0, 0.0])


def test_zero_covariance_gives_zero_brownian(pareto_walk):
    m = pareto_walk.replace(delta=[1.0, 1.0])
    inc = sample_increments(m, Stream(1), 1000)
    assert not np.any(inc.dB)


def test_increment_mean_matches_c_star():
    claims = IndependentMargins((Exponential(1.0), Pareto(3.0)))
    m = RiskModel(claims, ErlangArrivals(2, 2.0), [2.5, 2.5], HALF, delta=[1.0, 0.5],
                  brownian_drift=[0.2, 0.4], brownian_cov=[[1.0, 0.3], [0.3, 2.0]])
    inc = sample_increments(m, Stream(4), 10**5)
    se = inc.W.std(axis=0, ddof=1) / math.sqrt(10**5)
    assert np.all(np.abs(-inc.W.mean(axis=0) - drift_c_star(m)) <= 3 * se)


def test_brownian_increment_moments():
    cov = np.array([[1.0, 0.5], [0.5, 2.0]])
    m = RiskModel(IndependentMargins((Exponential(1.0), Exponential(1.0))), FixedArrivals(2.0), [2.0, 2.0], HALF,
                  delta=[1.0, 1.0], brownian_drift=[0.1, 0.0], brownian_cov=cov)
    inc = sample_increments(m, Stream(9), 200_000)
    np.testing.assert_allclose(inc.dB.mean(axis=0), [0.2, 0.0], atol=0.015)
    np.testing.assert_allclose(np.cov(inc.dB.T), 2.0 * cov, rtol=0.02, atol=0.02)


@pytest.mark.parametrize(
    "arrivals", [ExpArrivals(2.0), ErlangArrivals(3, 1.5), FixedArrivals(0.7), LogNormalArrivals(-0.2, 0.5)],
    ids=["exp", "erlang", "fixed", "lognormal"],
)
def test_interarrival_mean(arrivals):
    m = RiskModel(IndependentMargins((Exponential(1.0),)), arrivals, [10.0], ONE)
    th = sample_increments(m, Stream(8), 100_000).theta
    se = th.std(ddof=1) / math.sqrt(th.size) + 1e-12
    assert abs(th.mean() - arrivals.mean()) <= 4 * se


def test_walk_forced_single_step_entry():
    # the first increment of path 0 is the first step of the walk on path 0
    m = RiskModel(IndependentMargins((Pareto(1.5, 10.0),)), FixedArrivals(1.0), [40.0], ONE)
    seed = next(s for s in range(1000) if sample_increment(m, Stream(s)).W[0] > 1.0)
    w0 = float(sample_increment(m, Stream(seed)).W[0])
    r = simulate_walk(m, L1_1d, 0.5 * w0, HorizonPolicy(), Stream(seed))
    assert r.ruined and r.steps == 1 and r.stop_reason == "ruin"
    assert r.max_projection == pytest.approx(w0)


def test_walk_without_claims_never_ruins():
    m = RiskModel(IndependentMargins((Degenerate(0.0), Degenerate(0.0))), ExpArrivals(1.0), [1.0, 1.0], HALF)
    r = simulate_walk(m, L1, 1.0, HorizonPolicy(max_steps=1000), Stream(0))
    assert not r.ruined and r.max_projection <= 0 and r.stop_reason != "ruin"


def test_walk_paths_agree_with_ensemble(cl_model):
    n, x = 2000, 3.0
    ens = run_ensemble(cl_model, L1_1d, [x], n, seed=Stream(5))
    ruined = sum(simulate_walk(cl_model, L1_1d, x, HorizonPolicy(), Stream(5), path=i).ruined for i in range(n))
    assert ruined == ens.skeleton_hits[0]


def test_walk_cramer_lundberg_frequency(cl_model):
    n, x = 4000, 2.0
    hits = sum(simulate_walk(cl_model, L1_1d, x, HorizonPolicy(), Stream(12), path=i).ruined for i in range(n))
    p = 0.8 * math.exp(-0.2 * x)
    assert abs(hits / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


@given(st.floats(2.1, 10.0), st.floats(0.1, 3.0), st.floats(0.0, 2.0), st.floats(0.0, 0.5))
def test_c_star_dominates_c(premium, rate, delta, m):
    model = RiskModel(IndependentMargins((Exponential(rate),)), ExpArrivals(1.0), [premium + 1.0 / rate], ONE,
                      delta=[delta], brownian_drift=[m], brownian_cov=[[1.0]])
    assert drift_c_star(model)[0] >= drift_c(model)[0]
    assert drift_c_star(model)[0] == pytest.approx(drift_c(model)[0] + delta * m)
