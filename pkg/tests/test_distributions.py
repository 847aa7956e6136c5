import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from ruinlab.distributions import (
    ClosedForm,
    CommonShock,
    Degenerate,
    Exponential,
    GridConvolution,
    IndependentMargins,
    InfiniteMeanError,
    MonteCarlo,
    OscillatingPareto,
    Pareto,
    Quadrature,
    SpectralProduct,
    gauge_tail,
    gauge_tail_function,
    marginal_tail,
    mean_vector,
    sample_claims,
    spectral_W,
)
from ruinlab.geometry import Allocation, RuinSetSpec, build_gauge
from ruinlab.rng import Stream

HALF = Allocation((0.5, 0.5))
L1 = build_gauge(RuinSetSpec.sum_negative(2), HALF)
L2 = build_gauge(RuinSetSpec.any_negative(2), HALF)

margins = st.one_of(
    st.builds(Pareto, st.floats(1.2, 5.0), st.floats(0.5, 3.0)),
    st.builds(OscillatingPareto, st.floats(1.2, 5.0), st.floats(0.5, 3.0)),
    st.builds(Exponential, st.floats(0.2, 5.0)),
)


# ---------------------------------------------------------------- margins


def test_tail_examples():
    assert Pareto(2.0).tail(2.0) == pytest.approx(0.25)
    assert Pareto(2.0).tail(0.5) == 1.0
    assert OscillatingPareto(2.0).tail(1.0) == 1.0
    assert Exponential(1.0).tail(1.0) == pytest.approx(math.exp(-1))


def test_mean_vector_examples():
    np.testing.assert_allclose(mean_vector(IndependentMargins((Pareto(2.0), Pareto(2.0)))), [2.0, 2.0])
    np.testing.assert_allclose(mean_vector(IndependentMargins((Pareto(2.5), Pareto(2.5)))), [5 / 3, 5 / 3])
    np.testing.assert_allclose(mean_vector(IndependentMargins((Exponential(1.0), Exponential(1.0)))), [1.0, 1.0])


def test_infinite_mean_rejected():
    with pytest.raises(InfiniteMeanError):
        Pareto(0.9).mean()
    with pytest.raises(InfiniteMeanError):
        mean_vector(IndependentMargins((Pareto(0.9), Pareto(2.0))))


def test_oscillating_d_envelope():
    m = OscillatingPareto(2.0)
    xs = np.geomspace(1e2, 1e6, 400)
    r = m.tail(0.5 * xs) / m.tail(xs)
    assert r.min() >= 4 * math.exp(-2) - 1e-12
    assert r.max() <= 4 * math.exp(2) + 1e-12


@given(margins, st.floats(0.0, 1e3), st.floats(0.0, 1e3))
def test_tail_is_nonincreasing_probability(m, a, b):
    lo, hi = sorted((a, b))
    t_lo, t_hi = m.tail(lo), m.tail(hi)
    assert 0.0 <= t_hi <= t_lo <= 1.0


@given(margins, st.floats(0.001, 0.999))
def test_isf_inverts_tail(m, u):
    assert m.tail(m.isf(u)) == pytest.approx(u, rel=1e-7)


def _integrated_tail_reference(m, t):
    """Integral of the tail in log coordinates, one half-period of sin(log v) at a time."""
    lo = max(t, 1e-12)
    total = lo - t  # the tail is 1 on [0, 1e-12] for every margin here
    u = math.log(lo)
    kink = math.log(getattr(m, "lower", 1e-300) or 1e-300)
    while True:
        pts = [kink] if u < kink < u + math.pi else None
        f = lambda w: float(m.tail(math.exp(w))) * math.exp(w)
        piece, _ = integrate.quad(f, u, u + math.pi, epsabs=0, epsrel=1e-12, points=pts)
        total += piece
        u += math.pi
        if piece < 1e-14 * total:
            return total


@given(margins, st.floats(0.0, 50.0))
def test_integrated_tail_matches_quadrature(m, t):
    assert m.integrated_tail(t) == pytest.approx(_integrated_tail_reference(m, t), rel=1e-7, abs=1e-12)


@given(margins, st.floats(1.0, 1e4))
def test_log_tail_consistent(m, x):
    assert math.exp(m.log_tail(x)) == pytest.approx(m.tail(x), rel=1e-10, abs=1e-300)


# ---------------------------------------------------------------- claim models and sampling


def test_pareto_sample_mean():
    X = sample_claims(IndependentMargins((Pareto(2.0), Pareto(2.0))), Stream(11), 10**5)
    se = X.std(axis=0, ddof=1) / math.sqrt(X.shape[0])
    assert np.all(np.abs(X.mean(axis=0) - 2.0) <= 3 * se)


def test_common_shock_full_dependence():
    model = CommonShock(Pareto(2.0), 1.0, (Degenerate(0.0), Degenerate(0.0)))
    X = sample_claims(model, Stream(3), 1000)
    np.testing.assert_array_equal(X[:, 0], X[:, 1])


def test_sampling_is_deterministic(pareto2):
    a = sample_claims(pareto2, Stream(5), 1000)
    b = sample_claims(pareto2, Stream(5), 1000)
    c = sample_claims(pareto2, Stream(6), 1000)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize(
    "model",
    [
        IndependentMargins((Pareto(2.0), Exponential(0.5))),
        IndependentMargins((OscillatingPareto(2.0), Pareto(3.0, 2.0))),
        CommonShock(Pareto(2.5), 0.5, (Exponential(1.0), Pareto(3.0))),
        SpectralProduct(Pareto(2.0), (1.0, 2.0)),
    ],
    ids=["indep", "oscillating", "common-shock", "spectral"],
)
def test_sampled_margins_match_marginal_tail(model):
    n = 200_000
    X = sample_claims(model, Stream(21), n)
    for j in range(model.d):
        for x in (1.5, 3.0, 8.0):
            p = float(marginal_tail(model, j, x))
            freq = (X[:, j] > x).mean()
            assert abs(freq - p) <= 4 * math.sqrt(p * (1 - p) / n) + 1e-12


def test_sampled_mean_matches_mean_vector():
    model = CommonShock(Exponential(2.0), 1.5, (Exponential(1.0), Pareto(4.0)))
    X = sample_claims(model, Stream(2), 200_000)
    se = X.std(axis=0, ddof=1) / math.sqrt(X.shape[0])
    assert np.all(np.abs(X.mean(axis=0) - mean_vector(model)) <= 4 * se)


# ---------------------------------------------------------------- gauge tails


def test_l2_gauge_tail_product_formula(pareto2):
    assert gauge_tail(pareto2, L2, 4.0).value == pytest.approx(1 - (1 - 0.25) ** 2)


def test_gauge_tail_near_zero_is_one(pareto2):
    assert gauge_tail(pareto2, L1, 1e-9, Quadrature()).value == pytest.approx(1.0)
    assert gauge_tail(pareto2, L2, 1e-9).value == pytest.approx(1.0)


def test_mc_and_grid_backends_agree(pareto2):
    mc = gauge_tail(pareto2, L1, 50.0, MonteCarlo(10**6, seed=1))
    grid = gauge_tail(pareto2, L1, 50.0, GridConvolution(step=0.01))
    assert abs(mc.value - grid.value) <= 3 * mc.error + grid.error


def test_quadrature_within_grid_bracket(pareto2):
    q = gauge_tail(pareto2, L1, 50.0, Quadrature())
    grid = gauge_tail(pareto2, L1, 50.0, GridConvolution(step=0.01))
    assert abs(q.value - grid.value) <= grid.error + q.error + 1e-12


def test_closed_form_unavailable_raises(pareto2):
    with pytest.raises(ValueError):
        gauge_tail(pareto2, L1, 10.0, ClosedForm())


@given(st.floats(1.0, 200.0))
def test_l2_tail_dominates_line_tails(x):
    m = IndependentMargins((Pareto(2.0), Exponential(0.3)))
    v = gauge_tail(m, L2, x).value
    assert v >= max(m.margins[0].tail(x / 2), m.margins[1].tail(x / 2)) - 1e-15


def test_gauge_tail_function_is_monotone(pareto2):
    f = gauge_tail_function(pareto2, L1)
    xs = np.geomspace(1.0, 1e3, 30)
    v = f(xs)
    assert np.all(np.diff(v) <= 0)


def test_spectral_W_examples():
    assert spectral_W(L1, (0.3, 0.7)) == pytest.approx(1.0)
    assert spectral_W(L2, (0.3, 0.7)) == pytest.approx(5 / 7)
    assert spectral_W(L2, (1.0, 0.0)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        spectral_W(L2, (0.5, 0.6))
