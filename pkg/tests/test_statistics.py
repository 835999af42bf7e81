import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from seqmt import statistics as S

BERN = S.SimpleLLR(h={1: 0.6, 0: 0.4}, g={1: 0.4, 0: 0.6})


def test_llr_update_bernoulli():
    s = S.StatisticState()
    s = S.llr_update(s, 1, BERN)
    assert s.value == pytest.approx(math.log(2 / 3))
    assert s.value == pytest.approx(-0.405, abs=1e-3)
    s = S.llr_update(s, 0, BERN)
    assert s.value == pytest.approx(0.0, abs=1e-15)
    assert s.n == 2


def test_llr_update_zero_densities():
    spec = S.SimpleLLR(h={0: 1.0}, g={0: 0.5, 1: 0.5})
    with pytest.raises(ValueError):
        S.llr_update(S.StatisticState(), 1, spec)
    spec = S.SimpleLLR(h={0: 0.5, 1: 0.5}, g={0: 1.0})
    assert S.llr_update(S.StatisticState(), 1, spec).value == -math.inf


def test_llr_update_callable_densities():
    from scipy.stats import norm

    spec = S.SimpleLLR(h=norm(0, 2).pdf, g=norm(1, 2).pdf)
    s = S.llr_update(S.StatisticState(), 0.7, spec)
    assert s.value == pytest.approx((0.7 - 0.5) / 4)


def test_gaussian_llr_update_closed_form():
    xs = [0.3, -1.2, 2.5, 0.9]
    s = S.StatisticState()
    for x in xs:
        s = S.gaussian_llr_update(s, x, 2.0)
    assert s.value == pytest.approx((sum(xs) - len(xs) / 2) / 4)
    with pytest.raises(ValueError):
        S.gaussian_llr_update(s, 0.0, 0.0)


def test_gaussian_vectorized_matches_scalar():
    rng = np.random.default_rng(0)
    x = rng.normal(0.5, 2, size=(30, 4))
    stat = S.GaussianLLRStatistic(2.0)
    vals, state = stat.advance(stat.initial_state(4), 0, x)
    for j in range(4):
        s = S.StatisticState()
        for n in range(30):
            s = S.gaussian_llr_update(s, x[n, j], 2.0)
            assert vals[n, j] == pytest.approx(s.value)
    # splitting into blocks gives the same paths
    v1, st1 = stat.advance(stat.initial_state(4), 0, x[:11])
    v2, _ = stat.advance(st1, 11, x[11:])
    assert_allclose(np.vstack([v1, v2]), vals)


def test_simple_llr_statistic_skips_padding():
    stat = S.SimpleLLRStatistic(BERN)
    block = np.array([[1.0, 0.0], [0.0, np.nan]])
    vals, _ = stat.advance(stat.initial_state(2), 0, block)
    assert vals[1, 0] == pytest.approx(0.0, abs=1e-15)
    assert vals[0, 1] == pytest.approx(math.log(1.5))


def _t_glr_oracle(x, delta):
    # direct likelihood maximization over the restricted parameter sets
    n = len(x)
    m = np.mean(x)
    s2 = np.mean((x - m) ** 2)

    def loglik(mu):
        return -n / 2 * math.log(np.mean((x - mu) ** 2))

    free = -n / 2 * math.log(s2)
    if m >= delta / 2:
        lam = free - loglik(0.0)
        return math.sqrt(2 * n * lam)
    lam = free - loglik(delta)
    return -math.sqrt(2 * n * lam)


def test_t_glr_value_against_likelihood_oracle():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        x = rng.normal(rng.uniform(-1, 2), rng.uniform(0.5, 3), size=n)
        got = S.t_glr_value(n, x.sum(), (x * x).sum(), 1.0)
        assert got == pytest.approx(_t_glr_oracle(x, 1.0), rel=1e-9)


def test_t_glr_value_errors():
    with pytest.raises(ValueError):
        S.t_glr_value(1, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        S.t_glr_value(3, 3.0, 3.0, 1.0)


def test_t_glr_paths_match_scalar():
    rng = np.random.default_rng(5)
    x = rng.normal(0.4, 2, size=(25, 3))
    paths = S.t_glr_paths(x, 1.0)
    assert np.all(np.isnan(paths[0]))
    for j in range(3):
        for n in range(2, 26):
            col = x[:n, j]
            assert paths[n - 1, j] == pytest.approx(S.t_glr_value(n, col.sum(), (col**2).sum(), 1.0), rel=1e-9)
    stat = S.TGlrStatistic(1.0)
    vals, _ = stat.advance(stat.initial_state(3), 0, x)
    assert_allclose(vals[1:], paths[1:], rtol=1e-9)


def test_t_glr_paths_axis_and_branches():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(4, 30))
    along = S.t_glr_paths(x, 1.0, axis=1)
    assert_allclose(along, S.t_glr_paths(x.T, 1.0).T)
    pos = S.t_glr_paths(x, 1.0, axis=1, branch="positive")
    neg = S.t_glr_paths(x, 1.0, axis=1, branch="negative")
    ok = ~np.isnan(along)
    assert np.all(pos[ok] >= 0) and np.all(neg[ok] <= 0)
    assert np.all((along[ok] == pos[ok]) | (along[ok] == neg[ok]))


def test_t_glr_known_sigma_is_normal_limit():
    x = np.array([1.2, 0.4, 1.9])
    got = S.t_glr_paths(x, 1.0, sigma=2.0)
    n = np.arange(1, 4)
    m = np.cumsum(x) / n
    assert_allclose(got, n * np.sqrt(np.log1p(m * m / 4)))


def _t_sf_oracle(t, df):
    c = math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2)) / math.sqrt(df * math.pi)
    dens = lambda u: c * (1 + u * u / df) ** (-(df + 1) / 2)  # noqa: E731
    val, _ = integrate.quad(dens, t, np.inf, epsabs=1e-14, epsrel=1e-12)
    return val


@pytest.mark.parametrize("n,mean,sighat", [(2, 0.5, 1.0), (10, 0.3, 2.0), (77, 1.0, 2.0), (30, -0.4, 1.3)])
def test_t_pvalue_against_integrated_density(n, mean, sighat):
    t = mean * math.sqrt(n - 1) / sighat
    assert S.t_pvalue(n, mean, sighat) == pytest.approx(_t_sf_oracle(t, n - 1), rel=1e-8)


def test_t_pvalue_edges():
    assert S.t_pvalue(10, 0.0, 1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        S.t_pvalue(1, 0.0, 1.0)
    with pytest.raises(ValueError):
        S.t_pvalue(5, 0.0, 0.0)


def test_gaussian_pvalue():
    assert S.gaussian_pvalue(4, 0.0, 2.0) == pytest.approx(0.5)
    # z = 1.959964 gives 0.025
    assert S.gaussian_pvalue(1, 1.959963984540054 * 2, 2.0) == pytest.approx(0.025, rel=1e-9)
    out = S.gaussian_pvalue(9, np.array([0.0, 6.0]), 2.0)
    assert out.shape == (2,)
    assert out[1] == pytest.approx(0.5 * math.erfc(1 / math.sqrt(2)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=30), st.floats(0.1, 3))
def test_t_glr_sign_follows_mean(xs, delta):
    x = np.array(xs)
    var = x.var()
    if var <= 1e-8 * max(1.0, float(np.mean(x * x))):
        return
    v = S.t_glr_value(len(x), x.sum(), (x * x).sum(), delta)
    assert (v >= 0) == (x.mean() >= delta / 2)


def test_parameter_validation():
    with pytest.raises(ValueError):
        S.GaussianMean(0.0)
    with pytest.raises(ValueError):
        S.GaussianMean(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        S.TGlr(0.0)
