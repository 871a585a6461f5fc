import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from tailratio.asymptotics import solve_log_sf
from tailratio.errors import DomainError
from tailratio.families import FAMILY_NAMES, builtin_family
from tailratio.integrals import log_sf
from tailratio.sampling import (
    SeededStream,
    inverse_cdf,
    quantile_table,
    sample_exceedances,
    sample_full,
    sample_topk,
    uniform_top_log_tails,
)

W = builtin_family("weibull")


def test_inverse_cdf_examples():
    assert inverse_cdf(W, 1.0, 1 - math.exp(-3.0)) == pytest.approx(3.0, rel=1e-14)
    assert inverse_cdf(builtin_family("normal_variance"), 1.0, 0.975) == pytest.approx(1.959964, abs=1e-6)
    assert inverse_cdf(builtin_family("normal_variance"), 1.0, 0.975) == pytest.approx(stats.norm.ppf(0.975), rel=1e-13)
    with pytest.raises(DomainError):
        inverse_cdf(W, 2.0, 1.0)


@given(st.floats(1e-9, 1 - 1e-9), st.floats(1e-9, 1 - 1e-9))
@settings(max_examples=40, deadline=None)
def test_inverse_cdf_monotone(p1, p2):
    if p1 == p2:
        return
    lo, hi = sorted((p1, p2))
    assert inverse_cdf(W, 2.0, lo) <= inverse_cdf(W, 2.0, hi)


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_table_against_exact_inversion(name):
    fam = builtin_family(name)
    g = {"weibull": 2.0, "log_weibull": 2.0}.get(name, 1.0)
    table = quantile_table(fam, g)
    probes = -np.geomspace(1e-6, 60.0, 64)
    xs = table.inverse_log_sf(probes)
    for x, lt in zip(xs, probes):
        if lt < math.log(0.5):
            exact = solve_log_sf(fam, g, float(lt))[0]
            assert x == pytest.approx(exact, rel=1e-8, abs=1e-12)
        assert log_sf(fam, g, x) == pytest.approx(lt, rel=1e-8, abs=1e-12)


def test_weibull_quantiles_closed_form():
    # P(X > x) = Q(1/2, x^2) for gamma = 2
    p = np.geomspace(1e-12, 0.9, 30)
    xs = quantile_table(W, 2.0).inverse_log_sf(np.log(p))
    expected = np.sqrt(special.gammainccinv(0.5, p))
    np.testing.assert_allclose(xs, expected, rtol=1e-10)


def test_determinism_and_ordering():
    a = sample_topk(W, 2.0, 100_000, 25, SeededStream(9, 4))
    b = sample_topk(W, 2.0, 100_000, 25, SeededStream(9, 4))
    c = sample_topk(W, 2.0, 100_000, 25, SeededStream(9, 5))
    assert np.array_equal(a.top, b.top) and a.threshold == b.threshold
    assert not np.array_equal(a.top, c.top)
    assert np.all(np.diff(a.top) <= 0) and a.threshold <= a.top[-1]


def test_stream_keys_are_independent():
    g0 = SeededStream(1, 0, (0,)).generator().random(4)
    g1 = SeededStream(1, 0, (1,)).generator().random(4)
    assert not np.array_equal(g0, g1)


def test_uniform_maximum_is_beta():
    rng = np.random.default_rng(2024)
    n = 200
    # log tails are ln(1 - U); U_(n) = 1 - exp(first)
    u_max = 1 - np.exp(np.array([uniform_top_log_tails(n, 3, rng)[0] for _ in range(20000)]))
    assert stats.kstest(u_max, stats.beta(n, 1).cdf).statistic < 0.02


def test_exceedances_exponential_memoryless():
    q = 2.0
    x = sample_exceedances(W, 1.0, q, 100_000, SeededStream(5))
    assert np.all(x > q)
    assert abs(x.mean() - (q + 1.0)) <= 3 / math.sqrt(100_000)


def test_topk_matches_full_sort_small():
    reps = 2000
    top = [sample_topk(W, 2.0, 200, 5, SeededStream(1, r)).top[0] for r in range(reps)]
    full = [sample_full(W, 2.0, 200, SeededStream(2, r))[-1] for r in range(reps)]
    assert stats.ks_2samp(top, full).statistic < 0.05


@pytest.mark.slow
def test_topk_given_threshold_matches_exceedances():
    # Conditionally on X_(n-k) = q the top k are i.i.d. from the law above q.
    top, exc = [], []
    for r in range(20000):
        s = sample_topk(W, 2.0, 200, 5, SeededStream(1, r))
        top.extend(s.top - s.threshold)
        exc.extend(sample_exceedances(W, 2.0, s.threshold, 5, SeededStream(3, r)) - s.threshold)
    assert stats.ks_2samp(top, exc).statistic < 0.02


def test_invalid_sizes():
    with pytest.raises(DomainError):
        sample_topk(W, 2.0, 10, 10, SeededStream(0))
    with pytest.raises(DomainError):
        sample_exceedances(W, 2.0, 1.0, 0, SeededStream(0))
