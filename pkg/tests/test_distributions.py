import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lstm_formal.distributions import (
    PRESETS,
    DistributionSpec,
    LengthWindow,
    ln_beta,
    pmf,
    pmf_table,
    sample_length,
    sample_lengths,
)

from oracles import betabinom_pmf_mp, ln_beta_mp, pooled_chisquare

WINDOWS = [LengthWindow(1, 30), LengthWindow(1, 50), LengthWindow(50, 100)]
W50 = LengthWindow(1, 50)


def test_uniform_pmf():
    spec = PRESETS["uniform"]
    assert pmf(spec, W50, 25) == pytest.approx(0.02, abs=1e-15)
    assert pmf(spec, W50, 51) == 0.0
    assert pmf(spec, W50, 0) == 0.0


def test_right_tailed_first_mass_closed_form():
    assert pmf(PRESETS["right-tailed"], W50, 1) == pytest.approx(5 / 54, rel=1e-12)


@pytest.mark.parametrize("a,b", [(1, 1), (1, 5), (0.25, 0.25), (5, 1), (3.7, 0.01), (120.5, 80.25)])
def test_ln_beta_against_high_precision(a, b):
    expected = ln_beta_mp(a, b)
    assert ln_beta(a, b) == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_ln_beta_examples():
    assert ln_beta(1, 1) == 0.0
    assert ln_beta(1, 5) == pytest.approx(math.log(1 / 5), rel=1e-12)
    # Gamma(1/4)^2 / Gamma(1/2), value from mpmath at 30 digits
    assert ln_beta(0.25, 0.25) == pytest.approx(2.0036801064714548, rel=1e-12)


@pytest.mark.parametrize("a,b", [(0, 1), (1, -2), (-0.5, -0.5)])
def test_ln_beta_rejects_nonpositive(a, b):
    with pytest.raises(ValueError):
        ln_beta(a, b)


@pytest.mark.parametrize("name", ["u-shaped", "right-tailed", "left-tailed"])
@pytest.mark.parametrize("window", WINDOWS, ids=str)
def test_betabinomial_pmf_matches_mpmath(name, window):
    spec = PRESETS[name]
    N = window.hi - window.lo
    for n in range(window.lo, window.hi + 1):
        assert pmf(spec, window, n) == pytest.approx(betabinom_pmf_mp(N, n - window.lo, spec.alpha, spec.beta), rel=1e-10)


@pytest.mark.parametrize("name", list(PRESETS))
@pytest.mark.parametrize("window", WINDOWS, ids=str)
def test_pmf_sums_to_one(name, window):
    assert abs(pmf_table(PRESETS[name], window).sum() - 1.0) <= 1e-9


@pytest.mark.parametrize("window", WINDOWS, ids=str)
def test_shapes(window):
    lo, hi, mid = window.lo, window.hi, (window.lo + window.hi) // 2
    right = pmf_table(PRESETS["right-tailed"], window)
    left = pmf_table(PRESETS["left-tailed"], window)
    assert right.argmax() == 0
    assert left.argmax() == len(left) - 1
    u = PRESETS["u-shaped"]
    assert pmf(u, window, lo) > pmf(u, window, mid)
    assert pmf(u, window, hi) > pmf(u, window, mid)


@given(st.floats(0.05, 20), st.integers(1, 40), st.integers(0, 80))
def test_symmetric_parameters_give_symmetric_endpoints(alpha, lo, width):
    window = LengthWindow(lo, lo + width)
    spec = DistributionSpec("beta-binomial", alpha, alpha)
    assert pmf(spec, window, window.lo) == pytest.approx(pmf(spec, window, window.hi), rel=1e-12)


def test_singleton_window():
    rng = np.random.default_rng(3)
    assert all(sample_length(PRESETS["uniform"], LengthWindow(7, 7), rng) == 7 for _ in range(10))
    assert pmf(PRESETS["left-tailed"], LengthWindow(7, 7), 7) == pytest.approx(1.0)


def test_support_bounds():
    rng = np.random.default_rng(11)
    draws = [sample_length(PRESETS["u-shaped"], W50, rng) for _ in range(2000)]
    assert min(draws) >= 1 and max(draws) <= 50


def test_vectorised_sampler_matches_scalar_calls():
    spec = PRESETS["right-tailed"]
    a = sample_lengths(spec, W50, np.random.default_rng(5), 500)
    rng = np.random.default_rng(5)
    b = [sample_length(spec, W50, rng) for _ in range(500)]
    assert a.tolist() == b


def test_uniform_frequency_of_one():
    draws = sample_lengths(PRESETS["uniform"], W50, np.random.default_rng(2024), 10**6)
    assert abs(np.mean(draws == 1) - 0.02) <= 0.001


@pytest.mark.parametrize("name", list(PRESETS))
@pytest.mark.parametrize("window", WINDOWS, ids=str)
def test_goodness_of_fit(name, window):
    spec = PRESETS[name]
    draws = sample_lengths(spec, window, np.random.default_rng(17), 10**5)
    observed = np.bincount(draws - window.lo, minlength=window.size)
    expected = pmf_table(spec, window) * len(draws)
    assert pooled_chisquare(observed, expected).pvalue > 0.001


def test_parse_strings():
    assert DistributionSpec.parse("uniform") == DistributionSpec()
    assert DistributionSpec.parse("u-shaped") == DistributionSpec("beta-binomial", 0.25, 0.25)
    assert DistributionSpec.parse("beta-binomial:2,3.5") == DistributionSpec("beta-binomial", 2.0, 3.5)
    assert str(DistributionSpec.parse("left-tailed")) == "left-tailed"
    assert DistributionSpec.parse(str(DistributionSpec("beta-binomial", 0.1, 7.0))) == DistributionSpec("beta-binomial", 0.1, 7.0)
    for bad in ["gaussian", "beta-binomial:1", "beta-binomial:0,1"]:
        with pytest.raises(ValueError):
            DistributionSpec.parse(bad)


def test_window_validation():
    assert LengthWindow.parse("50:100") == LengthWindow(50, 100)
    for lo, hi in [(0, 5), (6, 5)]:
        with pytest.raises(ValueError):
            LengthWindow(lo, hi)
    with pytest.raises(ValueError):
        LengthWindow.parse("1-50")
