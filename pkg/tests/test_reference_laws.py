import math

import numpy as np
import pytest
from scipy import stats

from polya_immigration.reference_laws import (
    bernoulli_moments,
    bernoulli_pi_from_a,
    deterministic_limit,
    log_erfc_fourth_derivative,
    non_closure_checks,
    powerlaw_reference,
    uexp_density,
)
from polya_immigration.stat_harness import ks_critical, ks_two_sample, ks_vs_cdf
from polya_immigration.ul_family import Polynomial, ULSpec

ERFC_CONSTANT = 32 * (3 - math.pi) / math.pi**2


def test_deterministic_limit_density_shape():
    lim = deterministic_limit(1, 1, 2.0)
    x = np.linspace(0.1, 5, 30)
    ratio = lim.spec.density(x) / np.exp(-(x**2) / 4)
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-10)
    assert lim.spec.coefficient(2) == pytest.approx(0.5)


def test_deterministic_limit_rayleigh_case():
    # w = 2, k = 1: Z^2 is exponential, so Z is Rayleigh
    lim = deterministic_limit(2, 1, 1.5)
    x = np.linspace(0.05, 4, 40)
    sigma = math.sqrt(lim.scale / 2)
    np.testing.assert_allclose(lim.cdf(x), stats.rayleigh(scale=sigma).cdf(x), atol=1e-14)


@pytest.mark.parametrize("w,k,m", [(1, 1, 2.0), (2, 2, 3.0), (3, 1, 0.7)])
def test_deterministic_sampler_matches_ulspec(w, k, m):
    lim = deterministic_limit(w, k, m)
    a = lim.sample(100_000, seed=1)
    b = lim.spec.sample(100_000, seed=2)
    assert ks_two_sample(a, b).statistic < 0.01
    for j in (1, 2, 3):
        assert lim.moment(j) == pytest.approx(lim.spec.moment(j), rel=1e-9)
    assert lim.moment(k + 1) == pytest.approx(m, rel=1e-12)


def test_deterministic_limit_domain():
    with pytest.raises(ValueError):
        deterministic_limit(1, 0, 1.0)
    with pytest.raises(ValueError):
        deterministic_limit(1, 1, 0.0)


def test_bernoulli_moments_against_quadrature():
    ez, ez2 = bernoulli_moments(2, 1.0, 1.0)
    spec = ULSpec(2, Polynomial((1.0, 1.0)))
    assert abs(ez - spec.moment(1)) < 1e-8
    assert abs(ez2 - spec.moment(2)) < 1e-8


@pytest.mark.parametrize("w", [1, 2, 3, 5])
@pytest.mark.parametrize("a1,a2", [(1.0, 1.0), (0.3, 2.0), (2.0, 0.5)])
def test_bernoulli_consistency(w, a1, a2):
    ez, ez2 = bernoulli_moments(w, a1, a2)
    assert abs(a1 * ez + a2 * ez2 - 1.0) < 1e-8
    pi0, pi1 = bernoulli_pi_from_a(w, a1, a2)
    assert 0 < pi0 < 1 and pi0 + pi1 == pytest.approx(1.0)
    assert pi0 == pytest.approx(a1 * ez, abs=1e-8)


@pytest.mark.parametrize("w", [1, 2, 4])
def test_bernoulli_pi_depends_on_ratio_only(w):
    a = bernoulli_pi_from_a(w, 0.7, 1.3)[0]
    b = bernoulli_pi_from_a(w, 1.4, 5.2)[0]
    assert abs(a - b) < 1e-10


@pytest.mark.parametrize("w", [1, 2, 3])
def test_bernoulli_scan_is_monotone(w):
    ratios = np.logspace(-4, 4, 81)
    pi0 = np.array([bernoulli_pi_from_a(w, math.sqrt(r), 1.0)[0] for r in ratios])
    assert np.all(np.diff(pi0) > 0)
    assert pi0[0] < 0.02 and pi0[-1] > 0.98


def test_bernoulli_homogeneity():
    theta = 2.7
    ez = bernoulli_moments(2, 1.0, 1.0)[0]
    scaled = bernoulli_moments(2, 1.0 / theta, 1.0 / theta**2)[0]
    assert scaled == pytest.approx(theta * ez, rel=1e-8)


def test_bernoulli_small_a1_limit():
    ez = bernoulli_moments(1, 1e-6, 2.0, check=False)[0]
    pure = ULSpec(1, Polynomial((0.0, 2.0))).moment(1)
    assert abs(ez - pure) < 1e-6


def test_powerlaw_pmf_and_mean():
    ref = powerlaw_reference(1, 1, 1)
    j = np.arange(0, 200)
    np.testing.assert_allclose(ref.pmf(j), 2.0 / ((j + 2) * (j + 3)), rtol=1e-12)
    assert ref.pi.normalization_check() == pytest.approx(1.0, abs=1e-10)
    assert ref.moment(1) == pytest.approx(1 / 3, rel=1e-14)
    assert ref.beta_law.mean() == pytest.approx(1 / 3)


@pytest.mark.parametrize("alpha,beta,w", [(1, 1, 1), (2, 0.5, 2), (0.5, 3, 3)])
def test_powerlaw_reference_matches_ulspec(alpha, beta, w):
    ref = powerlaw_reference(alpha, beta, w)
    for j in (1, 2, 3):
        assert ref.moment(j) == pytest.approx(ref.spec.moment(j), rel=1e-9)
    res = ks_two_sample(ref.sample(100_000, seed=3), ref.spec.sample(100_000, seed=4))
    assert res.statistic < ks_critical(100_000, 100_000)


def test_powerlaw_small_beta_is_uniform():
    ref = powerlaw_reference(1, 1e-6, 1)
    assert ks_vs_cdf(ref.sample(100_000, seed=5), lambda x: np.clip(x, 0, 1)).statistic < 0.01


def test_uexp_density_is_exponential_integral():
    from scipy import special

    for x in (1e-4, 0.3, 2.0):
        assert uexp_density(x) == pytest.approx(special.exp1(x), rel=1e-10)


def test_erfc_fourth_derivative():
    value = log_erfc_fourth_derivative()
    assert abs(value - ERFC_CONSTANT) < 1e-4
    assert value < 0


def test_non_closure_report():
    rep = non_closure_checks()
    assert rep.erfc_matches and rep.erfc_negative
    # E_1(x) + log x + Euler's constant behaves like x near zero
    for gap, x in zip(rep.euler_gap, rep.log_points):
        assert abs(gap) <= 2 * x
    assert all(r > 0.85 for r in rep.log_ratio)
    assert list(rep.log_ratio) == sorted(rep.log_ratio)
