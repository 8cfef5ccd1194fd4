import math
from fractions import Fraction

import numpy as np
import pytest

from polya_immigration.conditional_moments import (
    classical_rising_moment,
    conditional_moment_paths,
    estimate_limit_moments,
    factorial_to_raw,
    log_moment_gamma_form,
    log_moment_step_form,
    rising_factorial_moment_given_T,
    write_estimates_csv,
)
from polya_immigration.interarrival import (
    Deterministic,
    FiniteSupport,
    GeometricShifted,
    enumerate_arrivals,
    sample_arrivals,
)
from polya_immigration.urn_engine import UrnConfig, exact_pmf, exact_pmf_given_arrivals


def test_first_moment_hand_value():
    assert rising_factorial_moment_given_T(1, 2, 1, 1, [1, 1, 1], exact=True) == Fraction(15, 8)


def test_forms_agree_on_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 400))
        taus = rng.geometric(rng.uniform(0.05, 0.9), size=n + 1) - rng.integers(0, 2)
        taus = np.maximum(taus, 0)
        b, w, k = (int(x) for x in rng.integers(1, 6, size=3))
        a = log_moment_step_form(k, n, b, w, taus)
        g = log_moment_gamma_form(k, n, b, w, taus)
        assert abs(math.expm1(a - g)) < 1e-10


def test_exact_forms_on_zero_gaps():
    value = rising_factorial_moment_given_T(3, 9, 2, 1, [0, 0, 2, 0, 3, 4], exact=True)
    approx = rising_factorial_moment_given_T(3, 9, 2, 1, [0, 0, 2, 0, 3, 4])
    assert float(value) == pytest.approx(approx, rel=1e-12)


def test_conditional_moment_matches_conditional_pmf():
    taus = [0, 2, 1, 0, 3]
    pmf = exact_pmf_given_arrivals(2, 1, 7, taus)
    for k in (1, 2, 3):
        assert pmf.rising_moment(k) == rising_factorial_moment_given_T(k, 7, 2, 1, taus, exact=True)


def test_exact_pmf_mean_equals_averaged_conditional_moment():
    pi = FiniteSupport(((1, 0.5), (2, 0.5)))
    n = 6
    pmf = exact_pmf(UrnConfig(1, 2, pi, n))
    avg = sum(p * rising_factorial_moment_given_T(1, n, 1, 2, arr, exact=True) for arr, p in enumerate_arrivals(pi, n))
    assert pmf.mean() == avg


def test_no_arrivals_is_classical():
    for k in (1, 2, 4):
        val = rising_factorial_moment_given_T(k, 30, 2, 3, [100])
        assert val == pytest.approx(classical_rising_moment(k, 30, 2, 3), rel=1e-12)


def test_factorial_to_raw_on_point_mass():
    x = 7.0
    fact = [math.prod(x + i for i in range(k)) for k in range(1, 6)]
    np.testing.assert_allclose(factorial_to_raw(fact), [x**k for k in range(1, 6)], rtol=1e-12)
    unit = 10.0
    fact_u = [f / unit**k for k, f in enumerate(fact, start=1)]
    np.testing.assert_allclose(factorial_to_raw(fact_u, unit), [(x / unit) ** k for k in range(1, 6)], rtol=1e-12)


def test_paths_share_urn_arrival_streams():
    pi = GeometricShifted(0.4)
    rows = conditional_moment_paths(2, 1, 1, pi, 200, 3, seed=13, first_stream=5)
    arr = sample_arrivals(pi, 200, 13, stream=6)
    direct = rising_factorial_moment_given_T(2, 200, 1, 1, arr) / 200 ** (2 * pi.mean() / (pi.mean() + 1))
    assert rows[1, 1] == pytest.approx(direct, rel=1e-10)


def test_deterministic_limit_moments():
    est = estimate_limit_moments(3, 1, 1, Deterministic(1), 20_000, 4, seed=0)
    np.testing.assert_allclose([e.m_k for e in est], [2 / math.sqrt(math.pi), 2.0, 8 / math.sqrt(math.pi)], rtol=2e-4)
    assert all(e.std_error == 0 for e in est)


def test_raw_and_factorial_limits_agree():
    est = estimate_limit_moments(3, 1, 1, GeometricShifted(0.5), 20_000, 2000, seed=1)
    for f, r in zip(est, est.raw):
        assert r.m_k == pytest.approx(f.m_k, rel=0.02)
        assert f.std_error > 0


def test_bootstrap_errors_close_to_clt():
    a = estimate_limit_moments(2, 1, 1, GeometricShifted(0.5), 2000, 2000, seed=3)
    b = estimate_limit_moments(2, 1, 1, GeometricShifted(0.5), 2000, 2000, seed=3, bootstrap=True)
    for x, y in zip(a, b):
        assert x.m_k == y.m_k
        assert y.std_error == pytest.approx(x.std_error, rel=0.25)


def test_high_orders_skip_raw_conversion():
    est = estimate_limit_moments(24, 1, 1, GeometricShifted(0.5), 500, 50, seed=2)
    assert len(est) == 24 and len(est.raw) == 20


def test_estimates_csv(tmp_path):
    est = estimate_limit_moments(2, 1, 1, Deterministic(1), 100, 3, seed=0)
    path = tmp_path / "m.csv"
    write_estimates_csv(path, est)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,n,M,m_k_factorial,m_k_raw,std_error"
    assert len(lines) == 3
