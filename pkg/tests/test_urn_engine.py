import math
from fractions import Fraction

import numpy as np
import pytest

from polya_immigration.errors import TooLargeError
from polya_immigration.interarrival import Deterministic, FiniteSupport, GeometricShifted, INFINITE
from polya_immigration.urn_engine import (
    UrnConfig,
    classical_pmf,
    exact_pmf,
    exact_pmf_given_arrivals,
    scaled_white,
    simulate_batch,
    simulate_classical_polya,
    simulate_urn,
)
from polya_immigration.stat_harness import ks_vs_cdf

DELTA1 = Deterministic(1)
TWO_POINT = FiniteSupport(((0, 0.5), (1, 0.5)))


def test_exact_pmf_hand_enumeration():
    pmf = exact_pmf(UrnConfig(1, 1, DELTA1, 2))
    assert dict(pmf) == {1: Fraction(3, 8), 2: Fraction(3, 8), 3: Fraction(1, 4)}
    assert pmf.mean() == Fraction(15, 8)
    assert dict(exact_pmf(UrnConfig(1, 1, DELTA1, 1))) == {1: Fraction(1, 2), 2: Fraction(1, 2)}
    assert dict(exact_pmf(UrnConfig(2, 3, DELTA1, 0))) == {3: 1}


def test_exact_pmf_sums_to_one_with_zero_gaps():
    pmf = exact_pmf(UrnConfig(1, 2, TWO_POINT, 6))
    assert abs(pmf.total() - 1.0) < 1e-12
    assert min(pmf) >= 2 and max(pmf) <= 8


def test_exact_pmf_limits():
    with pytest.raises(TooLargeError):
        exact_pmf(UrnConfig(1, 1, DELTA1, 11))
    with pytest.raises(TooLargeError):
        exact_pmf(UrnConfig(1, 1, GeometricShifted(0.5), 3))


def test_zero_first_gap_adds_black_before_first_draw():
    # gaps (0, then never again within the horizon): one extra black before draw 1
    pmf = exact_pmf_given_arrivals(1, 1, 1, [0, 5])
    assert pmf[2] == Fraction(1, 3)


def test_first_draw_probability_by_simulation():
    batch = simulate_batch(UrnConfig(1, 1, DELTA1, 1), 100_000, seed=4)
    p = (batch.white == 2).mean()
    assert abs(p - 0.5) < 4 * math.sqrt(0.25 / 100_000)


def test_n_zero_returns_initial_whites():
    res = simulate_urn(UrnConfig(2, 5, TWO_POINT, 0), seed=1)
    assert res.white == 5


def test_path_invariants():
    cfg = UrnConfig(2, 3, TWO_POINT, 200)
    res = simulate_urn(cfg, seed=9, stream=4, record_path=True)
    assert cfg.w <= res.white <= cfg.w + cfg.n
    assert res.black == cfg.b + res.immigrants + (cfg.n - (res.white - cfg.w))
    assert res.immigrants == res.arrivals.count(cfg.n)
    total = res.path.sum(axis=1)
    np.testing.assert_array_equal(np.diff(res.path[:, 0]) >= 0, True)
    assert np.all(np.diff(total) >= 1)


def test_no_immigration_before_first_arrival_is_classical():
    cfg = UrnConfig(2, 1, Deterministic(10), 6)
    pmf = exact_pmf(cfg).as_float()
    ref = classical_pmf(6, 2, 1)
    np.testing.assert_allclose([pmf.get(1 + j, 0.0) for j in range(7)], ref, atol=1e-15)


def test_empirical_matches_exact():
    cfg = UrnConfig(1, 2, TWO_POINT, 5)
    pmf = exact_pmf(cfg).as_float()
    batch = simulate_batch(cfg, 100_000, seed=21)
    for x, p in pmf.items():
        freq = (batch.white == x).mean()
        assert abs(freq - p) <= 4 * math.sqrt(p * (1 - p) / 100_000) + 1e-12


def test_immigration_stochastically_decreases_whites():
    base = exact_pmf(UrnConfig(1, 1, Deterministic(10), 6)).as_float()
    more = exact_pmf(UrnConfig(1, 1, DELTA1, 6)).as_float()
    xs = range(1, 8)
    cdf_base = np.cumsum([base.get(x, 0) for x in xs])
    cdf_more = np.cumsum([more.get(x, 0) for x in xs])
    assert np.all(cdf_more >= cdf_base - 1e-15)


def test_batch_is_independent_of_scheduling():
    cfg = UrnConfig(1, 1, GeometricShifted(0.3), 500)
    whole = simulate_batch(cfg, 40, seed=8)
    tail = simulate_batch(cfg, 20, seed=8, first_stream=20)
    np.testing.assert_array_equal(whole.white[20:], tail.white)
    single = simulate_urn(cfg, seed=8, stream=7)
    assert single.white == whole.white[7]


def test_scaled_white():
    assert scaled_white(100, 100, 1.0) == pytest.approx(10.0)
    assert scaled_white(50, 100, INFINITE) == pytest.approx(0.5)
    assert scaled_white(3, 1, 2.0) == pytest.approx(3.0)


def test_batch_csv(tmp_path):
    batch = simulate_batch(UrnConfig(1, 1, DELTA1, 100), 5, seed=2)
    path = tmp_path / "urn.csv"
    batch.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "seed_stream,n,X_n,N_n,scaled_value"
    assert len(lines) == 6


def test_classical_polya_mean():
    q, v = simulate_classical_polya(1, 1, 2, seed=3, size=200_000)
    assert abs(q.mean() - 2.0) < 4 * q.std() / math.sqrt(q.size)


def test_classical_polya_coupling_and_limit():
    n = 10_000
    q, v = simulate_classical_polya(1, 1, n, seed=5, size=10_000)
    assert np.all(np.abs(q - n * v) < 1 * (4 * 1 + 1 + 1))
    assert ks_vs_cdf(q / n, lambda x: np.clip(x, 0, 1)).statistic < 0.02


@pytest.mark.parametrize("beta,omega", [(2, 3), (4, 1), (3, 5)])
def test_classical_polya_coupling_bound(beta, omega):
    n = 2000
    q, v = simulate_classical_polya(beta, omega, n, seed=beta * 10 + omega, size=5000)
    assert np.all(np.abs(q - n * v) < beta * (4 * omega + beta + 1))
