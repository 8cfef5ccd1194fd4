import math

import mpmath as mp
import numpy as np
import pytest

from polya_immigration.errors import DomainError
from polya_immigration.special_functions import (
    kummer_u,
    log_gamma,
    log_gamma_ratio,
    stirling_first_unsigned,
)


def test_log_gamma_recurrence():
    x = np.linspace(0.1, 100, 997)
    np.testing.assert_array_less(np.abs(log_gamma(x + 1) - log_gamma(x) - np.log(x)), 1e-12)


def test_log_gamma_domain():
    with pytest.raises(DomainError):
        log_gamma(0.0)
    with pytest.raises(DomainError):
        log_gamma(np.array([1.0, -2.0]))
    assert log_gamma(1.0) == 0.0


@pytest.mark.parametrize("x,a,b", [(5.0, 0.5, 1.5), (1e4, 2.0, 3.0), (3e7, 1.0, 2.5), (1e12, 4.0, 0.5)])
def test_log_gamma_ratio_against_mpmath(x, a, b):
    with mp.workdps(50):
        ref = float(mp.loggamma(mp.mpf(x) + a) - mp.loggamma(mp.mpf(x) + b))
    assert float(log_gamma_ratio(x, a, b)) == pytest.approx(ref, rel=1e-11, abs=1e-11)


def test_kummer_u_against_mpmath():
    rng = np.random.default_rng(7)
    for _ in range(60):
        a = rng.uniform(0.05, 6)
        b = rng.uniform(-2, 3)
        z = 10 ** rng.uniform(-3, 1.5)
        ref = float(mp.hyperu(a, b, z))
        assert kummer_u(a, b, z) == pytest.approx(ref, rel=1e-10)


def test_kummer_u_tiny_argument():
    assert kummer_u(1.5, 0.5, 5e-13) == pytest.approx(float(mp.hyperu(1.5, 0.5, 5e-13)), rel=1e-10)


def test_kummer_identity_grid():
    # U(a, b, z) = z^(1-b) U(1+a-b, 2-b, z)
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = rng.uniform(0.1, 5)
        b = rng.uniform(-1, a + 0.9)
        z = rng.uniform(0.1, 10)
        lhs = kummer_u(a, b, z)
        rhs = z ** (1 - b) * kummer_u(1 + a - b, 2 - b, z)
        assert abs(lhs - rhs) <= 1e-8 * abs(lhs)


def test_kummer_u_domain():
    with pytest.raises(DomainError):
        kummer_u(-1.0, 0.5, 1.0)
    with pytest.raises(DomainError):
        kummer_u(1.0, 0.5, 0.0)


def test_stirling_rows():
    row = stirling_first_unsigned(4)
    assert list(row.coefficients) == [6, 11, 6, 1]
    assert row[0] == 0 and row[2] == 11
    for k in range(1, 21):
        assert sum(stirling_first_unsigned(k).coefficients) == math.factorial(k)
    with pytest.raises(OverflowError):
        stirling_first_unsigned(21)
    with pytest.raises(ValueError):
        stirling_first_unsigned(0)
