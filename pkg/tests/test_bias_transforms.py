import json
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from polya_immigration.bias_transforms import (
    PsiSpec,
    fixed_point_residual,
    power_bias_sample,
    rising_factorial_bias_sample,
    ul_fixed_point_residual,
    ul_power_bias_sample,
)
from polya_immigration.errors import DegenerateWeights, NormalizationError
from polya_immigration.samples import SampleBatch
from polya_immigration.stat_harness import ks_critical, ks_vs_cdf
from polya_immigration.streams import numpy_rng
from polya_immigration.ul_family import ULSpec, suite_specs


def exp_batch(size, seed):
    return SampleBatch(numpy_rng(seed, 0xF0, 0).exponential(size=size), seed, "exp")


def test_psi_spec_validation():
    with pytest.raises(NormalizationError):
        PsiSpec(((1, 0.5), (2, 0.4)))
    with pytest.raises(ValueError):
        PsiSpec(((0, 1.0),))
    assert PsiSpec.from_mapping({2: 0.25, 1: 0.75}).support == [1, 2]


def test_size_bias_of_exponential_is_gamma2():
    out = power_bias_sample(exp_batch(100_000, 1), 1, seed=2)
    assert ks_vs_cdf(out, stats.gamma(2).cdf).statistic < 0.01


def test_constant_batch_is_unchanged():
    batch = SampleBatch(np.full(500, 2.5), 0)
    np.testing.assert_array_equal(power_bias_sample(batch, 1, seed=1).values, 2.5)
    ints = SampleBatch(np.full(500, 3.0), 0)
    np.testing.assert_array_equal(rising_factorial_bias_sample(ints, 2, seed=1).values, 3.0)


def _ratio_se(x, k):
    # delta-method SE of mean(x^(k+1)) / mean(x^k)
    top, bot = x ** (k + 1), x**k
    cov = np.cov(top, bot) / x.size
    grad = np.array([1 / bot.mean(), -top.mean() / bot.mean() ** 2])
    return math.sqrt(grad @ cov @ grad)


def test_mixture_power_bias_mean():
    batch = exp_batch(100_000, 3)
    out = power_bias_sample(batch, {1: 0.5, 2: 0.5}, seed=4).values
    resample_se = out.std(ddof=1) / math.sqrt(out.size)
    batch_se = 0.5 * math.hypot(_ratio_se(batch.values, 1), _ratio_se(batch.values, 2))
    assert abs(out.mean() - 2.5) < 4 * math.hypot(resample_se, batch_se)


@pytest.mark.parametrize("power", [0, 1, 2])
def test_biasing_identity_for_test_functions(power):
    batch = exp_batch(100_000, 5)
    psi = {1: 0.3, 2: 0.7}
    out = power_bias_sample(batch, psi, seed=6).values
    x = batch.values
    target = sum(p * np.mean(x**k * x**power) / np.mean(x**k) for k, p in psi.items())
    se = (out**power).std(ddof=1) / math.sqrt(out.size)
    assert abs(np.mean(out**power) - target) <= 4 * se + 1e-12


def test_rising_factorial_bias_delta1_equals_power_bias():
    ints = SampleBatch(numpy_rng(7, 0xF1, 0).integers(1, 20, size=5000).astype(float), 7)
    size = 100_000
    a = rising_factorial_bias_sample(ints, 1, seed=3, n_out=size).values
    b = power_bias_sample(ints, 1, seed=3, n_out=size).values
    for x in range(1, 20):
        fa, fb = (a == x).mean(), (b == x).mean()
        p = 0.5 * (fa + fb)
        assert abs(fa - fb) < 4 * math.sqrt(2 * p * (1 - p) / size) + 1e-12


def test_rising_factorial_bias_on_urn_pmf():
    # pmf {3/8, 3/8, 1/4} on {1, 2, 3} biased by x gives {1/5, 2/5, 2/5}
    values = np.repeat([1.0, 2.0, 3.0], [3000, 3000, 2000])
    out = rising_factorial_bias_sample(values, 1, seed=9, n_out=200_000).values
    target = [Fraction(1, 5), Fraction(2, 5), Fraction(2, 5)]
    for x, p in zip((1, 2, 3), target):
        freq = (out == x).mean()
        assert abs(freq - float(p)) < 4 * math.sqrt(float(p * (1 - p)) / out.size)


def test_rising_factorial_requires_integers():
    with pytest.raises(ValueError):
        rising_factorial_bias_sample([1.5, 2.0], 1, seed=0)


def test_degenerate_weights():
    values = np.concatenate([np.full(99, 1.0), [1e6]])
    with pytest.raises(DegenerateWeights):
        power_bias_sample(SampleBatch(values, 0), 1, seed=0)


def test_fixed_point_exponential():
    rep = fixed_point_residual(exp_batch(100_000, 11), 1, 1, seed=12)
    assert rep.ks < 0.012


def test_fixed_point_gamma_rate_two():
    batch = ULSpec(2, (1,)).sample(100_000, seed=13)
    rep = fixed_point_residual(batch, 2, 1, seed=14)
    assert rep.ks < 0.012


def test_uniform_is_not_a_fixed_point():
    batch = SampleBatch(numpy_rng(15, 0xF2, 0).random(100_000), 15)
    rep = fixed_point_residual(batch, 1, 1, seed=16)
    assert rep.ks >= 0.05


def test_report_json_layout():
    rep = fixed_point_residual(exp_batch(2000, 1), 1, 1, seed=1)
    data = json.loads(rep.to_json())
    assert set(data) == {"ks", "p_value", "n1", "n2", "moment_table"}
    assert set(data["moment_table"][0]) == {"k", "lhs", "rhs", "se"}


def test_scaling_neutrality():
    batch = exp_batch(20_000, 17)
    a = fixed_point_residual(batch, 1, 1, seed=18)
    b = fixed_point_residual(batch.scaled(7.0), 1, 1, seed=18)
    assert a.ks == pytest.approx(b.ks, abs=1e-12)


def test_exact_psi_bias_sampler_geometric():
    # psi_k = 2/((k+1)(k+2)) and Z^(k) ~ Beta(k+1, 2), so E Z^(psi) = sum 2/((k+2)(k+3)) = 2/3
    z = ul_power_bias_sample(suite_specs()["geometric"], 50_000, seed=19).values
    assert abs(z.mean() - 2 / 3) < 4 * z.std() / math.sqrt(z.size)


@pytest.mark.parametrize("name", list(suite_specs()))
def test_ul_fixed_point_below_critical(name):
    rep = ul_fixed_point_residual(suite_specs()[name], 20_000, seed=20)
    assert rep.ks < ks_critical(rep.n1, rep.n2, 0.01)
