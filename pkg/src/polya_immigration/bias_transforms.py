"""Power-bias and rising-factorial-bias transforms and the fixed-point residual.

For a law ``psi`` on the positive integers, the ``psi``-power-bias of ``X``
satisfies ``E f(X^(psi)) = sum_k psi_k E[X^k f(X)] / E X^k``: draw ``K ~ psi``
and then a draw from the ``K``-th power-biased law.  The UL laws are fixed
points of ``X -> V_w X^(psi)`` with ``V_w ~ Beta(w, 1)`` independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DegenerateWeights, NormalizationError
from .samples import SampleBatch
from .stat_harness import KSResult, ks_two_sample
from .streams import numpy_rng
from .ul_family import Geometric, PsiDistribution, ULSpec, power_bias_ul, psi_from_ul

__all__ = [
    "SampleBatch",
    "PsiSpec",
    "power_bias_sample",
    "rising_factorial_bias_sample",
    "fixed_point_residual",
    "ul_power_bias_sample",
    "ul_fixed_point_residual",
    "FixedPointReport",
]

MAX_WEIGHT_SHARE = 0.5


@dataclass(frozen=True)
class PsiSpec:
    """A law on finitely many positive integers."""

    probs: tuple[tuple[int, float], ...]

    def __post_init__(self):
        items = sorted((int(k), float(p)) for k, p in dict(self.probs).items() if p > 0)
        if not items or any(k < 1 for k, _ in items):
            raise ValueError("psi lives on the positive integers")
        total = math.fsum(p for _, p in items)
        if abs(total - 1.0) > 1e-12:
            raise NormalizationError(f"psi sums to {total!r}")
        object.__setattr__(self, "probs", tuple(items))

    @classmethod
    def delta(cls, k: int) -> "PsiSpec":
        return cls(((k, 1.0),))

    @classmethod
    def from_mapping(cls, mapping) -> "PsiSpec":
        return cls(tuple(dict(mapping).items()))

    @classmethod
    def from_distribution(cls, psi: PsiDistribution) -> "PsiSpec":
        if psi.tail > 0:
            raise ValueError("psi has unbounded support")
        probs = np.asarray(psi.probs)
        # renormalise away quadrature rounding (already checked to 1e-8)
        probs = probs / math.fsum(probs)
        return cls(tuple((k + 1, float(p)) for k, p in enumerate(probs) if p > 0))

    @property
    def support(self) -> list[int]:
        return [k for k, _ in self.probs]

    @property
    def weights(self) -> np.ndarray:
        return np.array([p for _, p in self.probs])


def _as_psi(psi) -> PsiSpec:
    if isinstance(psi, PsiSpec):
        return psi
    if isinstance(psi, PsiDistribution):
        return PsiSpec.from_distribution(psi)
    if isinstance(psi, int):
        return PsiSpec.delta(psi)
    return PsiSpec.from_mapping(psi)


def _biased_resample(values: np.ndarray, log_weight, psi: PsiSpec, rng, n_out: int) -> np.ndarray:
    counts = rng.multinomial(n_out, psi.weights)
    out = np.empty(n_out)
    pos = 0
    for (k, _), m in zip(psi.probs, counts):
        lw = log_weight(values, k)
        w = np.exp(lw - lw.max())
        cum = np.cumsum(w)
        share = w.max() / cum[-1]
        if share > MAX_WEIGHT_SHARE:
            raise DegenerateWeights(f"one sample carries {share:.0%} of the order-{k} weight")
        if m == 0:
            continue
        idx = np.searchsorted(cum, rng.random(m) * cum[-1], side="right")
        out[pos : pos + m] = values[np.minimum(idx, values.size - 1)]
        pos += m
    # multinomial blocks are ordered by K; shuffle so the output is exchangeable
    rng.shuffle(out)
    return out


def power_bias_sample(batch: SampleBatch, psi, seed, n_out: int | None = None, stream: int = 0) -> SampleBatch:
    """Empirical ``psi``-power-bias: ``K ~ psi`` then resampling with weights ``x^K``."""
    psi = _as_psi(psi)
    values = batch.values
    rng = numpy_rng(seed, 0xB1, stream)
    n_out = values.size if n_out is None else n_out
    logs = np.log(values)
    out = _biased_resample(values, lambda x, k: k * logs, psi, rng, n_out)
    return SampleBatch(out, int(seed), f"power-bias({batch.label})")


def rising_factorial_bias_sample(batch, psi, seed, n_out: int | None = None, stream: int = 0) -> SampleBatch:
    """Empirical ``psi``-rising-factorial-bias with weights ``x (x+1) ... (x+K-1)``."""
    psi = _as_psi(psi)
    values = np.asarray(getattr(batch, "values", batch), dtype=float)
    if np.any(values < 1) or np.any(values != np.round(values)):
        raise ValueError("rising-factorial bias needs positive integers")
    rng = numpy_rng(seed, 0xB2, stream)
    n_out = values.size if n_out is None else n_out
    out = _biased_resample(values, lambda x, k: special.gammaln(x + k) - special.gammaln(x), psi, rng, n_out)
    return SampleBatch(out, int(seed), "rising-factorial-bias")


def beta_w1(w: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """``Beta(w, 1)`` draws as ``U^(1/w)``."""
    return rng.random(size) ** (1.0 / w)


@dataclass(frozen=True)
class FixedPointReport:
    ks: float
    p_value: float
    n1: int
    n2: int
    moment_table: list = field(default_factory=list)

    @property
    def result(self) -> KSResult:
        return KSResult(self.ks, self.p_value, self.n1, self.n2)

    def to_json(self) -> str:
        return json.dumps(
            {
                "ks": self.ks,
                "p_value": self.p_value,
                "n1": self.n1,
                "n2": self.n2,
                "moment_table": self.moment_table,
            },
            indent=2,
        )


def _moment_table(x: np.ndarray, y: np.ndarray, k_max: int = 4) -> list[dict]:
    rows = []
    for k in range(1, k_max + 1):
        xk, yk = x**k, y**k
        se = math.sqrt(xk.var(ddof=1) / xk.size + yk.var(ddof=1) / yk.size)
        rows.append({"k": k, "lhs": float(xk.mean()), "rhs": float(yk.mean()), "se": float(se)})
    return rows


def _jitter(values: np.ndarray, rng) -> np.ndarray:
    # break ties of integer-valued batches below any meaningful scale
    if np.all(values == np.round(values)):
        return values + rng.uniform(-1e-9, 1e-9, values.size)
    return values


def fixed_point_residual(batch: SampleBatch, w: float, psi, seed, source: SampleBatch | None = None, stream: int = 0) -> FixedPointReport:
    """Two-sample comparison of ``X`` with ``V_w X^(psi)``.

    ``X^(psi)`` is the empirical power-bias of ``source`` (default: the batch
    itself) and ``V_w = U^(1/w)``.  Returns the KS distance, its asymptotic
    p-value and a table of the first four moments on both sides.
    """
    source = batch if source is None else source
    biased = power_bias_sample(source, psi, seed, len(batch), stream)
    rng = numpy_rng(seed, 0xB3, stream)
    transformed = beta_w1(w, len(batch), rng) * biased.values
    x = _jitter(batch.values, rng)
    ks = ks_two_sample(x, transformed)
    return FixedPointReport(ks.statistic, ks.p_value, len(batch), transformed.size, _moment_table(batch.values, transformed))


def ul_power_bias_sample(spec: ULSpec, size: int, seed, stream: int = 0, psi: PsiDistribution | None = None) -> SampleBatch:
    """Exact draws of ``Z^(psi)`` for a UL law.

    ``K ~ psi`` and then ``Z^(K)`` from its own density, proportional to
    ``x^K u(x)``, which is ``UL(v+K; (v/(v+K)) a)``.  For geometric
    coefficients ``Z^(K) / alpha ~ Beta(v+K, v beta + 1)`` and ``K`` is the
    mixed geometric law of ``psi``.
    """
    psi = psi_from_ul(spec) if psi is None else psi
    rng = numpy_rng(seed, 0xB4, stream)
    ks = psi.sample(size, rng)
    co = spec.coefficients
    if isinstance(co, Geometric):
        out = co.alpha * rng.beta(spec.v + ks, spec.v * co.beta + 1.0)
    else:
        out = np.empty(size)
        u = rng.random(size)
        for k in np.unique(ks):
            mask = ks == k
            out[mask] = power_bias_ul(spec, int(k)).quantile(u[mask])
    out = np.maximum(out, np.finfo(float).tiny)
    return SampleBatch(out, int(seed), f"psi-bias({spec!r})")


def ul_fixed_point_residual(spec: ULSpec, size: int, seed, stream: int = 0) -> FixedPointReport:
    """Compare ``Z`` with ``V_v Z^(psi)`` built from independent exact draws."""
    z = spec.sample(size, seed, 2 * stream)
    biased = ul_power_bias_sample(spec, size, seed, 2 * stream + 1)
    rng = numpy_rng(seed, 0xB5, stream)
    transformed = beta_w1(spec.v, size, rng) * biased.values
    ks = ks_two_sample(z.values, transformed)
    return FixedPointReport(ks.statistic, ks.p_value, size, size, _moment_table(z.values, transformed))
