"""Sample moments and Kolmogorov-Smirnov statistics used by the experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import EmptyBatch


def _values(batch) -> np.ndarray:
    values = np.asarray(getattr(batch, "values", batch), dtype=float).ravel()
    if values.size == 0:
        raise EmptyBatch("empty sample")
    return values


@dataclass(frozen=True)
class MomentRow:
    k: int
    mean: float
    se: float


def empirical_moments(batch, k_max: int) -> list[MomentRow]:
    """Sample means of ``x^k`` for ``k = 1..k_max`` with CLT standard errors."""
    x = _values(batch)
    rows = []
    for k in range(1, k_max + 1):
        xk = x**k
        se = xk.std(ddof=1) / math.sqrt(x.size) if x.size > 1 else 0.0
        rows.append(MomentRow(k, float(xk.mean()), float(se)))
    return rows


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float
    n1: int
    n2: int | None = None

    def below(self, level: float = 0.01) -> bool:
        """Whether the statistic is under the asymptotic critical value."""
        return self.statistic < ks_critical(self.n1, self.n2, level)


def ks_critical(n1: int, n2: int | None = None, level: float = 0.01) -> float:
    """Asymptotic critical value of the one- or two-sample KS statistic."""
    n_eff = n1 if n2 is None else n1 * n2 / (n1 + n2)
    return float(special.kolmogi(level)) / math.sqrt(n_eff)


def ks_two_sample(batch_a, batch_b) -> KSResult:
    """Sup distance between two empirical CDFs with asymptotic p-value."""
    a = np.sort(_values(batch_a))
    b = np.sort(_values(batch_b))
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    n_eff = a.size * b.size / (a.size + b.size)
    return KSResult(d, float(special.kolmogorov(math.sqrt(n_eff) * d)), a.size, b.size)


def ks_vs_cdf(batch, cdf) -> KSResult:
    """One-sample KS statistic against a CDF callable (vectorised)."""
    x = np.sort(_values(batch))
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(n) / n
    d = float(max(upper.max(), lower.max(), 0.0))
    return KSResult(d, float(special.kolmogorov(math.sqrt(n) * d)), n)
