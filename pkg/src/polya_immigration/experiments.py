"""End-to-end comparisons of simulated urns with their predicted limits.

Limit moments are estimated from conditional moment paths, turned into UL
coefficients and sampled; the result is compared with scaled urn samples
by a KS statistic.  Moment paths use streams offset by ``MOMENT_STREAMS`` so
they never share arrivals with the urn paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conditional_moments import MomentEstimates, estimate_limit_moments
from .interarrival import Deterministic, InterArrivalSpec
from .reference_laws import deterministic_limit
from .stat_harness import KSResult, ks_two_sample, ks_vs_cdf
from .streams import numpy_rng
from .ul_family import ULSpec, ul_from_urn_limit, urn_limit_atoms
from .urn_engine import UrnConfig, simulate_batch

MOMENT_STREAMS = 1 << 32


@dataclass(frozen=True)
class LimitComparison:
    ks: KSResult
    threshold: float
    moments: MomentEstimates
    spec: ULSpec
    n: int
    paths: int
    urn_values: np.ndarray
    limit_values: np.ndarray

    @property
    def passed(self) -> bool:
        return self.ks.statistic < self.threshold

    def summary(self) -> dict:
        return {
            "ks": self.ks.statistic,
            "p_value": self.ks.p_value,
            "threshold": self.threshold,
            "passed": self.passed,
            "n": self.n,
            "paths": self.paths,
            "v": self.spec.v,
            "moments": {e.k: {"m_k": e.m_k, "se": e.std_error} for e in self.moments},
        }


def deterministic_end_to_end(w: int, k: int, n: int, paths: int, moment_paths: int, seed, threshold: float = 0.02) -> LimitComparison:
    """Scaled ``urnlaw(n, delta_k, 1, w)`` against the root-gamma law.

    ``m_{k+1}`` is estimated from conditional moments (it is not assumed).
    """
    pi = Deterministic(k)
    est = estimate_limit_moments(k + 1, 1, w, pi, n, moment_paths, seed, first_stream=MOMENT_STREAMS)
    law = deterministic_limit(w, k, est.m(k + 1))
    urn = simulate_batch(UrnConfig(1, w, pi, n), paths, seed).scaled()
    return LimitComparison(ks_vs_cdf(urn, law.cdf), threshold, est, law.spec, n, paths, urn, np.empty(0))


def limit_sample(b: int, w: int, spec: ULSpec, size: int, seed, stream: int = 0) -> np.ndarray:
    """Draws of ``B Z`` with ``B ~ Beta(w, b-1)`` (``B = 1`` when ``b = 1``)."""
    z = spec.sample(size, seed, stream).values
    if b == 1:
        return z
    rng = numpy_rng(seed, 0xE2, stream)
    return rng.beta(w, b - 1, size) * z


def mixed_limit_end_to_end(b: int, w: int, pi: InterArrivalSpec, n: int, paths: int, moment_paths: int, seed,
                        threshold: float = 0.03, moment_n: int | None = None, tail: float = 1e-6) -> LimitComparison:
    """Scaled ``urnlaw(n, pi, b, w)`` against ``B Z`` built from estimated moments.

    ``Z ~ UL(b+w-1; a_k = pi_{k-1} / m_k(1, b+w-1, pi))`` with the ``m_k``
    estimated at horizon ``moment_n`` (default ``n``).
    """
    v = b + w - 1
    k_max = max(urn_limit_atoms(pi, tail)) + 1
    est = estimate_limit_moments(k_max, 1, v, pi, moment_n or n, moment_paths, seed, first_stream=MOMENT_STREAMS)
    spec = ul_from_urn_limit(b, w, pi, est, tail)
    urn = simulate_batch(UrnConfig(b, w, pi, n), paths, seed).scaled()
    limit = limit_sample(b, w, spec, paths, seed)
    return LimitComparison(ks_two_sample(urn, limit), threshold, est, spec, n, paths, urn, limit)
