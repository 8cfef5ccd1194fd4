"""Rising-factorial moments of the white count given the immigration times.

With ``D_{k,n} = X_n (X_n + 1) ... (X_n + k - 1)`` and ``N_j`` the number of
arrivals up to time ``j``,

    E(D_{k,n} | T) = G(w+k)/G(w) * prod_{j=0}^{n-1} (b+w+k+j+N_j) / (b+w+j+N_j).

The product telescopes between arrivals, which gives an equivalent form with
one gamma ratio and a product over the ``N_{n-1}`` arrivals only.  Averaging
the conditional moments over sampled arrival sequences and scaling by
``n^(k mu/(mu+1))`` estimates the limit moments ``m_k(b, w, pi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit, prange

from .errors import InternalInconsistency
from .interarrival import ArrivalSequence, InterArrivalSpec, draw_tau, scaling_exponent
from .special_functions import stirling_first_unsigned
from .streams import ARRIVALS, as_seed, numpy_rng, seed_state

AGREEMENT_RTOL = 1e-10


def _levels(n, b, w, arrivals: ArrivalSequence):
    counts = arrivals.counts
    if len(counts) < n:
        raise ValueError("arrival sequence does not cover the horizon")
    return [b + w + j + int(counts[j]) for j in range(n)]


def _skipped(n, b, w, arrivals: ArrivalSequence):
    # ball totals jumped over by immigration: b+w+T_i+i-1 for T_i <= n-1
    return [b + w + int(t) + i for i, t in enumerate(arrivals.times) if t <= n - 1]


def _as_arrivals(arrivals, n):
    return arrivals if isinstance(arrivals, ArrivalSequence) else ArrivalSequence.from_taus(arrivals, n)


def log_moment_step_form(k: int, n: int, b: int, w: int, arrivals) -> float:
    """``log E(D_{k,n} | T)`` as a product over every step."""
    levels = _levels(n, b, w, _as_arrivals(arrivals, n))
    return math.lgamma(w + k) - math.lgamma(w) + math.fsum(math.log1p(k / s) for s in levels)


def log_moment_gamma_form(k: int, n: int, b: int, w: int, arrivals) -> float:
    """``log E(D_{k,n} | T)`` as one gamma ratio and a product over the arrivals."""
    skipped = _skipped(n, b, w, _as_arrivals(arrivals, n))
    top = b + w + n + len(skipped)
    return (
        math.lgamma(w + k)
        - math.lgamma(w)
        + math.lgamma(top + k)
        - math.lgamma(top)
        - math.lgamma(b + w + k)
        + math.lgamma(b + w)
        - math.fsum(math.log1p(k / y) for y in skipped)
    )


def rising_factorial_moment_given_T(k: int, n: int, b: int, w: int, arrivals, exact: bool = False):
    """``E(D_{k,n} | T)`` from the step product, cross-checked by the gamma-ratio form.

    ``arrivals`` is an :class:`ArrivalSequence` (or a list of gaps) covering
    times ``0..n-1``.  With ``exact=True`` both forms are evaluated as
    fractions and must be equal; otherwise they are evaluated in log space and
    must agree to relative ``1e-10``.
    """
    if k < 1 or n < 1:
        raise ValueError("need k >= 1 and n >= 1")
    arrivals = _as_arrivals(arrivals, n)
    if exact:
        levels = _levels(n, b, w, arrivals)
        skipped = _skipped(n, b, w, arrivals)
        top = b + w + n + len(skipped)
        lead = Fraction(math.prod(range(w, w + k)))
        step_form = lead * math.prod(Fraction(s + k, s) for s in levels)
        # prod_{x=b+w}^{top-1} (x+k)/x over the full integer range
        full = Fraction(math.prod(range(top, top + k)), math.prod(range(b + w, b + w + k)))
        gamma_form = lead * full * math.prod(Fraction(y, y + k) for y in skipped)
        if step_form != gamma_form:
            raise InternalInconsistency(f"product forms disagree: {step_form} vs {gamma_form}")
        return step_form
    log_step = log_moment_step_form(k, n, b, w, arrivals)
    log_gamma = log_moment_gamma_form(k, n, b, w, arrivals)
    if abs(math.expm1(log_gamma - log_step)) > AGREEMENT_RTOL:
        raise InternalInconsistency(
            f"product forms disagree: exp({log_step!r}) vs exp({log_gamma!r})"
        )
    return math.exp(log_step)


def classical_rising_moment(k: int, n: int, b: int, w: int) -> float:
    """``E D_{k,n}`` for the urn without immigration."""
    return math.exp(
        math.lgamma(w + k)
        - math.lgamma(w)
        + math.lgamma(b + w)
        + math.lgamma(b + w + n + k)
        - math.lgamma(b + w + k)
        - math.lgamma(b + w + n)
    )


RAW_MAX = 20


def factorial_to_raw(factorial_moments, unit: float = 1.0) -> np.ndarray:
    """Raw moments from rising-factorial moments.

    ``factorial_moments[k-1]`` is ``E D_k / unit^k``; the result holds
    ``E X^k / unit^k``.  Uses ``x^(rising k) = sum_i [k i] x^i``.  The last
    axis indexes the order, so a matrix of per-path moments converts row-wise.
    """
    d = np.asarray(factorial_moments, dtype=float)
    raw = np.empty_like(d)
    for k in range(1, d.shape[-1] + 1):
        row = stirling_first_unsigned(k)
        acc = d[..., k - 1].copy()
        for i in range(1, k):
            acc -= row[i] * raw[..., i - 1] * unit ** (i - k)
        raw[..., k - 1] = acc
    return raw


@dataclass(frozen=True)
class MomentEstimate:
    k: int
    m_k: float
    std_error: float
    paths: int
    n: int
    kind: str = "factorial"


class MomentEstimates(list):
    """Factorial-moment estimates in order ``k = 1..k_max``; ``raw`` holds the raw ones."""

    def __init__(self, factorial, raw, samples=None):
        super().__init__(factorial)
        self.raw = list(raw)
        self.samples = samples

    def m(self, k: int) -> float:
        return self[k - 1].m_k


_BLOCK = 16


@njit(cache=True)
def _log_moments_path(k_max, b, w, n, kind, ivals, fvals, seed, stream, out):
    # out[k-1] = sum_{j<n} log((s_j + k) / s_j) with s_j = b+w+j+N_j
    state = np.empty(4, np.uint64)
    seed_state(state, seed, stream, ARRIVALS)
    num = np.ones(k_max)
    for k in range(k_max):
        out[k] = 0.0
    den = 1.0
    arrived = np.int64(0)
    t_next = draw_tau(kind, ivals, fvals, state, n + 1)
    filled = 0
    for j in range(n):
        while t_next == j:
            arrived += 1
            t_next = j + draw_tau(kind, ivals, fvals, state, n + 1 - j)
        s = float(b + w + j + arrived)
        den *= s
        for k in range(k_max):
            num[k] *= s + (k + 1)
        filled += 1
        if filled == _BLOCK:
            ld = math.log(den)
            for k in range(k_max):
                out[k] += math.log(num[k]) - ld
                num[k] = 1.0
            den = 1.0
            filled = 0
    ld = math.log(den)
    for k in range(k_max):
        out[k] += math.log(num[k]) - ld


@njit(cache=True, parallel=True)
def _log_moments_batch(k_max, b, w, n, kind, ivals, fvals, seed, first, paths):
    out = np.empty((paths, k_max))
    for i in prange(paths):
        _log_moments_path(k_max, b, w, n, kind, ivals, fvals, seed, first + i, out[i])
    return out


def conditional_moment_paths(k_max: int, b: int, w: int, pi: InterArrivalSpec, n: int, paths: int, seed, first_stream: int = 0) -> np.ndarray:
    """Matrix of ``E(D_{k,n} | T) / n^(k mu/(mu+1))``, one row per arrival path.

    Path ``i`` uses the same arrival stream as urn path ``first_stream + i``.
    """
    kind, ivals, fvals = pi.encode()
    logs = _log_moments_batch(
        int(k_max), int(b), int(w), int(n), kind, ivals, fvals, as_seed(seed), int(first_stream), int(paths)
    )
    ks = np.arange(1, k_max + 1)
    lead = np.array([math.lgamma(w + k) - math.lgamma(w) for k in ks])
    expo = scaling_exponent(pi.mean())
    return np.exp(logs + lead - ks * expo * math.log(n))


def _standard_errors(values: np.ndarray, bootstrap: bool, seed) -> np.ndarray:
    m = values.shape[0]
    if m < 2:
        return np.zeros(values.shape[1])
    constant = np.all(values == values[0], axis=0)
    if bootstrap:
        rng = numpy_rng(seed, 0xB007)
        means = np.array([values[rng.integers(0, m, m)].mean(axis=0) for _ in range(200)])
        se = means.std(axis=0, ddof=1)
    else:
        se = values.std(axis=0, ddof=1) / math.sqrt(m)
    return np.where(constant, 0.0, se)


def estimate_limit_moments(
    k_max: int,
    b: int,
    w: int,
    pi: InterArrivalSpec,
    n: int,
    paths: int,
    seed,
    bootstrap: bool = False,
    first_stream: int = 0,
    keep_samples: bool = False,
) -> MomentEstimates:
    """Monte Carlo estimates of ``m_1, ..., m_{k_max}`` at horizon ``n``.

    The scaling uses the exact mean of ``pi``.  Standard errors are the
    path-level CLT ones unless ``bootstrap`` is set (200 resamples).  Raw
    scaled moments follow path by path from the factorial ones, up to order
    ``RAW_MAX``.
    """
    if paths < 1:
        raise ValueError("need at least one path")
    fact = conditional_moment_paths(k_max, b, w, pi, n, paths, seed, first_stream)
    unit = float(n) ** scaling_exponent(pi.mean())
    # exact integer Stirling rows stop at RAW_MAX
    raw = factorial_to_raw(fact[:, :RAW_MAX], unit)
    out = []
    for label, values in (("factorial", fact), ("raw", raw)):
        se = _standard_errors(values, bootstrap, seed)
        means = values.mean(axis=0)
        if np.all(values == values[0], axis=0).all():
            means = values[0].copy()
        out.append(
            [
                MomentEstimate(k, float(means[k - 1]), float(se[k - 1]), int(paths), int(n), label)
                for k in range(1, values.shape[1] + 1)
            ]
        )
    return MomentEstimates(out[0], out[1], fact if keep_samples else None)


def write_estimates_csv(path, estimates: MomentEstimates) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["k", "n", "M", "m_k_factorial", "m_k_raw", "std_error"])
        raw = {r.k: format(r.m_k, ".17g") for r in estimates.raw}
        for f in estimates:
            out.writerow([f.k, f.n, f.paths, format(f.m_k, ".17g"), raw.get(f.k, ""), format(f.std_error, ".17g")])
