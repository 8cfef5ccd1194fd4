"""Inter-arrival laws for black-ball immigration and their arrival sequences.

The gaps ``tau_1, tau_2, ...`` between immigration times are i.i.d. on the
non-negative integers.  Four families are supported: a point mass, a finite
table, a shifted geometric law and the heavy-tailed power law

    pi_j = beta * G(w(beta+1)+1) G(w+j+1) / (G(w) G(w(beta+1)+j+2)),

whose survival function telescopes to
``P(tau >= j) = G(c+1) G(w+1+j) / (G(w+1) G(c+1+j))`` with ``c = w(beta+1)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit

from .errors import DegenerateError, NormalizationError
from .special_functions import lgamma_ratio, log_gamma_ratio
from .streams import ARRIVALS, as_seed, next_open_double, seed_state

KIND_DETERMINISTIC = 0
KIND_FINITE = 1
KIND_GEOMETRIC = 2
KIND_POWERLAW = 3

# returned when a gap would exceed any representable horizon
_NO_CAP = np.int64(1 << 62)


class Mean(enum.Enum):
    INFINITE = "infinite"


INFINITE = Mean.INFINITE


def scaling_exponent(mu) -> float:
    """``mu / (mu + 1)``, read as 1 when the mean is infinite."""
    if mu is INFINITE:
        return 1.0
    mu = float(mu)
    return mu / (mu + 1.0)


class InterArrivalSpec:
    """Common interface of the inter-arrival families."""

    kind: int

    def pmf(self, j):
        raise NotImplementedError

    def mean(self):
        raise NotImplementedError

    @property
    def pi0(self) -> float:
        return float(self.pmf(0))

    def support(self) -> list[int]:
        """Atoms with positive mass, for finitely supported laws."""
        raise ValueError(f"{type(self).__name__} does not have finite support")

    def encode(self) -> tuple[int, np.ndarray, np.ndarray]:
        """Flat representation consumed by the compiled samplers."""
        raise NotImplementedError

    def to_descriptor(self) -> dict:
        raise NotImplementedError

    def _check_pi0(self):
        if self.pi0 >= 1.0:
            raise DegenerateError("inter-arrival law must have pi_0 < 1")


@dataclass(frozen=True)
class Deterministic(InterArrivalSpec):
    k: int
    kind = KIND_DETERMINISTIC

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValueError(f"deterministic gap must be a non-negative integer, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        self._check_pi0()

    def pmf(self, j):
        j = np.asarray(j)
        return np.where(j == self.k, 1.0, 0.0)[()]

    def mean(self):
        return float(self.k)

    def support(self):
        return [self.k]

    def encode(self):
        return KIND_DETERMINISTIC, np.array([self.k], np.int64), np.zeros(1)

    def to_descriptor(self):
        return {"kind": "deterministic", "k": self.k}


@dataclass(frozen=True)
class FiniteSupport(InterArrivalSpec):
    probs: tuple[tuple[int, float], ...]
    kind = KIND_FINITE

    def __post_init__(self):
        merged: dict[int, float] = {}
        for value, p in self.probs:
            if int(value) != value or value < 0:
                raise ValueError(f"atoms must be non-negative integers, got {value}")
            if p < 0 or not math.isfinite(p):
                raise NormalizationError(f"negative or non-finite probability {p}")
            merged[int(value)] = merged.get(int(value), 0.0) + float(p)
        total = math.fsum(merged.values())
        if abs(total - 1.0) > 1e-12:
            raise NormalizationError(f"probabilities sum to {total!r}, not 1")
        table = tuple(sorted((v, p) for v, p in merged.items() if p > 0))
        object.__setattr__(self, "probs", table)
        self._check_pi0()

    def pmf(self, j):
        table = dict(self.probs)
        j = np.asarray(j)
        out = np.vectorize(lambda x: table.get(int(x), 0.0), otypes=[float])(j)
        return out[()]

    def mean(self):
        return math.fsum(v * p for v, p in self.probs)

    def support(self):
        return [v for v, _ in self.probs]

    def encode(self):
        values = np.array([v for v, _ in self.probs], np.int64)
        cdf = np.cumsum([p for _, p in self.probs])
        cdf[-1] = 1.0
        return KIND_FINITE, values, cdf

    def to_descriptor(self):
        return {"kind": "finite", "probs": [[v, p] for v, p in self.probs]}


@dataclass(frozen=True)
class GeometricShifted(InterArrivalSpec):
    """``P(tau = start + m) = p (1-p)^m`` for ``m >= 0``."""

    p: float
    support_start: int = 1
    kind = KIND_GEOMETRIC

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"geometric success probability must lie in (0, 1], got {self.p}")
        if self.support_start not in (0, 1):
            raise ValueError("support_start must be 0 or 1")
        self._check_pi0()

    def pmf(self, j):
        j = np.asarray(j)
        m = j - self.support_start
        with np.errstate(invalid="ignore"):
            out = np.where(m >= 0, self.p * (1.0 - self.p) ** np.maximum(m, 0), 0.0)
        return out[()]

    def mean(self):
        return self.support_start + (1.0 - self.p) / self.p

    def encode(self):
        logq = math.log1p(-self.p) if self.p < 1.0 else -math.inf
        return KIND_GEOMETRIC, np.array([self.support_start], np.int64), np.array([self.p, logq])

    def to_descriptor(self):
        return {"kind": "geometric", "p": self.p, "support_start": self.support_start}


@dataclass(frozen=True)
class PowerLaw(InterArrivalSpec):
    alpha: float
    beta: float
    w: int
    kind = KIND_POWERLAW

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if int(self.w) != self.w or self.w < 1:
            raise ValueError(f"w must be a positive integer, got {self.w}")
        object.__setattr__(self, "w", int(self.w))
        self._check_pi0()

    @property
    def c(self) -> float:
        return self.w * (self.beta + 1.0)

    def log_pmf(self, j):
        j = np.asarray(j, dtype=float)
        w, c = self.w, self.c
        return (
            math.log(self.beta)
            + math.lgamma(c + 1.0)
            - math.lgamma(w)
            + log_gamma_ratio(j, w + 1.0, c + 2.0)
        )

    def pmf(self, j):
        j = np.asarray(j)
        out = np.where(j >= 0, np.exp(self.log_pmf(np.maximum(j, 0))), 0.0)
        return out[()]

    def log_survival(self, j):
        """``log P(tau >= j)``."""
        j = np.asarray(j, dtype=float)
        w, c = self.w, self.c
        return math.lgamma(c + 1.0) - math.lgamma(w + 1.0) + log_gamma_ratio(j, w + 1.0, c + 1.0)

    def survival(self, j):
        return np.exp(self.log_survival(j))[()]

    def mean(self):
        wb = self.w * self.beta
        if wb > 1.0:
            return (self.w + 1.0) / (wb - 1.0)
        return INFINITE

    def normalization_check(self, terms: int = 1000) -> float:
        """Partial sum of the pmf plus the analytic tail; equals 1."""
        head = math.fsum(np.exp(self.log_pmf(np.arange(terms))))
        return head + float(self.survival(terms))

    def encode(self):
        w, c = float(self.w), self.c
        offset = math.lgamma(c + 1.0) - math.lgamma(w + 1.0)
        return (
            KIND_POWERLAW,
            np.array([self.w], np.int64),
            np.array([self.alpha, self.beta, w, c, offset]),
        )

    def to_descriptor(self):
        return {"kind": "powerlaw", "alpha": self.alpha, "beta": self.beta, "w": self.w}


def make_interarrival(descriptor) -> InterArrivalSpec:
    """Build a validated inter-arrival law from a JSON-style descriptor."""
    if isinstance(descriptor, InterArrivalSpec):
        return descriptor
    d = dict(descriptor)
    kind = d.pop("kind", None)
    if kind == "deterministic":
        return Deterministic(d["k"])
    if kind == "finite":
        return FiniteSupport(tuple((int(v), float(p)) for v, p in d["probs"]))
    if kind == "geometric":
        return GeometricShifted(float(d["p"]), int(d.get("support_start", 1)))
    if kind == "powerlaw":
        return PowerLaw(float(d["alpha"]), float(d["beta"]), d["w"])
    raise ValueError(f"unknown inter-arrival kind {kind!r}")


def mean(spec: InterArrivalSpec):
    return spec.mean()


# --- compiled samplers -----------------------------------------------------


@njit(cache=True)
def _powerlaw_log_sf(j, w1, c1, offset):
    # log P(tau >= j)
    return offset + lgamma_ratio(float(j), w1, c1)


@njit(cache=True)
def _powerlaw_quantile(logv, w1, c1, offset, cap):
    # smallest j with log P(tau >= j + 1) <= logv, capped; scalar-only so
    # that callers in hot loops stay free of array reference counting
    if _powerlaw_log_sf(cap, w1, c1, offset) > logv:
        return cap
    if _powerlaw_log_sf(1, w1, c1, offset) <= logv:
        return np.int64(0)
    lo = np.int64(0)
    hi = np.int64(1)
    while _powerlaw_log_sf(hi + 1, w1, c1, offset) > logv:
        lo = hi
        hi = min(2 * hi, cap - 1)
    while hi - lo > 1:
        mid = lo + (hi - lo) // 2
        if _powerlaw_log_sf(mid + 1, w1, c1, offset) > logv:
            lo = mid
        else:
            hi = mid
    return hi


@njit(inline="always", cache=True)
def draw_tau(kind, ivals, fvals, state, cap):
    """One gap; values at or beyond ``cap`` are reported as ``cap``."""
    if kind == KIND_DETERMINISTIC:
        return min(ivals[0], cap)
    if kind == KIND_FINITE:
        u = next_open_double(state)
        i = 0
        while i < len(fvals) - 1 and u > fvals[i]:
            i += 1
        return min(ivals[i], cap)
    if kind == KIND_GEOMETRIC:
        start = ivals[0]
        if fvals[0] >= 1.0:
            return min(start, cap)
        u = next_open_double(state)
        m = math.floor(math.log(u) / fvals[1])
        if m >= cap - start:
            return cap
        return min(start + np.int64(m), cap)
    logv = math.log(next_open_double(state))
    return _powerlaw_quantile(logv, fvals[2] + 1.0, fvals[3] + 1.0, fvals[4], cap)


@njit(cache=True)
def _arrivals_within(kind, ivals, fvals, horizon, seed, stream):
    state = np.empty(4, np.uint64)
    seed_state(state, seed, stream, ARRIVALS)
    taus = []
    t = np.int64(0)
    while True:
        tau = draw_tau(kind, ivals, fvals, state, horizon + 1 - t)
        t += tau
        if t > horizon:
            break
        taus.append(tau)
    out = np.empty(len(taus), np.int64)
    for i in range(len(taus)):
        out[i] = taus[i]
    return out


@njit(cache=True)
def _draw_many(kind, ivals, fvals, count, seed, stream):
    state = np.empty(4, np.uint64)
    seed_state(state, seed, stream, ARRIVALS)
    out = np.empty(count, np.int64)
    for i in range(count):
        out[i] = draw_tau(kind, ivals, fvals, state, _NO_CAP)
    return out


def sample_taus(spec: InterArrivalSpec, count: int, seed, stream: int = 0) -> np.ndarray:
    """``count`` i.i.d. gaps from the stream ``(seed, stream)``."""
    kind, ivals, fvals = spec.encode()
    return _draw_many(kind, ivals, fvals, int(count), as_seed(seed), int(stream))


# --- arrival sequences -----------------------------------------------------


@dataclass(frozen=True)
class ArrivalSequence:
    """Immigration times up to a horizon.

    ``taus`` holds the gaps of the arrivals at times ``T_j <= horizon``;
    ``counts[j]`` is ``N_j = #{i : T_i <= j}`` for ``0 <= j <= horizon``.
    """

    taus: tuple[int, ...]
    horizon: int

    @classmethod
    def from_taus(cls, taus, horizon: int | None = None) -> "ArrivalSequence":
        taus = [int(t) for t in taus]
        if any(t < 0 for t in taus):
            raise ValueError("gaps must be non-negative")
        times = np.cumsum(taus, dtype=np.int64)
        if horizon is None:
            horizon = int(times[-1]) if len(taus) else 0
        keep = int(np.searchsorted(times, horizon, side="right"))
        return cls(tuple(taus[:keep]), int(horizon))

    @cached_property
    def times(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.taus, dtype=np.int64))

    @cached_property
    def counts(self) -> np.ndarray:
        hits = np.bincount(self.times, minlength=self.horizon + 1)
        return np.cumsum(hits)[: self.horizon + 1]

    def count(self, j: int) -> int:
        return int(self.counts[j])


def sample_arrivals(spec: InterArrivalSpec, n: int, seed, stream: int = 0) -> ArrivalSequence:
    """Arrival sequence up to horizon ``n`` from the stream ``(seed, stream)``.

    This is the same arrival stream that drives urn path ``stream`` in the
    simulation engine, so an urn result can always be paired with its
    immigration times.
    """
    if n < 0:
        raise ValueError("horizon must be non-negative")
    kind, ivals, fvals = spec.encode()
    taus = _arrivals_within(kind, ivals, fvals, np.int64(n), as_seed(seed), int(stream))
    return ArrivalSequence(tuple(int(t) for t in taus), int(n))


def enumerate_arrivals(spec: InterArrivalSpec, n: int):
    """All arrival sequences up to horizon ``n`` with their probabilities.

    Only laws with finite support and ``pi_0 = 0`` have finitely many
    sequences; probabilities are exact ``Fraction`` objects built from the
    binary value of each atom.
    """
    from fractions import Fraction

    if spec.pi0 > 0:
        raise ValueError("enumeration needs pi_0 = 0; zero gaps give infinitely many sequences")
    atoms = [(v, Fraction(float(spec.pmf(v)))) for v in spec.support()]
    out = []

    def walk(prefix, t, prob):
        tail = Fraction(0)
        for v, p in atoms:
            if t + v <= n:
                walk(prefix + [v], t + v, prob * p)
            else:
                tail += p
        if tail:
            out.append((ArrivalSequence(tuple(prefix), n), prob * tail))

    walk([], 0, Fraction(1))
    return out
