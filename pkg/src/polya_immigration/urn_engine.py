"""Simulation of the two-colour urn with black-ball immigration.

At each step a ball is drawn with probability proportional to the current
counts and returned together with one more ball of its colour.  After draw
``j`` one black ball is added for every immigration time ``T_i = j``; arrivals
at time zero add their black balls before the first draw.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit, prange
from scipy import special, stats

from .errors import TooLargeError
from .interarrival import (
    ArrivalSequence,
    InterArrivalSpec,
    make_interarrival,
    sample_arrivals,
    scaling_exponent,
    draw_tau,
)
from .streams import ARRIVALS, DRAWS, as_seed, next_double, numpy_rng, seed_state


@dataclass(frozen=True)
class UrnConfig:
    b: int
    w: int
    pi: InterArrivalSpec
    n: int

    def __post_init__(self):
        for name in ("b", "w"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
        if int(self.n) != self.n or self.n < 0:
            raise ValueError(f"n must be a non-negative integer, got {self.n}")
        object.__setattr__(self, "pi", make_interarrival(self.pi))


@dataclass(frozen=True)
class UrnResult:
    """Final state of one path; ``path[j]`` holds (white, black) after draw ``j``."""

    white: int
    black: int
    immigrants: int
    arrivals: ArrivalSequence
    path: np.ndarray | None = None


@dataclass(frozen=True)
class UrnBatch:
    """Final white counts ``X_n`` and immigration counts ``N_n`` for many paths."""

    config: UrnConfig
    seed: int
    white: np.ndarray
    immigrants: np.ndarray
    first_stream: int = 0

    def scaled(self) -> np.ndarray:
        return scaled_white(self.white, self.config.n, self.config.pi.mean())

    def to_csv(self, path) -> None:
        scaled = self.scaled()
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["seed_stream", "n", "X_n", "N_n", "scaled_value"])
            for i in range(len(self.white)):
                out.writerow(
                    [
                        self.first_stream + i,
                        self.config.n,
                        int(self.white[i]),
                        int(self.immigrants[i]),
                        format(float(scaled[i]), ".17g"),
                    ]
                )


# --- compiled kernels ------------------------------------------------------


@njit(cache=True)
def _run_path(b, w, n, kind, ivals, fvals, seed, stream, path):
    arr = np.empty(4, np.uint64)
    drw = np.empty(4, np.uint64)
    seed_state(arr, seed, stream, ARRIVALS)
    seed_state(drw, seed, stream, DRAWS)
    white = np.int64(w)
    black = np.int64(b)
    arrived = np.int64(0)
    t_next = draw_tau(kind, ivals, fvals, arr, n + 1)
    while t_next == 0:
        black += 1
        arrived += 1
        t_next = draw_tau(kind, ivals, fvals, arr, n + 1)
    record = path.shape[0] > 0
    if record:
        path[0, 0] = white
        path[0, 1] = black
    for step in range(1, n + 1):
        if next_double(drw) * (white + black) < white:
            white += 1
        else:
            black += 1
        while t_next == step:
            black += 1
            arrived += 1
            t_next = step + draw_tau(kind, ivals, fvals, arr, n + 1 - step)
        if record:
            path[step, 0] = white
            path[step, 1] = black
    return white, black, arrived


@njit(cache=True, parallel=True)
def _run_batch(b, w, n, kind, ivals, fvals, seed, first, paths):
    white = np.empty(paths, np.int64)
    arrived = np.empty(paths, np.int64)
    nopath = np.empty((0, 2), np.int64)
    for i in prange(paths):
        x, _, a = _run_path(b, w, n, kind, ivals, fvals, seed, first + i, nopath)
        white[i] = x
        arrived[i] = a
    return white, arrived


def simulate_urn(config: UrnConfig, seed, stream: int = 0, record_path: bool = False) -> UrnResult:
    """One path of the urn driven by stream ``(seed, stream)``."""
    kind, ivals, fvals = config.pi.encode()
    path = np.zeros((config.n + 1 if record_path else 0, 2), np.int64)
    white, black, arrived = _run_path(
        config.b, config.w, config.n, kind, ivals, fvals, as_seed(seed), int(stream), path
    )
    arrivals = sample_arrivals(config.pi, config.n, seed, stream)
    return UrnResult(int(white), int(black), int(arrived), arrivals, path if record_path else None)


def simulate_batch(config: UrnConfig, paths: int, seed, first_stream: int = 0) -> UrnBatch:
    """``paths`` independent runs using streams ``first_stream, first_stream+1, ...``.

    Each path owns its generator state, so the output is identical for any
    thread count.
    """
    kind, ivals, fvals = config.pi.encode()
    white, arrived = _run_batch(
        config.b, config.w, config.n, kind, ivals, fvals, as_seed(seed), int(first_stream), int(paths)
    )
    return UrnBatch(config, as_seed(seed), white, arrived, int(first_stream))


def scaled_white(x_n, n: int, mu):
    """``x_n / n^(mu/(mu+1))`` with exponent 1 for infinite mean."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return np.asarray(x_n, dtype=float) * float(n) ** (-scaling_exponent(mu))


# --- exact distributions ---------------------------------------------------


class ExactPmf(dict):
    """Map from white count to probability."""

    def as_float(self) -> dict[int, float]:
        return {k: float(v) for k, v in sorted(self.items())}

    def mean(self):
        return sum(k * p for k, p in self.items())

    def rising_moment(self, k: int):
        return sum(p * math.prod(range(x, x + k)) for x, p in self.items())

    def total(self):
        return sum(self.values())


def _step(dist, total_before, exact):
    # one draw from every white count in ``dist`` with given ball total
    out: dict = {}
    for white, p in dist.items():
        pw = Fraction(white, total_before) if exact else white / total_before
        out[white + 1] = out.get(white + 1, 0) + p * pw
        out[white] = out.get(white, 0) + p * (1 - pw)
    return out


def exact_pmf_given_arrivals(b: int, w: int, n: int, taus, exact: bool = True) -> ExactPmf:
    """Law of ``X_n`` conditional on the immigration gaps ``taus``."""
    arrivals = ArrivalSequence.from_taus(taus, n)
    counts = arrivals.counts
    dist = {w: Fraction(1) if exact else 1.0}
    for j in range(n):
        dist = _step(dist, b + w + j + int(counts[j]), exact)
    return ExactPmf(sorted(dist.items()))


_MAX_EXACT_N = 10
_MAX_ATOMS = 4


def exact_pmf(config: UrnConfig, exact: bool | None = None, zero_tail: float = 1e-18) -> ExactPmf:
    """Exact law of ``X_n`` by dynamic programming over urn and renewal states.

    The state after each step is (white, black, time to next arrival).
    Arrivals are marginalised: an arrival adds one black ball plus one more
    for each following zero gap, and the next positive gap is drawn from the
    law conditioned on being positive.  Rational arithmetic is used when
    ``pi_0 = 0``; otherwise the geometric batch sizes are truncated once
    their tail falls below ``zero_tail`` and the result is in floating point.
    """
    pi = config.pi
    try:
        support = pi.support()
    except ValueError:
        raise TooLargeError("exact pmf needs an inter-arrival law with finite support") from None
    if config.n > _MAX_EXACT_N or len(support) > _MAX_ATOMS:
        raise TooLargeError(f"exact pmf limited to n <= {_MAX_EXACT_N} and {_MAX_ATOMS} atoms")
    pi0 = pi.pi0
    if exact is None:
        exact = pi0 == 0
    if exact and pi0 > 0:
        raise ValueError("rational output requires pi_0 = 0")
    num = (lambda x: Fraction(float(x))) if exact else float
    n = config.n
    positive = [(v, num(pi.pmf(v))) for v in support if v > 0]
    norm = sum(p for _, p in positive)
    positive = [(v, p / norm) for v, p in positive]
    p0 = num(pi0)
    if pi0 > 0:
        zmax = max(1, math.ceil(math.log(zero_tail) / math.log(pi0)))
        batch = [(1 + z, (1 - p0) * p0**z) for z in range(zmax)]
    else:
        batch = [(1, num(1))]
    never = n + 1

    def schedule(now, weight, out_key, acc):
        # next arrival after time ``now`` drawn from the positive part
        for v, p in positive:
            when = now + v if now + v <= n else never
            acc[(*out_key, when)] = acc.get((*out_key, when), 0) + weight * p

    states: dict = {}
    one = num(1)
    # time zero: with probability pi_0 a batch arrives before the first draw
    start = {}
    schedule(0, one - p0, (config.w, config.b), start)
    for size, q in batch:
        if q:
            schedule(0, p0 * q, (config.w, config.b + size), start)
    states = start
    for step in range(1, n + 1):
        nxt: dict = {}
        for (white, black, when), p in states.items():
            total = white + black
            pw = Fraction(white, total) if exact else white / total
            for dw, db, q in ((1, 0, pw), (0, 1, 1 - pw)):
                wh, bl = white + dw, black + db
                if when != step:
                    nxt[(wh, bl, when)] = nxt.get((wh, bl, when), 0) + p * q
                    continue
                for size, r in batch:
                    schedule(step, p * q * r, (wh, bl + size), nxt)
        states = nxt
    out: dict = {}
    for (white, _, _), p in states.items():
        out[white] = out.get(white, 0) + p
    return ExactPmf(sorted(out.items()))


# --- classical Polya urn with Beta coupling --------------------------------


def classical_pmf(n: int, blacks: int, whites: int) -> np.ndarray:
    """``P(Q(n) = whites + j)`` for ``j = 0..n``: a beta-binomial law."""
    return stats.betabinom.pmf(np.arange(n + 1), n, whites, blacks)


def simulate_classical_polya(beta_blacks: int, omega_whites: int, n: int, seed, size: int | None = None, stream: int = 0):
    """White count ``Q(n)`` of a classical Polya urn coupled with ``V ~ Beta(omega, beta)``.

    Both are read off the same uniform ``U``: ``V`` is the Beta quantile and
    ``Q(n) - omega`` the beta-binomial quantile of ``U``.  This comonotone
    coupling keeps ``|Q(n) - n V|`` below ``beta (4 omega + beta + 1)``, which
    is checked on every draw.
    """
    if beta_blacks < 1 or omega_whites < 1:
        raise ValueError("the urn needs at least one ball of each colour")
    rng = numpy_rng(seed, 0x51, stream)
    u = rng.random(1 if size is None else size)
    v = special.betaincinv(omega_whites, beta_blacks, u)
    cdf = np.cumsum(classical_pmf(n, beta_blacks, omega_whites))
    cdf[-1] = 1.0
    q = omega_whites + np.minimum(np.searchsorted(cdf, u, side="left"), n)
    bound = beta_blacks * (4 * omega_whites + beta_blacks + 1)
    gap = np.abs(q - n * v)
    if np.any(gap >= bound):
        raise AssertionError(f"coupling bound {bound} violated: max gap {gap.max()}")
    if size is None:
        return int(q[0]), float(v[0])
    return q, v
