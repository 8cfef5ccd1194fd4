"""Sequential preferential attachment with a random number of edges per vertex.

Vertex ``s + m`` arrives at step ``m`` and attaches ``tau_m`` edges one at a
time to the existing vertices, each with probability proportional to the
current weights (updated after every edge).  It then joins with weight 1.
The summed weight of the first ``k`` vertices follows the immigration urn
driven by the same gaps: edges are draws, whites are the first ``k``
vertices, and each new vertex is an immigrant black ball.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numba import njit, prange

from .errors import TooLargeError
from .interarrival import InterArrivalSpec, draw_tau, make_interarrival
from .stat_harness import KSResult, ks_critical, ks_two_sample
from .streams import ARRIVALS, DRAWS, as_seed, next_double, seed_state
from .urn_engine import ExactPmf, exact_pmf_given_arrivals

# draws of the urn side of a coupled comparison
URN_SIDE = 3
TREE_THRESHOLD = 10_000
# single gaps are capped here; only heavy-tailed laws can reach it
TAU_CAP = 10_000_000


@dataclass(frozen=True)
class SeedGraph:
    """Initial vertex weights ``d_1, ..., d_s``."""

    degrees: tuple[int, ...]

    def __post_init__(self):
        degrees = tuple(int(d) for d in self.degrees)
        if not degrees or any(d < 1 for d in degrees):
            raise ValueError("seed weights must be positive")
        object.__setattr__(self, "degrees", degrees)

    @property
    def s(self) -> int:
        return len(self.degrees)

    @property
    def cumulative(self) -> tuple[int, ...]:
        return tuple(itertools.accumulate(self.degrees))

    def c(self, k: int) -> int:
        return self.cumulative[k - 1] if k > 0 else 0


@dataclass(frozen=True)
class PAState:
    """Vertex weights after ``n`` steps together with the gaps that built them."""

    graph: SeedGraph
    weights: np.ndarray
    taus: np.ndarray
    snapshots: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return len(self.taus)

    @property
    def total_weight(self) -> int:
        return int(self.weights.sum())

    def to_csv(self, path, step: int | None = None) -> None:
        weights = self.weights if step is None else self.snapshots[step]
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["vertex", "weight"])
            for i, d in enumerate(weights, start=1):
                if d > 0:
                    out.writerow([i, int(d)])


def cumulative_degree(state: PAState, k: int) -> int:
    """``d_1(n) + ... + d_k(n)``."""
    if not 1 <= k <= state.graph.s + state.n:
        raise IndexError(f"vertex {k} does not exist after {state.n} steps")
    return int(state.weights[:k].sum())


# --- compiled kernels --------------------------------------------------------------


@njit(cache=True)
def _tree_add(tree, i, delta):
    i += 1
    while i < tree.size:
        tree[i] += delta
        i += i & -i


@njit(cache=True)
def _tree_find(tree, target, top):
    # smallest index whose prefix sum exceeds target
    pos = 0
    step = top
    while step > 0:
        nxt = pos + step
        if nxt < tree.size and tree[nxt] <= target:
            pos = nxt
            target -= tree[nxt]
        step >>= 1
    return pos


@njit(cache=True)
def _attach(weights, taus, s, drw, use_tree, checkpoints, snaps):
    size = weights.size
    tree = np.zeros(size + 1 if use_tree else 1, np.int64)
    if use_tree:
        for i in range(s):
            _tree_add(tree, i, weights[i])
    top = 1
    while top * 2 <= size:
        top *= 2
    total = np.int64(0)
    for i in range(s):
        total += weights[i]
    cp = 0
    for m in range(1, taus.size + 1):
        alive = s + m - 1
        for _ in range(taus[m - 1]):
            target = np.int64(next_double(drw) * total)
            if use_tree:
                j = _tree_find(tree, target, top)
                _tree_add(tree, j, 1)
            else:
                j = 0
                acc = weights[0]
                while acc <= target and j < alive - 1:
                    j += 1
                    acc += weights[j]
            weights[j] += 1
            total += 1
        weights[alive] = 1
        total += 1
        if use_tree:
            _tree_add(tree, alive, 1)
        while cp < checkpoints.size and checkpoints[cp] == m:
            snaps[cp, :] = weights
            cp += 1


@njit(cache=True)
def _draw_taus(kind, ivals, fvals, n, state, cap):
    taus = np.empty(n, np.int64)
    for i in range(n):
        taus[i] = draw_tau(kind, ivals, fvals, state, cap)
    return taus


@njit(cache=True)
def _urn_given_gaps(b, w, gaps, state):
    # urn whose immigration gaps are ``gaps``, run until the last arrival
    white = np.int64(w)
    black = np.int64(b)
    for g in gaps:
        for _ in range(g):
            if next_double(state) * (white + black) < white:
                white += 1
            else:
                black += 1
        black += 1
    return white


@njit(cache=True)
def _coupled_urn_start(degrees, k, taus):
    # (b, w, first gap index) of the urn matching the first k vertices
    s = degrees.size
    cs = degrees.sum()
    if k < s:
        ck = degrees[:k].sum()
        return cs - ck, ck, 0
    m0 = k - s + 1
    return np.int64(1), cs + (k - s) + taus[:m0].sum(), m0


@njit(cache=True, parallel=True)
def _pa_batch(degrees, k, n, kind, ivals, fvals, seed, first, paths, use_tree):
    pa = np.empty(paths, np.int64)
    urn = np.empty(paths, np.int64)
    s = degrees.size
    none = np.empty(0, np.int64)
    nosnap = np.empty((0, 0), np.int64)
    for p in prange(paths):
        arr = np.empty(4, np.uint64)
        drw = np.empty(4, np.uint64)
        seed_state(arr, seed, first + p, ARRIVALS)
        seed_state(drw, seed, first + p, DRAWS)
        taus = _draw_taus(kind, ivals, fvals, n, arr, TAU_CAP)
        weights = np.zeros(s + n, np.int64)
        weights[:s] = degrees
        _attach(weights, taus, s, drw, use_tree, none, nosnap)
        pa[p] = weights[:k].sum()
        b, w, start = _coupled_urn_start(degrees, k, taus)
        seed_state(drw, seed, first + p, URN_SIDE)
        urn[p] = _urn_given_gaps(b, w, taus[start:], drw)
    return pa, urn


# --- simulation ----------------------------------------------------------------------


def _as_spec(pi) -> InterArrivalSpec:
    return pi if isinstance(pi, InterArrivalSpec) else make_interarrival(pi)


def simulate_pa(graph: SeedGraph, pi, n: int, seed, stream: int = 0, checkpoints=(), taus=None) -> PAState:
    """Grow the graph for ``n`` steps.

    The gaps come from the arrival stream of ``(seed, stream)``, the same
    stream that drives urn path ``stream``; explicit ``taus`` override it
    (``pi`` may then be ``None``).
    ``checkpoints`` lists steps at which a copy of the weights is kept.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    seed = as_seed(seed)
    arr = np.empty(4, np.uint64)
    drw = np.empty(4, np.uint64)
    seed_state(arr, seed, stream, ARRIVALS)
    seed_state(drw, seed, stream, DRAWS)
    if taus is None:
        kind, ivals, fvals = _as_spec(pi).encode()
        taus = _draw_taus(kind, ivals, fvals, n, arr, TAU_CAP)
    else:
        taus = np.asarray(taus, dtype=np.int64)
        if taus.size != n or np.any(taus < 0):
            raise ValueError("need n non-negative gaps")
    cps = np.array(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
    if np.any((cps < 1) | (cps > n)):
        raise ValueError("checkpoints must lie in 1..n")
    weights = np.zeros(graph.s + n, np.int64)
    weights[: graph.s] = graph.degrees
    snaps = np.zeros((cps.size, weights.size), np.int64)
    _attach(weights, taus, graph.s, drw, weights.size > TREE_THRESHOLD, cps, snaps)
    return PAState(graph, weights, taus, {int(c): snaps[i] for i, c in enumerate(cps)})


# --- exact enumeration -----------------------------------------------------------------


def pa_exact_weights(graph: SeedGraph, taus) -> dict[tuple[int, ...], Fraction]:
    """Exact law of the weight vector given the gaps."""
    dist = {tuple(graph.degrees): Fraction(1)}
    for tau in taus:
        for _ in range(int(tau)):
            nxt: dict = {}
            for weights, p in dist.items():
                total = sum(weights)
                for j, d in enumerate(weights):
                    key = weights[:j] + (d + 1,) + weights[j + 1 :]
                    nxt[key] = nxt.get(key, 0) + p * Fraction(d, total)
            dist = nxt
        dist = {weights + (1,): p for weights, p in dist.items()}
    return dist


def _urn_side_exact(graph: SeedGraph, k: int, taus) -> ExactPmf:
    cs = graph.c(graph.s)
    if k < graph.s:
        return exact_pmf_given_arrivals(cs - graph.c(k), graph.c(k), sum(taus), list(taus))
    m0 = k - graph.s + 1
    rest = list(taus[m0:])
    return exact_pmf_given_arrivals(1, cs + (k - graph.s) + sum(taus[:m0]), sum(rest), rest)


@dataclass(frozen=True)
class CorrespondenceReport:
    mode: str
    k: int
    n: int
    passed: bool
    max_abs_diff: float | None = None
    pa_pmf: dict | None = None
    urn_pmf: dict | None = None
    ks: KSResult | None = None
    critical: float | None = None


_MAX_EXACT_STEPS = 6
_MAX_EXACT_EDGES = 12


def _gap_sequences(pi: InterArrivalSpec, n: int):
    try:
        support = pi.support()
    except ValueError:
        raise TooLargeError("exact mode needs an inter-arrival law with finite support") from None
    if n > _MAX_EXACT_STEPS or len(support) > 4 or n * max(support) > _MAX_EXACT_EDGES:
        raise TooLargeError("exact mode limited to n <= 6 steps and at most 12 edges")
    atoms = [(v, Fraction(float(pi.pmf(v)))) for v in support]
    for combo in itertools.product(atoms, repeat=n):
        yield tuple(v for v, _ in combo), math.prod((p for _, p in combo), start=Fraction(1))


def correspondence_check(graph: SeedGraph, pi, k: int, n: int, paths: int = 0, seed=0, mode: str = "exact",
                         level: float = 0.01, tol: float = 1e-10, first_stream: int = 0) -> CorrespondenceReport:
    """Compare the summed weight of the first ``k`` vertices with its urn.

    ``exact`` enumerates every gap sequence and, for each, both the graph law
    and the urn law driven by that same sequence.  ``mc`` runs ``paths``
    graphs and, on each path, an urn fed with the same gaps but independent
    draws, then compares the two samples by a two-sample KS test.
    """
    pi = _as_spec(pi)
    if not 1 <= k <= graph.s + n - 1:
        raise IndexError("k must name a vertex present before the last step")
    if k >= graph.s and n < k - graph.s + 1:
        raise ValueError("the later-vertex identity needs n >= k - s + 1")
    if mode == "exact":
        pa: dict = {}
        urn: dict = {}
        for taus, prob in _gap_sequences(pi, n):
            for weights, p in pa_exact_weights(graph, taus).items():
                x = sum(weights[:k])
                pa[x] = pa.get(x, 0) + prob * p
            for x, p in _urn_side_exact(graph, k, taus).items():
                urn[x] = urn.get(x, 0) + prob * p
        keys = sorted(set(pa) | set(urn))
        diff = max(abs(float(pa.get(x, 0) - urn.get(x, 0))) for x in keys)
        return CorrespondenceReport("exact", k, n, diff <= tol, diff, dict(sorted(pa.items())), dict(sorted(urn.items())))
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    if paths < 1:
        raise ValueError("mc mode needs paths >= 1")
    kind, ivals, fvals = pi.encode()
    degrees = np.array(graph.degrees, dtype=np.int64)
    use_tree = graph.s + n > TREE_THRESHOLD
    pa_x, urn_x = _pa_batch(degrees, k, n, kind, ivals, fvals, as_seed(seed), int(first_stream), int(paths), use_tree)
    ks = ks_two_sample(pa_x.astype(float), urn_x.astype(float))
    crit = ks_critical(paths, paths, level)
    return CorrespondenceReport("mc", k, n, ks.statistic < crit, ks=ks, critical=crit)
