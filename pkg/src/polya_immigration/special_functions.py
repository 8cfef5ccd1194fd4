"""Log-gamma helpers, Kummer's U function and unsigned Stirling numbers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import integrate, optimize, special

from .errors import DomainError, QuadratureError


def log_gamma(x):
    """``log Gamma(x)`` for ``x > 0`` (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"log_gamma requires x > 0, got {x!r}")
    if arr.ndim == 0:
        return math.lgamma(float(arr))
    return special.gammaln(arr)


@njit(cache=True)
def lgamma_ratio(x, a, b):
    """``log Gamma(x+a) - log Gamma(x+b)`` without cancellation for large ``x``."""
    scale = max(10.0, abs(a), abs(b))
    if x < 1000.0 * scale:
        return math.lgamma(x + a) - math.lgamma(x + b)
    b2 = (a * a - a) - (b * b - b)
    b3 = (a * a * a - 1.5 * a * a + 0.5 * a) - (b * b * b - 1.5 * b * b + 0.5 * b)
    b4 = (a * a * a * a - 2.0 * a * a * a + a * a) - (b * b * b * b - 2.0 * b * b * b + b * b)
    inv = 1.0 / x
    return (a - b) * math.log(x) + inv * (b2 / 2.0 - inv * (b3 / 6.0 - inv * b4 / 12.0))


@njit(cache=True)
def _lgamma_ratio_array(xs, a, b):
    out = np.empty(xs.size)
    for i in range(xs.size):
        out[i] = lgamma_ratio(xs[i], a, b)
    return out


def log_gamma_ratio(x, a: float, b: float):
    """Vectorised ``log Gamma(x+a) - log Gamma(x+b)``."""
    arr = np.asarray(x, dtype=float)
    out = _lgamma_ratio_array(arr.ravel(), float(a), float(b)).reshape(arr.shape)
    return out[()] if out.ndim == 0 else out


def _quad(f, lo, hi, epsrel):
    value, err, info = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=epsrel, limit=400, full_output=1)[:3]
    if not math.isfinite(value) or err > max(10 * epsrel * abs(value), 1e-300):
        raise QuadratureError(f"integral on [{lo}, {hi}] not converged: value={value}, err={err}")
    return value


def kummer_u(a: float, b: float, z: float, rtol: float = 1e-12) -> float:
    """Confluent hypergeometric function of the second kind, ``U(a, b, z)``.

    Evaluated from ``Gamma(a) U = int_0^inf exp(-z t) t^(a-1) (1+t)^(b-a-1) dt``
    for ``a > 0`` and ``z > 0``.  On ``[0, 1]`` the substitution ``t = s^(1/a)``
    removes the endpoint singularity when ``a < 1``; for ``a >= 1`` the
    integrand is bounded and integrated in ``t`` directly.  On ``[1, inf)`` the substitution
    ``t = e^y`` turns algebraic decay into exponential decay, which keeps small
    ``z`` (very long tails) accurate; the range is cut where the log integrand
    has dropped 50 below its maximum.
    """
    if not (a > 0 and z > 0):
        raise DomainError(f"kummer_u needs a > 0 and z > 0, got a={a}, z={z}")
    e = b - a - 1.0

    def head(s):
        t = s ** (1.0 / a)
        return math.exp(-z * t + e * math.log1p(t))

    def log_tail(y):
        t = math.exp(y)
        return -z * (t - 1.0) + a * y + e * math.log1p(t)

    def slope(y):
        t = math.exp(y)
        return -z * t + a + e * t / (1.0 + t)

    # log_tail is concave in y; locate its maximum on [0, inf)
    y_top = 0.0
    if slope(0.0) > 0:
        hi = 1.0
        while slope(hi) > 0:
            hi *= 2.0
        y_top = optimize.brentq(slope, 0.0, hi, xtol=1e-12)
    peak = log_tail(y_top)
    # grow the range from the integrand's own width so large z keeps its peak resolved
    step = 1.0 / (1.0 + z)
    while log_tail(y_top + step) > peak - 50.0:
        step *= 2.0
    y_end = y_top + step
    tail = lambda y: math.exp(log_tail(y) - peak)
    # for large z the head mass sits in t < L/z; beyond it the integrand is
    # below exp(-L) 2^|e|, negligible against the head value ~ z^(-a)
    cut = 50.0 + a * math.log(max(z, 1.0)) + abs(e)
    t_end = min(1.0, cut / z)
    if a < 1:
        lead = _quad(head, 0.0, t_end**a, rtol) / a
    else:
        # bounded integrand in t itself; its mode sits at (a-1)/z for large z
        mode = (a - 1.0) / z
        body = lambda t: math.exp(-z * t + (a - 1.0) * math.log(t) + e * math.log1p(t)) if t > 0 else float(a == 1)
        pieces = [0.0, mode, t_end] if 0 < mode < t_end else [0.0, t_end]
        lead = sum(_quad(body, lo, hi, rtol) for lo, hi in zip(pieces[:-1], pieces[1:]))
    rest = 0.0
    if y_top > 0:
        rest += _quad(tail, 0.0, y_top, rtol)
    rest += _quad(tail, y_top, y_end, rtol)
    # U = (lead + exp(peak - z) ... ) / Gamma(a); combine in log space
    log_rest = math.log(rest) + peak - z if rest > 0 else -math.inf
    log_total = np.logaddexp(math.log(lead), log_rest)
    return math.exp(log_total - math.lgamma(a))


@dataclass(frozen=True)
class StirlingRow:
    """Row ``k`` of the unsigned Stirling numbers of the first kind.

    ``coefficients[i - 1]`` is ``[k i]``, the coefficient of ``x^i`` in the
    rising factorial ``x (x+1) ... (x+k-1)``.
    """

    k: int
    coefficients: tuple[int, ...]

    def __getitem__(self, i: int) -> int:
        if not 1 <= i <= self.k:
            return 0
        return self.coefficients[i - 1]


_INT64_MAX = 2**63 - 1


def stirling_first_unsigned(k: int) -> StirlingRow:
    """Exact row ``[k 1], ..., [k k]`` via ``[k+1 i] = [k i-1] + k [k i]``."""
    if k < 1:
        raise ValueError("order must be at least 1")
    if k > 20:
        raise OverflowError("unsigned Stirling numbers beyond k=20 overflow 64-bit integers")
    row = [1]  # k = 1
    for m in range(1, k):
        nxt = [0] * (m + 1)
        for i in range(m + 1):
            left = row[i - 1] if i >= 1 else 0
            mid = row[i] if i < m else 0
            nxt[i] = left + m * mid
        row = nxt
    assert max(row) <= _INT64_MAX
    return StirlingRow(k, tuple(row))
