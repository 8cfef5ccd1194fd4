"""The UL family of limit laws.

For ``v > 0`` and non-negative coefficients ``a_k`` with generating series
``A(x) = sum a_k x^k`` of radius ``rho``, ``UL(v; (a_k))`` has density

    u(x) = c x^(v-1) exp(-v Phi(x)),   Phi(x) = sum a_k x^k / k,   0 < x < rho.

Two coefficient families are supported: finitely many coefficients
(``rho = inf``) and the geometric sequence ``a_k = beta alpha^(-k)`` for which
``Phi(x) = -beta log(1 - x/alpha)`` and ``Z/alpha ~ Beta(v, v beta + 1)``.
Normalising constants, moments and CDFs are computed by adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy import integrate, optimize, special
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainError, MissingMomentError, NormalizationError, QuadratureError
from .samples import SampleBatch
from .streams import numpy_rng

MOMENT_CACHE = 12
QUAD_RTOL = 1e-13
QUAD_CHECK = 1e-10
# the integrand is cut where it drops below exp(-TAIL_DROP) times its peak
TAIL_DROP = 60.0


@dataclass(frozen=True)
class Polynomial:
    """Finitely many coefficients ``a_1, ..., a_K``."""

    a: tuple[float, ...]

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        if not a or any(x < 0 or not math.isfinite(x) for x in a) or not any(x > 0 for x in a):
            raise ValueError("coefficients must be finite, non-negative and not all zero")
        while a[-1] == 0:
            a = a[:-1]
        object.__setattr__(self, "a", a)

    @property
    def rho(self) -> float:
        return math.inf

    def coefficient(self, k: int) -> float:
        return self.a[k - 1] if 1 <= k <= len(self.a) else 0.0

    def support(self, limit: int | None = None) -> list[int]:
        return [k for k in range(1, len(self.a) + 1) if self.a[k - 1] > 0]

    def scaled(self, theta: float) -> "Polynomial":
        return Polynomial(tuple(x * theta ** -(k + 1) for k, x in enumerate(self.a)))

    def multiplied(self, factor: float) -> "Polynomial":
        return Polynomial(tuple(factor * x for x in self.a))

    def A(self, x):
        x = np.asarray(x, dtype=float)
        return np.polyval(np.array(self.a[::-1] + (0.0,)), x)

    def Phi(self, x):
        x = np.asarray(x, dtype=float)
        c = [x_ / (k + 1) for k, x_ in enumerate(self.a)]
        return np.polyval(np.array(c[::-1] + [0.0]), x)


@dataclass(frozen=True)
class Geometric:
    """``a_k = beta alpha^(-k)`` for all ``k >= 1``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")

    @property
    def rho(self) -> float:
        return self.alpha

    def coefficient(self, k: int) -> float:
        return self.beta * self.alpha ** (-k) if k >= 1 else 0.0

    def support(self, limit: int | None = None) -> list[int]:
        return list(range(1, (limit or 1) + 1))

    def scaled(self, theta: float) -> "Geometric":
        return Geometric(theta * self.alpha, self.beta)

    def multiplied(self, factor: float) -> "Geometric":
        return Geometric(self.alpha, factor * self.beta)

    def A(self, x):
        x = np.asarray(x, dtype=float)
        return self.beta * x / (self.alpha - x)

    def Phi(self, x):
        x = np.asarray(x, dtype=float)
        return -self.beta * np.log1p(-x / self.alpha)


class ULSpec:
    """``UL(v; (a_k))`` with cached normalising constant and moments ``mu_0..mu_12``."""

    def __init__(self, v: float, coefficients):
        if not v > 0:
            raise ValueError(f"v must be positive, got {v}")
        if isinstance(coefficients, (list, tuple, np.ndarray)):
            coefficients = Polynomial(tuple(coefficients))
        if not isinstance(coefficients, (Polynomial, Geometric)):
            raise TypeError("coefficients must be Polynomial or Geometric")
        self.v = float(v)
        self.coefficients = coefficients
        self._log_mass: dict[int, float] = {}
        self._log_mass[0] = self._log_integral(0)
        for k in range(1, MOMENT_CACHE + 1):
            self._log_mass[k] = self._log_integral(k)

    def __repr__(self):
        return f"ULSpec(v={self.v!r}, coefficients={self.coefficients!r})"

    def __eq__(self, other):
        return isinstance(other, ULSpec) and (self.v, self.coefficients) == (other.v, other.coefficients)

    def __hash__(self):
        return hash((self.v, self.coefficients))

    @property
    def rho(self) -> float:
        return self.coefficients.rho

    @property
    def c(self) -> float:
        return math.exp(-self._log_mass[0])

    def coefficient(self, k: int) -> float:
        return self.coefficients.coefficient(k)

    # --- log integrand helpers ---------------------------------------------

    def _log_kernel(self, x, k: int = 0):
        """``(v-1+k) log x - v Phi(x)``."""
        with np.errstate(divide="ignore"):
            return (self.v - 1.0 + k) * np.log(x) - self.v * self.coefficients.Phi(x)

    def _mode(self, k: int) -> float:
        """Maximiser of ``x^(v-1+k) exp(-v Phi(x))``; 0 when the kernel is decreasing."""
        p = self.v - 1.0 + k
        if p <= 0:
            return 0.0
        co = self.coefficients
        if isinstance(co, Geometric):
            return p * co.alpha / (self.v * co.beta + p)
        f = lambda x: self.v * float(co.A(x)) - p
        hi = 1.0
        while f(hi) < 0:
            hi *= 2.0
        return optimize.brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-14)

    def _split_point(self, k: int) -> float:
        mode = self._mode(k)
        if mode > 0:
            return mode
        # decreasing kernel: split where v Phi(x) = 1
        co = self.coefficients
        if isinstance(co, Geometric):
            return co.alpha * min(-math.expm1(-1.0 / (self.v * co.beta)), 0.5)
        f = lambda x: self.v * float(co.Phi(x)) - 1.0
        hi = 1.0
        while f(hi) < 0:
            hi *= 2.0
        return optimize.brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-14)

    def _upper(self, k: int) -> float:
        """Truncation point where the kernel falls ``TAIL_DROP`` below its peak."""
        if math.isfinite(self.rho):
            return self.rho
        x0 = self._split_point(k)
        top = float(self._log_kernel(x0, k))
        x = 2.0 * x0
        while float(self._log_kernel(x, k)) > top - TAIL_DROP:
            x *= 1.5
        return x

    def _quad(self, f, lo, hi, **kw):
        value, err, info = integrate.quad(
            f, lo, hi, epsabs=0.0, epsrel=QUAD_RTOL, limit=500, full_output=1, **kw
        )[:3]
        if not math.isfinite(value) or value < 0 or err > QUAD_CHECK * max(value, 1e-300):
            raise QuadratureError(f"quadrature on [{lo}, {hi}] failed: value={value}, error={err}")
        return value

    def _piece(self, k: int, lo: float, hi: float, shift: float) -> float:
        """``int_lo^hi x^(v-1+k) exp(-v Phi(x) - shift) dx`` for ``0 < lo < hi``."""
        if hi <= lo:
            return 0.0
        co = self.coefficients
        p = self.v - 1.0 + k
        if isinstance(co, Geometric) and hi >= co.alpha:
            # algebraic endpoint weight (alpha - x)^(v beta)
            vb = self.v * co.beta
            g = lambda x: math.exp(p * math.log(x) - vb * math.log(co.alpha) - shift)
            return self._quad(g, lo, co.alpha, weight="alg", wvar=(0.0, vb))
        g = lambda x: math.exp(p * math.log(x) - self.v * float(co.Phi(x)) - shift)
        return self._quad(g, lo, hi)

    def _head(self, k: int, hi: float) -> float:
        """``int_0^hi x^(v-1+k) exp(-v Phi(x)) dx`` via ``s = x^(v+k)``."""
        q = self.v + k
        co = self.coefficients
        g = lambda s: math.exp(-self.v * float(co.Phi(s ** (1.0 / q))))
        return self._quad(g, 0.0, hi**q) / q

    def _log_integral(self, k: int) -> float:
        """``log int_0^rho x^(v-1+k) exp(-v Phi(x)) dx``."""
        split = self._split_point(k)
        shift = float(self._log_kernel(split, k))
        head = self._head(k, split)
        tail = self._piece(k, split, self._upper(k), shift)
        # head is unscaled; combine in log space
        return shift + math.log(head * math.exp(-shift) + tail) if head > 0 else shift + math.log(tail)

    # --- public quantities -------------------------------------------------

    def series_A(self, x):
        return _check_domain(self, x, self.coefficients.A)

    def phi(self, x):
        return _check_domain(self, x, self.coefficients.Phi)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > 0) & (x < self.rho)
        xi = np.where(inside, x, 1.0 if self.rho > 1 else self.rho / 2)
        out = np.where(inside, np.exp(self._log_kernel(xi) - self._log_mass[0]), 0.0)
        return out[()] if out.ndim == 0 else out

    def moment(self, k: int) -> float:
        """``mu_k = E Z^k``; orders beyond the cache are integrated on demand."""
        if k < 0:
            raise ValueError("moment order must be non-negative")
        if k not in self._log_mass:
            self._log_mass[k] = self._log_integral(k)
        return math.exp(self._log_mass[k] - self._log_mass[0])

    def total_mass(self) -> float:
        """``int u`` recomputed on an independent split; should equal 1."""
        split = 0.5 * self._split_point(0)
        upper = self._upper(0)
        shift = self._log_mass[0]
        head = self._head(0, split) * math.exp(-shift)
        return head + self._piece(0, split, upper, shift)

    def moments(self, k_max: int = MOMENT_CACHE) -> np.ndarray:
        return np.array([self.moment(k) for k in range(k_max + 1)])

    def cdf(self, x):
        """``P(Z <= x)`` by quadrature (scalar or array).

        Long arrays go through a cached panel table: each point adds one
        Gauss-Legendre panel to the tabulated mass below it.
        """
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        if xs.size <= BULK_CDF_SIZE:
            out = np.array([self._cdf_scalar(t) for t in xs])
        else:
            grid, mass = self._cdf_table
            inside = (xs > 0) & (xs < self.rho)
            xi = np.where(inside, xs, 0.0)
            idx = np.clip(np.searchsorted(grid, xi, side="right") - 1, 0, grid.size - 1)
            part = mass[idx] + _mass_between(self, grid[idx], np.maximum(xi, grid[idx]))
            out = np.where(inside, np.minimum(part, 1.0), np.where(xs <= 0, 0.0, 1.0))
        return out[0] if np.ndim(x) == 0 else out

    @cached_property
    def _cdf_table(self):
        grid = _refine_panels(self, _initial_grid(self))
        mass = np.concatenate([[0.0], np.cumsum(_mass_between(self, grid[:-1], grid[1:]))])
        return grid, mass

    def sf(self, x):
        """``P(Z >= x)`` by quadrature of the upper tail."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([self._sf_scalar(t) for t in xs])
        return out[0] if np.ndim(x) == 0 else out

    def _cdf_scalar(self, x: float) -> float:
        if x <= 0:
            return 0.0
        if x >= self.rho:
            return 1.0
        split = self._split_point(0)
        shift = self._log_mass[0]
        lo = min(x, split)
        value = self._head(0, lo) * math.exp(-shift)
        if x > split:
            value += self._piece(0, split, x, shift)
        return min(value, 1.0)

    def _sf_scalar(self, x: float) -> float:
        if x <= 0:
            return 1.0
        if x >= self.rho:
            return 0.0
        split = self._split_point(0)
        if x < split:
            return 1.0 - self._cdf_scalar(x)
        upper = max(self._upper(0), x)
        top = float(self._log_kernel(x))
        if isinstance(self.coefficients, Geometric):
            upper = self.rho
        else:
            while float(self._log_kernel(upper)) > top - TAIL_DROP:
                upper *= 1.5
        return self._piece(0, x, upper, self._log_mass[0])

    # --- sampling ------------------------------------------------------------

    @cached_property
    def _inverse_table(self):
        return _build_inverse_table(self)

    def quantile(self, u):
        """Tabulated inverse CDF (CDF error below ``1e-6``)."""
        interp, x_max = self._inverse_table
        u = np.asarray(u, dtype=float)
        return np.clip(interp(u), 0.0, x_max)

    def sample(self, size: int, seed, stream: int = 0, label: str | None = None) -> SampleBatch:
        return sample_ul(self, size, seed, stream, label)


def _check_domain(spec: ULSpec, x, fn):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(arr >= spec.rho):
        raise DomainError(f"x must lie in [0, {spec.rho})")
    out = fn(arr)
    return out[()] if np.ndim(out) == 0 else out


# --- inverse-CDF table -----------------------------------------------------

INVERSE_TOL = 1e-6
BULK_CDF_SIZE = 64
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _mass_between(spec: ULSpec, lo, hi) -> np.ndarray:
    """Vectorised ``P(lo < Z < hi)`` by 20-point Gauss-Legendre.

    Panels starting at the origin are mapped to ``t = x^v``, where the
    density becomes ``(c/v) exp(-v Phi(t^(1/v)))`` and stays bounded for
    every ``v``; all other panels are integrated in ``x``.
    """
    v = spec.v
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    at_zero = lo <= 0
    lo_t = np.where(at_zero, 0.0, lo)
    a = np.where(at_zero, 0.0, lo_t)
    b = np.where(at_zero, hi**v, hi)
    half = 0.5 * (b - a)
    node = a[..., None] + half[..., None] * (_GL_NODES + 1.0)
    x = np.where(at_zero[..., None], node ** (1.0 / v), node)
    if math.isfinite(spec.rho):
        x = np.minimum(x, spec.rho * (1 - 1e-16))
    x = np.maximum(x, np.finfo(float).tiny)
    jac = np.where(at_zero[..., None], 1.0 / v, x ** (v - 1.0))
    with np.errstate(over="ignore", under="ignore"):
        h = jac * np.exp(-v * spec.coefficients.Phi(x) - spec._log_mass[0])
    return half * (h @ _GL_WEIGHTS)


def _refine_panels(spec: ULSpec, xs: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    # bisect panels until one rule and its two-half version agree
    for _ in range(40):
        mid = 0.5 * (xs[:-1] + xs[1:])
        whole = _mass_between(spec, xs[:-1], xs[1:])
        halves = _mass_between(spec, xs[:-1], mid) + _mass_between(spec, mid, xs[1:])
        bad = np.abs(whole - halves) > tol
        if not bad.any():
            return xs
        xs = np.unique(np.concatenate([xs, mid[bad]]))
    raise QuadratureError("CDF panels did not converge")


def _initial_grid(spec: ULSpec) -> np.ndarray:
    split = spec._split_point(0)
    parts = [split * np.logspace(-10, 0, 41)]
    if math.isfinite(spec.rho):
        gap = spec.rho - split
        parts.append(np.linspace(split, spec.rho - gap / 64, 64))
        parts.append(spec.rho - gap * np.logspace(-13, -np.log10(64), 60))
    else:
        parts.append(np.linspace(split, spec._upper(0), 256))
    grid = np.unique(np.concatenate([[0.0], *parts]))
    return grid[grid < spec.rho] if math.isfinite(spec.rho) else grid


def _hermite_inverse(spec: ULSpec, kx: np.ndarray, kf: np.ndarray) -> CubicHermiteSpline:
    """Cubic Hermite inverse CDF using ``dx/dF = 1/u(x)``.

    Slopes are capped at three times the adjacent secants (the
    Fritsch-Carlson condition), which keeps the interpolant monotone where
    the exact slope is infinite or badly scaled.
    """
    secant = np.diff(kx) / np.diff(kf)
    with np.errstate(divide="ignore"):
        slope = 1.0 / spec.density(kx)
    cap = np.minimum(np.concatenate([secant, [np.inf]]), np.concatenate([[np.inf], secant]))
    slope = np.minimum(np.nan_to_num(slope, nan=np.inf, posinf=np.inf), 3.0 * cap)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        return CubicHermiteSpline(kf, kx, slope, extrapolate=True)


def _build_inverse_table(spec: ULSpec, tol: float = INVERSE_TOL, max_rounds: int = 40):
    """Monotone cubic Hermite interpolant of the inverse CDF.

    The CDF is tabulated on a graded grid; intervals whose interpolated
    inverse misses the true CDF by more than ``tol`` at interior probe points
    are bisected until none remain.
    """
    xs = _refine_panels(spec, _initial_grid(spec))
    probes = np.array([0.125, 0.375, 0.625, 0.875])
    for _ in range(max_rounds):
        fs = np.concatenate([[0.0], np.cumsum(_mass_between(spec, xs[:-1], xs[1:]))])
        total = fs[-1]
        if not math.isfinite(spec.rho) and abs(total - 1.0) > 1e-9:
            raise QuadratureError(f"tabulated CDF ends at {total!r}")
        keep = np.concatenate([[True], np.diff(fs) > 0])
        kx, kf = xs[keep], fs[keep]
        interp = _hermite_inverse(spec, kx, kf)
        fq = kf[:-1, None] + (kf[1:] - kf[:-1])[:, None] * probes
        xq = np.clip(interp(fq), kx[:-1, None], kx[1:, None])
        true = kf[:-1, None] + _mass_between(spec, np.broadcast_to(kx[:-1, None], xq.shape), xq)
        err = np.abs(true - fq).max(axis=1)
        # probes only sample each interval, so refine with a safety margin
        bad = np.nonzero(err > tol / 4)[0]
        if bad.size == 0:
            return interp, float(kx[-1])
        xs = _refine_panels(spec, np.unique(np.concatenate([xs, 0.5 * (kx[bad] + kx[bad + 1])])))
    raise QuadratureError("inverse-CDF table did not reach its tolerance")


def sample_ul(spec: ULSpec, size: int, seed, stream: int = 0, label: str | None = None) -> SampleBatch:
    """``size`` i.i.d. draws of ``Z ~ spec`` by tabulated inverse CDF."""
    if size < 1:
        raise ValueError("size must be positive")
    rng = numpy_rng(seed, 0x0C, stream)
    u = rng.random(size)
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    x = spec.quantile(u)
    x = np.maximum(x, np.finfo(float).tiny)
    return SampleBatch(x, int(seed), label or repr(spec), {"stream": stream})


# --- identities ------------------------------------------------------------


def series_A(spec: ULSpec, x):
    return spec.series_A(x)


def phi(spec: ULSpec, x):
    return spec.phi(x)


def normalizing_constant(spec: ULSpec) -> float:
    return spec.c


def density(spec: ULSpec, x):
    return spec.density(x)


def moment(spec: ULSpec, k: int) -> float:
    return spec.moment(k)


@dataclass(frozen=True)
class RecursionResidual:
    """``mu_k - v/(v+k) sum_{l<=L} a_l mu_{k+l}`` and the analytic series tail."""

    k: int
    truncation: int
    residual: float
    tail: float

    @property
    def corrected(self) -> float:
        return self.residual - self.tail


def moment_recursion_residual(spec: ULSpec, k: int, truncation: int | None = None) -> RecursionResidual:
    """Residual of ``mu_k = v/(v+k) sum_l a_l mu_{k+l}``.

    For finitely many coefficients the sum is exact and ``tail`` is zero.  For
    the geometric sequence the sum is cut at ``truncation`` and
    ``tail = v/(v+k) beta alpha^k E[Z^k (Z/alpha)^(L+1) / (1 - Z/alpha)]``
    is the omitted remainder, so ``corrected`` should vanish.
    """
    co = spec.coefficients
    v = spec.v
    if isinstance(co, Polynomial):
        L = len(co.a)
        terms = [co.a[l - 1] * spec.moment(k + l) for l in range(1, L + 1)]
        return RecursionResidual(k, L, spec.moment(k) - v / (v + k) * math.fsum(terms), 0.0)
    L = 60 if truncation is None else int(truncation)
    terms = [co.coefficient(l) * spec.moment(k + l) for l in range(1, L + 1)]
    # remainder sum_{l>L} a_l mu_{k+l} = beta alpha^-k int x^k y^(L+1)/(1-y) u(x) dx, y = x/alpha
    alpha, beta = co.alpha, co.beta
    vb = v * beta
    p = v - 1.0 + k + L + 1
    log_scale = -(k + L + 1) * math.log(alpha) - vb * math.log(alpha) + math.log(alpha) - spec._log_mass[0]

    def g(x):
        return math.exp(p * math.log(x) + log_scale)

    rem = integrate.quad(g, 0.0, alpha, weight="alg", wvar=(0.0, vb - 1.0), epsabs=0.0, epsrel=1e-12, limit=500)[0]
    tail = v / (v + k) * beta * alpha ** k * rem
    return RecursionResidual(k, L, spec.moment(k) - v / (v + k) * math.fsum(terms), tail)


# --- psi distribution ------------------------------------------------------


@dataclass(frozen=True)
class PsiDistribution:
    """``psi_k = a_k mu_k`` on the positive integers.

    ``probs[k-1] = psi_k`` for ``k <= len(probs)``; ``tail`` is the mass of
    larger indices (zero for finitely many coefficients).
    """

    probs: tuple[float, ...]
    tail: float = 0.0
    geometric: tuple[float, float] | None = field(default=None, compare=False)

    def total(self) -> float:
        return math.fsum(self.probs) + self.tail

    def as_dict(self) -> dict[int, float]:
        return {k + 1: p for k, p in enumerate(self.probs) if p > 0}

    def mean(self) -> float:
        if self.geometric is not None:
            v, beta = self.geometric
            # E K = beta E[B / (1-B)^2] with B ~ Beta(v, v beta + 1)
            return beta * math.exp(
                special.betaln(v + 1, v * beta - 1) - special.betaln(v, v * beta + 1)
            ) if v * beta > 1 else math.inf
        return math.fsum((k + 1) * p for k, p in enumerate(self.probs))

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        if self.geometric is not None:
            v, beta = self.geometric
            # K is mixed geometric: Y ~ Beta(v+1, v beta), K | Y ~ Geometric(1-Y) on {1,2,...}
            y = rng.beta(v + 1.0, v * beta, size)
            return rng.geometric(np.maximum(1.0 - y, 1e-300))
        p = np.asarray(self.probs)
        return 1 + rng.choice(len(p), size=size, p=p / p.sum())


def psi_from_ul(spec: ULSpec, terms: int = 200, tol: float = 1e-8) -> PsiDistribution:
    """``psi_k = a_k mu_k``; raises if the weights do not sum to one."""
    co = spec.coefficients
    if isinstance(co, Polynomial):
        probs = tuple(co.coefficient(k) * spec.moment(k) for k in range(1, len(co.a) + 1))
        psi = PsiDistribution(probs)
    else:
        # psi_k = beta E B^k with B = Z/alpha ~ Beta(v, v beta + 1): quadrature moments
        # are used for the leading terms and the remainder is beta E[B^(K+1)/(1-B)]
        lead = min(terms, MOMENT_CACHE)
        probs = tuple(co.coefficient(k) * spec.moment(k) for k in range(1, lead + 1))
        rest = moment_recursion_residual(spec, 0, lead).tail
        psi = PsiDistribution(probs, rest, (spec.v, co.beta))
    total = psi.total()
    if abs(total - 1.0) > tol:
        raise NormalizationError(f"psi sums to {total!r}")
    return psi


def scale_ul(spec: ULSpec, theta: float) -> ULSpec:
    """Law of ``theta Z``: coefficients ``a_k theta^(-k)``."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    if theta == 1:
        return spec
    return ULSpec(spec.v, spec.coefficients.scaled(theta))


@lru_cache(maxsize=64)
def power_bias_ul(spec: ULSpec, k: int) -> ULSpec:
    """Law of ``Z^(k)`` with density proportional to ``x^k u(x)``.

    This is again in the family: ``UL(v + k; (v/(v+k)) a)``.
    """
    if k < 0:
        raise ValueError("bias order must be non-negative")
    if k == 0:
        return spec
    return ULSpec(spec.v + k, spec.coefficients.multiplied(spec.v / (spec.v + k)))


def urn_limit_atoms(pi, tail: float = 1e-6) -> list[int]:
    """Atoms of ``pi``; infinite supports are cut once the remaining mass is below ``tail``."""
    try:
        return list(pi.support())
    except ValueError:
        pass
    atoms, mass, j = [], 0.0, 0
    while 1.0 - mass >= tail:
        p = float(pi.pmf(j))
        if p > 0:
            atoms.append(j)
        mass += p
        j += 1
        if j > 100_000:
            raise NormalizationError("inter-arrival tail too heavy to truncate")
    return atoms


def ul_from_urn_limit(b: int, w: int, pi, moments, tail: float = 1e-6) -> ULSpec:
    """Limit law ``UL(b+w-1; a_k = pi_{k-1} / m_k(1, b+w-1, pi))``.

    ``moments`` maps ``k`` to the limit moment of the urn started from one
    black and ``b+w-1`` white balls; it may be a dict or a sequence of
    moment estimates.  For infinitely supported ``pi`` the coefficients
    stop once the omitted gap mass is below ``tail``.
    """
    if hasattr(moments, "m"):
        table = {e.k: e.m_k for e in moments}
    elif isinstance(moments, dict):
        table = dict(moments)
    else:
        table = {k + 1: float(getattr(m, "m_k", m)) for k, m in enumerate(moments)}
    atoms = urn_limit_atoms(pi, tail)
    a = [0.0] * (max(atoms) + 1)
    for j in atoms:
        p = float(pi.pmf(j))
        if p <= 0:
            continue
        if j + 1 not in table:
            raise MissingMomentError(f"m_{j + 1} is needed for pi_{j} > 0")
        a[j] = p / table[j + 1]
    return ULSpec(b + w - 1, Polynomial(tuple(a)))


# --- moment and tail bounds ------------------------------------------------


def moment_upper_bound(spec: ULSpec, m: float, max_index: int = 200) -> float:
    """``inf_l (c/l) (v a_l / l)^(-(v+m)/l) Gamma((v+m)/l)`` over ``a_l > 0``."""
    co = spec.coefficients
    v = spec.v
    indices = co.support(max_index)
    best = math.inf
    for ell in indices:
        a = co.coefficient(ell)
        if a <= 0:
            continue
        s = (v + m) / ell
        log_b = math.log(spec.c / ell) - s * math.log(v * a / ell) + math.lgamma(s)
        best = min(best, math.exp(log_b))
    return best


@dataclass(frozen=True)
class MillsReport:
    alpha: float
    applicable: bool
    c_alpha: float
    max_ratio: float
    holds: bool
    grid: np.ndarray = field(repr=False)


def mills_check(spec: ULSpec, alpha: float, grid=None, points: int = 100, rtol: float = 1e-8) -> MillsReport:
    """Check ``P(Z >= x) <= C_alpha u(x)`` for ``x > alpha``, ``C_alpha = P(Z>=alpha)/u(alpha)``.

    The ratio ``P(Z >= x)/(C_alpha u(x))`` is reported; the check passes when
    it stays below ``1 + rtol``.  When ``alpha >= rho`` there is nothing to
    check and the report is marked not applicable.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if alpha >= spec.rho:
        return MillsReport(alpha, False, math.nan, math.nan, True, np.empty(0))
    c_alpha = float(spec.sf(alpha)) / float(spec.density(alpha))
    if grid is None:
        top = spec.rho if math.isfinite(spec.rho) else spec._upper(0)
        top = max(top, 2 * alpha)
        grid = np.linspace(alpha, top, points + 2)[1:-1]
    grid = np.asarray(grid, dtype=float)
    tails = spec.sf(grid)
    dens = spec.density(grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dens > 0, tails / (c_alpha * dens), np.where(tails > 0, np.inf, 0.0))
    max_ratio = float(np.max(ratio))
    return MillsReport(alpha, True, c_alpha, max_ratio, max_ratio <= 1 + rtol, grid)


def suite_specs() -> dict[str, ULSpec]:
    """Reference members used throughout the checks."""
    return {
        "exp": ULSpec(1, Polynomial((1.0,))),
        "gamma3": ULSpec(3, Polynomial((1.0,))),
        "halfgauss": ULSpec(1, Polynomial((0.0, 2.0))),
        "bernoulli": ULSpec(2, Polynomial((1.0, 1.0))),
        "geometric": ULSpec(1, Geometric(1.0, 1.0)),
    }
