"""Closed-form reference laws and the non-closure examples.

* Deterministic gaps ``tau = k``: the limit has density proportional to
  ``x^(w-1) exp(-w x^(k+1) / ((k+1) m_{k+1}))``, a power of a gamma variable.
* Gaps on ``{0, 1}``: the limit is ``UL(w; (a_1, a_2))`` and its moments and
  the matching ``pi_0`` are ratios of Kummer ``U`` functions.
* Geometric coefficients ``a_k = beta alpha^(-k)``: ``Z/alpha ~ Beta(w, w beta + 1)``
  and the matching gap law has a power-law tail.
* ``U Exp(1)`` and the erfc law: two natural laws outside the UL family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from .errors import InternalInconsistency
from .interarrival import PowerLaw
from .samples import SampleBatch
from .special_functions import kummer_u
from .stat_harness import ks_vs_cdf
from .streams import numpy_rng
from .ul_family import Geometric, Polynomial, ULSpec

# --- deterministic gaps --------------------------------------------------------


@dataclass(frozen=True)
class DeterministicLimit:
    """``Z = ((k+1) m_{k+1} G / w)^(1/(k+1))`` with ``G ~ Gamma(w/(k+1))``."""

    w: int
    k: int
    m: float
    spec: ULSpec = field(repr=False)

    @property
    def shape(self) -> float:
        return self.w / (self.k + 1)

    @property
    def scale(self) -> float:
        return (self.k + 1) * self.m / self.w

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return special.gammainc(self.shape, x ** (self.k + 1) / self.scale)

    def moment(self, j: float) -> float:
        p = self.k + 1
        return self.scale ** (j / p) * math.exp(math.lgamma(self.shape + j / p) - math.lgamma(self.shape))

    def sample(self, size: int, seed, stream: int = 0) -> SampleBatch:
        rng = numpy_rng(seed, 0xD1, stream)
        g = rng.standard_gamma(self.shape, size)
        x = np.maximum((self.scale * g) ** (1.0 / (self.k + 1)), np.finfo(float).tiny)
        return SampleBatch(x, int(seed), f"root-gamma(w={self.w}, k={self.k})")


def deterministic_limit(w: int, k: int, m_k_plus_1: float) -> DeterministicLimit:
    """Limit law for gaps fixed at ``k``: ``UL(w; a_{k+1} = 1/m_{k+1})``."""
    if w < 1 or k < 1 or not m_k_plus_1 > 0:
        raise ValueError("need w >= 1, k >= 1 and m_{k+1} > 0")
    a = [0.0] * k + [1.0 / m_k_plus_1]
    return DeterministicLimit(int(w), int(k), float(m_k_plus_1), ULSpec(w, Polynomial(tuple(a))))


# --- gaps on {0, 1} ------------------------------------------------------------


def _bernoulli_z(w, a1, a2):
    if not (a1 > 0 and a2 > 0 and w >= 1):
        raise ValueError("need w >= 1 and positive a1, a2")
    return w * a1 * a1 / (2.0 * a2)


def bernoulli_moments(w: int, a1: float, a2: float, check: bool = True, rtol: float = 1e-8) -> tuple[float, float]:
    """``(E Z, E Z^2)`` for ``Z ~ UL(w; (a1, a2))`` from Kummer ``U`` ratios.

    With ``z = w a1^2 / (2 a2)``:
    ``E Z = (w a1 / 2 a2) U(w/2+1, 3/2, z) / U(w/2, 1/2, z)`` and
    ``E Z^2 = ((1+w) / 2 a2) U(w/2+1, 1/2, z) / U(w/2, 1/2, z)``.
    When ``check`` is set both are compared with quadrature moments.
    """
    z = _bernoulli_z(w, a1, a2)
    base = kummer_u(w / 2, 0.5, z)
    ez = w * a1 / (2 * a2) * kummer_u(w / 2 + 1, 1.5, z) / base
    ez2 = (1 + w) / (2 * a2) * kummer_u(w / 2 + 1, 0.5, z) / base
    if check:
        spec = ULSpec(w, Polynomial((a1, a2)))
        for got, want in ((ez, spec.moment(1)), (ez2, spec.moment(2))):
            if abs(got - want) > rtol * abs(want):
                raise InternalInconsistency(f"Kummer moment {got!r} differs from quadrature {want!r}")
    return ez, ez2


def bernoulli_pi_from_a(w: int, a1: float, a2: float, rtol: float = 1e-8) -> tuple[float, float]:
    """Gap law ``(pi_0, pi_1)`` whose urn limit is ``UL(w; (a1, a2))`` up to scale.

    Both ``z U(w/2+1, 3/2, z) / U(w/2, 1/2, z)`` and
    ``U((w+1)/2, 1/2, z) / U((w+1)/2, 3/2, z)`` are evaluated; they must agree.
    """
    z = _bernoulli_z(w, a1, a2)
    middle = z * kummer_u(w / 2 + 1, 1.5, z) / kummer_u(w / 2, 0.5, z)
    right = kummer_u((w + 1) / 2, 0.5, z) / kummer_u((w + 1) / 2, 1.5, z)
    if abs(middle - right) > rtol:
        raise InternalInconsistency(f"pi_0 expressions disagree: {middle!r} vs {right!r}")
    return middle, 1.0 - middle


# --- power-law gaps ------------------------------------------------------------


@dataclass(frozen=True)
class PowerLawReference:
    """Reference objects for ``a_k = beta alpha^(-k)`` and ``v = w``."""

    alpha: float
    beta: float
    w: int

    @property
    def pi(self) -> PowerLaw:
        return PowerLaw(self.alpha, self.beta, self.w)

    @property
    def mu(self):
        return self.pi.mean()

    @property
    def beta_law(self):
        """Frozen scipy law of ``Z``: ``alpha Beta(w, w beta + 1)``."""
        return stats.beta(self.w, self.w * self.beta + 1.0, scale=self.alpha)

    @property
    def spec(self) -> ULSpec:
        return ULSpec(self.w, Geometric(self.alpha, self.beta))

    def pmf(self, j):
        return self.pi.pmf(j)

    def moment(self, j: float) -> float:
        """``E Z^j = alpha^j G(c+1) G(w+j) / (G(w) G(c+j+1))`` with ``c = w(beta+1)``."""
        c = self.w * (self.beta + 1.0)
        return self.alpha**j * math.exp(
            math.lgamma(c + 1) + math.lgamma(self.w + j) - math.lgamma(self.w) - math.lgamma(c + j + 1)
        )

    def sample(self, size: int, seed, stream: int = 0) -> SampleBatch:
        rng = numpy_rng(seed, 0xD2, stream)
        x = self.alpha * rng.beta(self.w, self.w * self.beta + 1.0, size)
        return SampleBatch(np.maximum(x, np.finfo(float).tiny), int(seed), f"power-law reference {self}")


def powerlaw_reference(alpha: float, beta: float, w: int) -> PowerLawReference:
    if not (alpha > 0 and beta > 0 and w >= 1):
        raise ValueError("need alpha, beta > 0 and w >= 1")
    return PowerLawReference(float(alpha), float(beta), int(w))


@dataclass(frozen=True)
class ExploratoryReport:
    """Scaled urn versus ``theta alpha Beta(w, w beta + 1)`` (EXPLORATORY)."""

    alpha: float
    beta: float
    w: int
    n: int
    paths: int
    theta: float
    ks: float
    p_value: float
    label: str = "EXPLORATORY"


def powerlaw_urn_experiment(alpha: float, beta: float, w: int, n: int, paths: int, seed) -> ExploratoryReport:
    """Compare ``X_n / n^(mu/(mu+1))`` from ``urnlaw(n, pi, 1, w)`` with the Beta law.

    The scale ``theta`` is not known in closed form; it is estimated as the
    ratio of the sample mean to ``E Z``.  The Beta identification is unproven,
    so the result is reported but never asserted.
    """
    from .urn_engine import UrnConfig, simulate_batch

    ref = powerlaw_reference(alpha, beta, w)
    batch = simulate_batch(UrnConfig(1, w, ref.pi, n), paths, seed)
    scaled = batch.scaled()
    theta = float(scaled.mean()) / ref.moment(1)
    law = ref.beta_law
    ks = ks_vs_cdf(scaled / theta, law.cdf)
    return ExploratoryReport(alpha, beta, w, n, paths, theta, ks.statistic, ks.p_value)


# --- laws outside the family -------------------------------------------------------


@dataclass(frozen=True)
class NonClosureReport:
    log_points: tuple[float, ...]
    density: tuple[float, ...]
    log_ratio: tuple[float, ...]
    log_ratio_within_5pct: tuple[bool, ...]
    euler_gap: tuple[float, ...]
    erfc_fourth: float
    erfc_exact: float
    erfc_matches: bool
    erfc_negative: bool


def uexp_density(x: float) -> float:
    """Density of ``U X`` with ``U`` uniform and ``X ~ Exp(1)``: ``int_0^1 e^(-x/u) du/u``."""
    # with u = x/s the integral becomes int_x^inf e^(-s)/s ds
    head = integrate.quad(lambda s: math.exp(-s) / s, x, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)[0] if x < 1 else 0.0
    tail = integrate.quad(lambda s: math.exp(-s) / s, max(x, 1.0), math.inf, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    return head + tail


def log_erfc_fourth_derivative(h: float = 1e-2) -> float:
    """``d^4/dx^4 (-log erfc x)`` at 0 by central differences and two Richardson levels."""
    f = lambda x: -math.log(special.erfc(x))

    def central(step):
        return (f(2 * step) - 4 * f(step) + 6 * f(0.0) - 4 * f(-step) + f(-2 * step)) / step**4

    d = [central(h / 2**i) for i in range(3)]
    # the stencil error is even in h: cancel the h^2 and then the h^4 terms
    first = [(4 * d[i + 1] - d[i]) / 3 for i in range(2)]
    return (16 * first[1] - first[0]) / 15


def non_closure_checks(points=(1e-2, 1e-3, 1e-4), tol: float = 1e-4) -> NonClosureReport:
    """Numerical evidence that ``U Exp(1)`` and the erfc law are not UL laws.

    The density of ``U Exp(1)`` is the exponential integral ``E_1(x)``, which
    diverges like ``-log x`` at zero, whereas UL densities behave like
    ``x^(v-1)``.  The law with density proportional to ``erfc(x)`` has a
    negative fourth derivative of ``-log erfc`` at zero, equal to
    ``32(3 - pi)/pi^2``; UL log-densities have non-negative Taylor
    coefficients beyond the logarithm.
    """
    dens = tuple(uexp_density(x) for x in points)
    ratio = tuple(d / -math.log(x) for d, x in zip(dens, points))
    within = tuple(0.95 <= r <= 1.05 for r in ratio)
    # E_1(x) + log x -> -gamma: the precise form of the logarithmic divergence
    gap = tuple(d + math.log(x) + np.euler_gamma for d, x in zip(dens, points))
    value = log_erfc_fourth_derivative()
    exact = 32 * (3 - math.pi) / math.pi**2
    return NonClosureReport(
        tuple(points), dens, ratio, within, gap, value, exact, abs(value - exact) < tol, value < 0
    )
