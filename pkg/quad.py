"""
Quadrature engines: Gauss-Legendre and Gauss-Jacobi rules, an adaptive
Gauss-Kronrod (7, 15) driver for contour paths, truncated vertical rays and
the 2D integral over the standard fundamental domain.

Integrands passed to the drivers must be vectorized: they receive numpy
arrays of points and return arrays of the same shape.
"""

import heapq
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.special
from numpy.polynomial.legendre import leggauss

from config import NUMERICS_CONFIG
from utils import DecayViolationError, DomainError, NonConvergenceError

logger = logging.getLogger(__name__)

# Kronrod 15-point nodes and weights, Gauss 7-point weights (QUADPACK qk15)
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])


def _mirror(half: np.ndarray, sign: float) -> np.ndarray:
    return np.concatenate([sign * half[:-1], half[-1:], sign * half[:-1][::-1]])


_GK_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[:-1][::-1]])
_GK_WEIGHTS = _mirror(_WGK, 1.0)
_G_HALF = np.zeros(8)
_G_HALF[1::2] = _WG
_G_WEIGHTS = _mirror(_G_HALF, 1.0)

Integrand = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights on ``domain``; (alpha, beta) set for Jacobi-type rules."""

    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    domain: Tuple[float, float] = (-1.0, 1.0)
    alpha: Optional[float] = None
    beta: Optional[float] = None

    def __post_init__(self):
        if len(self.nodes) < 1 or len(self.nodes) != len(self.weights):
            raise DomainError("a quadrature rule needs matching non-empty nodes and weights")

    @property
    def n(self) -> int:
        return len(self.nodes)

    def integrate(self, f: Integrand):
        return np.dot(self.weights, f(self.nodes))


def gauss_legendre(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1]."""
    limit = NUMERICS_CONFIG['max_rule_nodes']
    if not 1 <= n <= limit:
        raise DomainError(f"Gauss-Legendre size must lie in [1, {limit}], got {n}")
    nodes, weights = leggauss(n)
    return QuadratureRule(nodes, weights, (-1.0, 1.0))


@lru_cache(maxsize=256)
def _jacobi_unit(n: int, alpha: float, beta: float) -> Tuple[np.ndarray, np.ndarray]:
    # scipy's rule is for (1-x)^alpha (1+x)^beta on [-1, 1]; u = (1+x)/2
    x, w = scipy.special.roots_jacobi(n, alpha, beta)
    u = 0.5 * (1.0 + x)
    w = w / 2.0 ** (alpha + beta + 1.0)
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def gauss_jacobi(n: int, alpha: float, beta: float) -> QuadratureRule:
    """n-point rule on [0, 1] for the weight u^beta (1-u)^alpha."""
    if alpha <= -1 or beta <= -1:
        raise DomainError(f"Jacobi parameters must exceed -1, got alpha={alpha}, beta={beta}")
    limit = NUMERICS_CONFIG['jacobi_max_nodes']
    if not 1 <= n <= limit:
        raise DomainError(f"Gauss-Jacobi size must lie in [1, {limit}], got {n}")
    u, w = _jacobi_unit(int(n), float(alpha), float(beta))
    return QuadratureRule(u, w, (0.0, 1.0), alpha=alpha, beta=beta)


def graded_jacobi_rule(n: int, alpha: float, beta: float, h: float) -> QuadratureRule:
    """Composite rule on [0, 1] for u^beta (1-u)^alpha, graded towards u = 0.

    First panel [0, h] carries the u^beta singularity, dyadic Legendre panels
    cover [h, 1/2] and the last panel [1/2, 1] carries (1-u)^alpha.
    """
    if not 0 < h:
        raise DomainError(f"first panel width must be positive, got {h}")
    if h >= 0.5:
        return gauss_jacobi(n, alpha, beta)

    nodes, weights = [], []

    s, ws = _jacobi_unit(n, 0.0, float(beta))
    u = h * s
    nodes.append(u)
    weights.append(h ** (beta + 1.0) * ws * (1.0 - u) ** alpha)

    x, wx = leggauss(n)
    a = h
    while a < 0.5:
        b = min(2.0 * a, 0.5)
        u = 0.5 * (a + b) + 0.5 * (b - a) * x
        nodes.append(u)
        weights.append(0.5 * (b - a) * wx * u ** beta * (1.0 - u) ** alpha)
        a = b

    s, ws = _jacobi_unit(n, float(alpha), 0.0)
    u = 0.5 + 0.5 * s
    nodes.append(u)
    weights.append(2.0 ** (-alpha - 1.0) * ws * u ** beta)

    return QuadratureRule(np.concatenate(nodes), np.concatenate(weights), (0.0, 1.0),
                          alpha=alpha, beta=beta)


def _gk15(f: Integrand, a: float, b: float) -> Tuple[complex, float]:
    center = 0.5 * (a + b)
    half = 0.5 * (b - a)
    values = np.asarray(f(center + half * _GK_NODES), dtype=complex)
    kronrod = half * np.dot(_GK_WEIGHTS, values)
    gauss = half * np.dot(_G_WEIGHTS, values)
    return complex(kronrod), float(abs(kronrod - gauss))


def _csum(values) -> complex:
    values = list(values)
    return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))


def adaptive_gk(f: Integrand, a: float, b: float, tol: float,
                panel_budget: Optional[int] = None, initial_panels: int = 2) -> Tuple[complex, float]:
    """Globally adaptive G7/K15 on [a, b] to absolute error ``tol``.

    Returns (value, error estimate); raises NonConvergenceError when the
    panel budget runs out or the worst panel can no longer be bisected.
    """
    if panel_budget is None:
        panel_budget = NUMERICS_CONFIG['panel_budget']
    if a == b:
        return 0j, 0.0

    edges = np.linspace(a, b, initial_panels + 1)
    heap = []
    total_err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        value, err = _gk15(f, lo, hi)
        heapq.heappush(heap, (-err, lo, hi, value))
        total_err += err

    panels = len(heap)
    while total_err > tol:
        if panels >= panel_budget:
            estimate = _csum(item[3] for item in heap)
            logger.error(f"panel budget {panel_budget} exhausted on [{a}, {b}]: error {total_err:.3e} > {tol:.3e}")
            raise NonConvergenceError(
                f"adaptive quadrature did not reach {tol:.3e} within {panel_budget} panels",
                estimate, total_err)
        neg_err, lo, hi, worst = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            estimate = _csum([worst] + [item[3] for item in heap])
            logger.error(f"panel [{lo}, {hi}] cannot be split further: error {total_err:.3e} > {tol:.3e}")
            raise NonConvergenceError(
                f"adaptive quadrature did not reach {tol:.3e}: panel [{lo}, {hi}] is at machine resolution",
                estimate, total_err)
        total_err += neg_err
        for sub_lo, sub_hi in ((lo, mid), (mid, hi)):
            value, err = _gk15(f, sub_lo, sub_hi)
            heapq.heappush(heap, (-err, sub_lo, sub_hi, value))
            total_err += err
        panels += 1

    total_err = math.fsum(-item[0] for item in heap)
    return _csum(item[3] for item in heap), total_err


@dataclass(frozen=True)
class ContourPath:
    """Oriented path in the plane, parametrized by t in [0, 1].

    Geometry is stored once; ``orientation`` is +1 or -1 so that reversing a
    path negates integrals exactly.
    """

    kind: str
    start: complex = 0j
    end: complex = 0j
    center: complex = 0j
    radius: float = 0.0
    theta0: float = 0.0
    theta1: float = 0.0
    orientation: int = 1

    @classmethod
    def segment(cls, start: complex, end: complex) -> 'ContourPath':
        if start == end:
            raise DomainError("segment endpoints must be distinct")
        return cls('segment', start=complex(start), end=complex(end))

    @classmethod
    def circular_arc(cls, center: complex, radius: float, theta0: float, theta1: float) -> 'ContourPath':
        if radius <= 0:
            raise DomainError(f"arc radius must be positive, got {radius}")
        if theta0 == theta1:
            raise DomainError("arc angle range is empty")
        return cls('circular_arc', center=complex(center), radius=float(radius),
                   theta0=float(theta0), theta1=float(theta1))

    @classmethod
    def vertical_ray(cls, x0: float, y0: float, y_top: float) -> 'ContourPath':
        """Upward segment x0 + iy, y from y0 to the truncation height y_top."""
        if not y_top > y0:
            raise DomainError(f"truncation height {y_top} must exceed the base height {y0}")
        return cls('vertical_ray', start=complex(x0, y0), end=complex(x0, y_top))

    @classmethod
    def unit_arc(cls) -> 'ContourPath':
        """The geodesic from rho - 1 to rho along |z| = 1."""
        return cls.circular_arc(0j, 1.0, 2.0 * math.pi / 3.0, math.pi / 3.0)

    def reversed(self) -> 'ContourPath':
        return ContourPath(self.kind, self.start, self.end, self.center, self.radius,
                           self.theta0, self.theta1, -self.orientation)

    def point(self, t):
        if self.kind == 'circular_arc':
            theta = self.theta0 + t * (self.theta1 - self.theta0)
            return self.center + self.radius * np.exp(1j * theta)
        return self.start + t * (self.end - self.start)

    def derivative(self, t):
        if self.kind == 'circular_arc':
            dtheta = self.theta1 - self.theta0
            theta = self.theta0 + t * dtheta
            return 1j * self.radius * dtheta * np.exp(1j * theta)
        return (self.end - self.start) * np.ones_like(t, dtype=complex)

    @property
    def initial_point(self) -> complex:
        return complex(self.point(0.0 if self.orientation > 0 else 1.0))

    @property
    def final_point(self) -> complex:
        return complex(self.point(1.0 if self.orientation > 0 else 0.0))

    def split(self, t: float) -> Tuple['ContourPath', 'ContourPath']:
        """Two pieces meeting at parameter t, in the direction of travel."""
        if not 0 < t < 1:
            raise DomainError(f"split parameter must lie in (0, 1), got {t}")
        if self.kind == 'circular_arc':
            mid = self.theta0 + t * (self.theta1 - self.theta0)
            first = ContourPath.circular_arc(self.center, self.radius, self.theta0, mid)
            second = ContourPath.circular_arc(self.center, self.radius, mid, self.theta1)
        else:
            mid = complex(self.point(t))
            first = ContourPath(self.kind, start=self.start, end=mid)
            second = ContourPath(self.kind, start=mid, end=self.end)
        if self.orientation < 0:
            return second.reversed(), first.reversed()
        return first, second


def integrate_path(f: Integrand, path: ContourPath, tol: float,
                   panel_budget: Optional[int] = None) -> complex:
    """Contour integral of f(z) dz along ``path`` to absolute error ``tol``."""
    def pulled_back(t):
        return np.asarray(f(path.point(t)), dtype=complex) * path.derivative(t)

    value, err = adaptive_gk(pulled_back, 0.0, 1.0, tol, panel_budget)
    logger.debug(f"{path.kind} integral: {value} (error {err:.2e})")
    return path.orientation * value


def integrate_vertical_ray(f: Integrand, x0: float, y0: float, decay_rate: float, tol: float) -> complex:
    """Integral of f(z) dz along x0 + iy, y from y0 to infinity.

    The envelope C e^{-decay_rate y} is fitted from samples (safety factor
    applied), the ray is truncated where the remaining mass is below tol/2
    and the rest is integrated adaptively to tol/2.
    """
    if decay_rate <= 0:
        raise DomainError(f"decay rate must be positive, got {decay_rate}")

    n_samples = NUMERICS_CONFIG['ray_samples']
    safety = NUMERICS_CONFIG['tail_safety']
    y_samples = y0 + np.arange(n_samples) / decay_rate
    magnitudes = np.abs(np.asarray(f(x0 + 1j * y_samples), dtype=complex))
    C = safety * float(np.max(magnitudes * np.exp(decay_rate * (y_samples - y0))))
    if C == 0.0:
        return 0j

    # envelope measured relative to y0: |f| <= C e^{-rate (y - y0)}
    Y = max(y0 + 1.0 / decay_rate, y0 + math.log(2.0 * C / (decay_rate * tol)) / decay_rate)
    for y_check in (Y, 2.0 * Y - y0):
        value = abs(complex(np.asarray(f(np.array([x0 + 1j * y_check])))[0]))
        envelope = C * math.exp(-decay_rate * (y_check - y0))
        if value > envelope:
            logger.error(f"decay violation at y={y_check}: |f|={value:.3e} > envelope {envelope:.3e}")
            raise DecayViolationError(
                f"|f| = {value:.3e} exceeds C e^(-{decay_rate:.4g} y) = {envelope:.3e} at y = {y_check:.4g}")

    logger.debug(f"vertical ray at x={x0} truncated at Y={Y:.4g} (C={C:.3e})")
    return integrate_path(f, ContourPath.vertical_ray(x0, y0, Y), tol / 2.0)


PlaneIntegrand = Callable[[np.ndarray, np.ndarray], np.ndarray]


def integrate_fundamental_domain(g: PlaneIntegrand, tol: float, y_max: Optional[float] = None) -> complex:
    """Integral of g(x, y) dx dy over {|x| <= 1/2, x^2 + y^2 >= 1}.

    Without ``y_max`` the inner variable is compactified,
    y = sqrt(1 - x^2) + s/(1 - s) with s in [0, 1); g must decay at least
    like y^-2. With ``y_max`` the domain is cut at that height.
    """
    def inner(x: float) -> complex:
        y_low = math.sqrt(1.0 - x * x)
        if y_max is not None:
            def along_y(y):
                return g(np.full_like(y, x), y)
            value, _ = adaptive_gk(along_y, y_low, y_max, tol / 2.0)
            return value

        def compact(s):
            y = y_low + s / (1.0 - s)
            return np.asarray(g(np.full_like(s, x), y), dtype=complex) / (1.0 - s) ** 2
        value, _ = adaptive_gk(compact, 0.0, 1.0, tol / 2.0)
        return value

    def outer(xs: np.ndarray) -> np.ndarray:
        return np.array([inner(float(x)) for x in xs], dtype=complex)

    value, err = adaptive_gk(outer, -0.5, 0.5, tol / 2.0)
    logger.info(f"fundamental-domain integral {value} (outer error {err:.2e})")
    return value


def fundamental_domain_area(tol: float = 1e-10) -> float:
    """Hyperbolic area of the standard fundamental domain (pi/3)."""
    return integrate_fundamental_domain(lambda x, y: y ** -2.0, tol).real
