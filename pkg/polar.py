"""
Series in the disk coordinate w = (z - i)/(z + i): the operators J_r and
sigma_r, the duality bracket [h, f]_r and the kernel expansions whose
bracket has the closed form (2i)^{2-r} (tau1 - conj(tau2))^{r-2}.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from config import NUMERICS_CONFIG
from quad import ContourPath, integrate_path
from special import PRINCIPAL, binom_real_table, cpow
from utils import DivergenceError, DomainError, PoleError

logger = logging.getLogger(__name__)


def disk_coordinate(z):
    """w = (z - i)/(z + i)."""
    z = np.asarray(z, dtype=complex) if np.ndim(z) else complex(z)
    return (z - 1j) / (z + 1j)


def from_disk(w):
    """Inverse of disk_coordinate: z = i (1 + w)/(1 - w)."""
    w = np.asarray(w, dtype=complex) if np.ndim(w) else complex(w)
    return 1j * (1.0 + w) / (1.0 - w)


@dataclass(frozen=True)
class PolarSeries:
    """Finite Laurent series sum_{n = n_min}^{n_max} c_n w^n."""

    n_min: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex, copy=True)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise DomainError("a polar series needs at least one coefficient")
        coeffs.setflags(write=False)
        object.__setattr__(self, 'coeffs', coeffs)
        object.__setattr__(self, 'n_min', int(self.n_min))

    @classmethod
    def monomial(cls, n: int, c: complex = 1.0) -> 'PolarSeries':
        return cls(n, np.array([c]))

    @classmethod
    def from_dict(cls, terms: dict) -> 'PolarSeries':
        lo, hi = min(terms), max(terms)
        coeffs = np.zeros(hi - lo + 1, dtype=complex)
        for n, c in terms.items():
            coeffs[n - lo] = c
        return cls(lo, coeffs)

    @property
    def n_max(self) -> int:
        return self.n_min + self.coeffs.size - 1

    @property
    def is_plus(self) -> bool:
        return self.n_min >= 0

    @property
    def is_minus(self) -> bool:
        return self.n_max <= 0

    def coefficient(self, n: int) -> complex:
        if self.n_min <= n <= self.n_max:
            return complex(self.coeffs[n - self.n_min])
        return 0j

    def as_dict(self) -> dict:
        return {self.n_min + k: complex(c) for k, c in enumerate(self.coeffs) if c != 0}

    def __add__(self, other: 'PolarSeries') -> 'PolarSeries':
        lo = min(self.n_min, other.n_min)
        hi = max(self.n_max, other.n_max)
        coeffs = np.zeros(hi - lo + 1, dtype=complex)
        coeffs[self.n_min - lo:self.n_max - lo + 1] += self.coeffs
        coeffs[other.n_min - lo:other.n_max - lo + 1] += other.coeffs
        return PolarSeries(lo, coeffs)

    def __mul__(self, scalar: complex) -> 'PolarSeries':
        return PolarSeries(self.n_min, self.coeffs * scalar)

    __rmul__ = __mul__


def evaluate_series(series: PolarSeries, w):
    """sum c_n w^n at w (scalar or array); w = 0 needs n_min >= 0."""
    w_arr = np.asarray(w, dtype=complex)
    if series.n_min < 0 and np.any(w_arr == 0):
        raise DomainError("negative powers of w are singular at w = 0")
    powers = np.arange(series.n_min, series.n_max + 1)
    values = np.power.outer(w_arr, powers) @ series.coeffs
    if np.ndim(w) == 0:
        return complex(values)
    return values


def _rising_over_factorial(r: float, k_max: int) -> np.ndarray:
    """g_k = (r)_k / k! for k = 0..k_max."""
    out = np.empty(k_max + 1)
    out[0] = 1.0
    for k in range(1, k_max + 1):
        out[k] = out[k - 1] * (r + k - 1) / k
    return out


def _is_nonpositive_integer(r: float) -> bool:
    return r <= 0 and float(r).is_integer()


def sigma_r_coeff(f_minus: PolarSeries, r: float) -> PolarSeries:
    """sigma_r on a minus-part series: c_n w^n -> (|n|!/(r)_{|n|}) c_n w^{n-1}."""
    if not f_minus.is_minus:
        raise DomainError(f"sigma_r acts on minus-part series, got n_max = {f_minus.n_max}")
    k = -np.arange(f_minus.n_min, f_minus.n_max + 1)
    g = _rising_over_factorial(r, int(k.max()))[k]
    poles = (g == 0) & (f_minus.coeffs != 0)
    if np.any(poles):
        bad = int(-k[poles][0])
        raise PoleError(f"(r)_{{|n|}} vanishes for r = {r} at n = {bad}")
    with np.errstate(divide='ignore', invalid='ignore'):
        coeffs = np.where(g == 0, 0.0, f_minus.coeffs / np.where(g == 0, 1.0, g))
    return PolarSeries(f_minus.n_min - 1, coeffs)


def j_r(series: PolarSeries, r: float) -> PolarSeries:
    """J_r: c_m w^m -> c_m (r)_{-m-1}/(-m-1)! w^{m+1} for m <= -1; m >= 0 is annihilated."""
    top = min(series.n_max, -1)
    if series.n_min > top:
        return PolarSeries.monomial(0, 0.0)
    m = np.arange(series.n_min, top + 1)
    g = _rising_over_factorial(r, int(-m.min() - 1))[-m - 1]
    coeffs = series.coeffs[:top - series.n_min + 1] * g
    return PolarSeries(series.n_min + 1, coeffs)


def bracket(h_plus: PolarSeries, f_minus: PolarSeries, r: float) -> complex:
    """[h, f]_r = sum_{n >= 0} (n!/(r)_n) c_n d_{-n}.

    c_n are the coefficients of h at w^n and d_{-n} those of f at w^{-n}.
    """
    if not h_plus.is_plus:
        raise DomainError(f"first argument must be a plus-part series, got n_min = {h_plus.n_min}")
    if not f_minus.is_minus:
        raise DomainError(f"second argument must be a minus-part series, got n_max = {f_minus.n_max}")
    n_top = min(h_plus.n_max, -f_minus.n_min)
    if n_top < h_plus.n_min:
        return 0j
    n = np.arange(h_plus.n_min, n_top + 1)
    c = h_plus.coeffs[n - h_plus.n_min]
    d = f_minus.coeffs[-n - f_minus.n_min]
    g = _rising_over_factorial(r, n_top)[n]
    products = c * d
    if np.any((g == 0) & (products != 0)):
        raise PoleError(f"(r)_n vanishes for r = {r} on the common support")
    terms = np.where(g == 0, 0.0, products / np.where(g == 0, 1.0, g))
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


def bracket_tail_estimate(h_plus: PolarSeries, f_minus: PolarSeries, r: float) -> float:
    """Geometric estimate of the terms dropped by truncating both series.

    Uses the ratio of the last two paired terms; returns inf when the terms
    are not decreasing.
    """
    n_top = min(h_plus.n_max, -f_minus.n_min)
    if n_top - h_plus.n_min < 1:
        return math.inf
    g = _rising_over_factorial(r, n_top)
    last = abs(h_plus.coefficient(n_top) * f_minus.coefficient(-n_top) / g[n_top])
    prev = abs(h_plus.coefficient(n_top - 1) * f_minus.coefficient(1 - n_top) / g[n_top - 1])
    if prev == 0:
        return 0.0 if last == 0 else math.inf
    ratio = last / prev
    if ratio >= 1:
        return math.inf
    return last * ratio / (1.0 - ratio)


def kernel_truncation(u_max: float, tol: float, margin: int = 20) -> int:
    """Series length N with u_max^N below tol, plus a margin."""
    if not 0 <= u_max < 1:
        raise DomainError(f"|u| must lie in [0, 1), got {u_max}")
    if u_max == 0:
        return margin
    return int(math.ceil(math.log(tol) / math.log(u_max))) + margin


def eichler_kernel_minus_expansion(tau1: complex, r: float, N: int) -> PolarSeries:
    """Minus-part expansion (1-u1)^{2-r} sum_m binom(r-2, m)(-u1)^m w^{-m}."""
    u1 = disk_coordinate(tau1)
    if abs(u1) >= 1:
        raise DomainError(f"tau1 = {tau1} is not in the upper half-plane")
    prefactor = cpow(1.0 - u1, 2.0 - r, PRINCIPAL)
    m = np.arange(N + 1)
    coeffs = prefactor * binom_real_table(r - 2.0, N) * (-u1) ** m
    return PolarSeries(-N, coeffs[::-1])


def knopp_kernel_plus_expansion(tau2: complex, r: float, N: int) -> PolarSeries:
    """Plus-part expansion (1-conj(u2))^{2-r} sum_n binom(r-2, n)(-conj(u2))^n w^n."""
    u2 = disk_coordinate(tau2)
    if abs(u2) >= 1:
        raise DomainError(f"tau2 = {tau2} is not in the upper half-plane")
    u2_bar = u2.conjugate()
    prefactor = cpow(1.0 - u2_bar, 2.0 - r, PRINCIPAL)
    n = np.arange(N + 1)
    return PolarSeries(0, prefactor * binom_real_table(r - 2.0, N) * (-u2_bar) ** n)


def bracket_closed_form(tau1: complex, tau2: complex, r: float) -> complex:
    """(2i)^{2-r} (tau1 - conj(tau2))^{r-2}, principal branches."""
    return cpow(2j, 2.0 - r, PRINCIPAL) * cpow(tau1 - complex(tau2).conjugate(), r - 2.0, PRINCIPAL)


def _hypergeometric_11r(r: float, X: np.ndarray) -> np.ndarray:
    """2F1(1, 1; r; X) = sum_k k!/(r)_k X^k on |X| <= the configured ratio limit."""
    x_max = float(np.max(np.abs(X)))
    K = 64
    while True:
        g = _rising_over_factorial(r, K)
        if np.any(g == 0):
            raise PoleError(f"2F1(1, 1; {r}; .) is undefined for r in the non-positive integers")
        if x_max == 0 or abs(x_max ** K / g[K]) < 1e-18 or K >= 1 << 16:
            break
        K *= 2
    inv = 1.0 / g
    out = np.zeros_like(X, dtype=complex)
    for k in range(K, -1, -1):
        out = out * X + inv[k]
    return out


BoundaryFunction = Union[PolarSeries, Callable[[np.ndarray], np.ndarray]]


def sigma_r_contour(f_minus: BoundaryFunction, r: float, z: complex, c: float,
                    tol: float = 1e-12) -> complex:
    """sigma_r f^-(z) by its contour integral.

    The contour is the circle |w(tau)| = c, a Euclidean circle in the upper
    half-plane around i. ``f_minus`` is either a PolarSeries or a vectorized
    function of tau; z must satisfy |w(z)| > c.
    """
    if not 0 < c < 1:
        raise DomainError(f"contour radius must lie in (0, 1), got {c}")
    w_z = disk_coordinate(z)
    ratio = c / abs(w_z)
    limit = NUMERICS_CONFIG['series_ratio_limit']
    if ratio > limit:
        logger.error(f"series ratio {ratio:.4f} exceeds {limit} on |w| = {c} for z = {z}")
        raise DivergenceError(f"hypergeometric ratio {ratio:.4f} exceeds {limit} on the contour")

    if isinstance(f_minus, PolarSeries):
        series = f_minus

        def f_minus(tau):
            return evaluate_series(series, disk_coordinate(tau))

    center = 1j * (1.0 + c * c) / (1.0 - c * c)
    radius = 2.0 * c / (1.0 - c * c)
    contour = ContourPath.circular_arc(center, radius, 0.0, 2.0 * math.pi)

    def integrand(tau):
        X = disk_coordinate(tau) / w_z
        return np.asarray(f_minus(tau), dtype=complex) * _hypergeometric_11r(r, X) / (tau * tau + 1.0)

    return integrate_path(integrand, contour, tol) / (math.pi * w_z)
