"""
Eichler and Knopp cocycles, the cup-product representative, cocycle residuals
and coinvariants of the polynomial module.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import comb

from config import NUMERICS_CONFIG, RUN_LIMITS
from forms import MultiplierSystem, QExpansion, tail_bound
from quad import ContourPath, integrate_path, integrate_vertical_ray
from special import EICHLER, LOWER_PLANE, cpow
from utils import (DecayViolationError, DomainError, InsufficientTruncationError,
                   ThresholdAmbiguityError)

logger = logging.getLogger(__name__)

CUSP = 'oo'
RHO = complex(0.5, math.sqrt(3.0) / 2.0)

Endpoint = Union[complex, str]


def is_cusp(z: Endpoint) -> bool:
    if isinstance(z, str):
        if z != CUSP:
            raise DomainError(f"unknown endpoint {z!r}; use a complex number or {CUSP!r}")
        return True
    return math.isinf(abs(complex(z)))


def _check_truncation(f: QExpansion, y_min: float, tol: float):
    bound = tail_bound(f, y_min)
    if bound > tol:
        logger.error(f"q-expansion with M={f.M} too short at height {y_min:.4g}: tail {bound:.3e}")
        raise InsufficientTruncationError(
            f"tail bound {bound:.3e} exceeds {tol:.3e} at Im tau = {y_min:.4g}", bound)


def _kernel_integrand(f: QExpansion, t: complex):
    exponent = f.weight - 2.0

    def integrand(tau):
        return f(tau) * cpow(tau - t, exponent, EICHLER)
    return integrand


def eichler_integral(f: QExpansion, z1: Endpoint, z2: Endpoint, t: complex, tol: float = 1e-10,
                     path: Optional[ContourPath] = None) -> complex:
    """c_f(z1, z2; t) = integral of f(tau) (tau - t)^{r-2} dtau, arg(tau - t) in (-pi/2, 3pi/2).

    Finite endpoints are joined by ``path`` (default the straight segment);
    the cusp is reached along the vertical ray above the finite endpoint.
    """
    t = complex(t)
    if t.imag >= 0:
        raise DomainError(f"t must lie in the lower half-plane, got {t}")
    cusp1, cusp2 = is_cusp(z1), is_cusp(z2)
    if cusp1 and cusp2:
        return 0j
    if cusp1 or cusp2:
        if not f.is_cuspidal:
            logger.error(f"cusp endpoint requested for a non-cuspidal expansion (leading exponent {f.leading_exponent})")
            raise DecayViolationError("an endpoint at the cusp needs a cusp form")
        base = complex(z2 if cusp1 else z1)
        _check_truncation(f, base.imag, tol)
        rate = 2.0 * math.pi * f.leading_exponent
        if f.weight > 2.0:
            # leave room for the polynomial growth of (tau - t)^{r-2}
            rate *= 0.9
        value = integrate_vertical_ray(_kernel_integrand(f, t), base.real, base.imag, rate, tol)
        return -value if cusp1 else value

    z1, z2 = complex(z1), complex(z2)
    if z1 == z2 and path is None:
        return 0j
    if path is None:
        path = ContourPath.segment(z1, z2)
    elif abs(path.initial_point - z1) > 1e-12 or abs(path.final_point - z2) > 1e-12:
        raise DomainError(f"path runs from {path.initial_point} to {path.final_point}, not from {z1} to {z2}")
    y_min = float(np.min(np.imag(path.point(np.linspace(0.0, 1.0, 65)))))
    if y_min <= 0:
        raise DomainError("integration path leaves the upper half-plane")
    _check_truncation(f, y_min, tol)
    return integrate_path(_kernel_integrand(f, t), path, tol)


def knopp_integral(f: QExpansion, z1: Endpoint, z2: Endpoint, z: complex, tol: float = 1e-10,
                   path: Optional[ContourPath] = None) -> complex:
    """Knopp cocycle: integral of conj(f(tau)) (conj(tau) - z)^{r-2} dconj(tau), via conjugation."""
    z = complex(z)
    if z.imag <= 0:
        raise DomainError(f"z must lie in the upper half-plane, got {z}")
    return eichler_integral(f, z1, z2, z.conjugate(), tol, path).conjugate()


@dataclass(frozen=True)
class CocycleValue:
    """c_f(z1, z2; .) as a function on the lower half-plane."""

    form: QExpansion
    z1: Endpoint
    z2: Endpoint
    tol: float = 1e-10
    path: Optional[ContourPath] = None

    def __post_init__(self):
        if (is_cusp(self.z1) or is_cusp(self.z2)) and not self.form.is_cuspidal:
            raise DecayViolationError("an endpoint at the cusp needs a cusp form")

    @property
    def weight(self) -> float:
        return self.form.weight

    def __call__(self, t: complex) -> complex:
        return eichler_integral(self.form, self.z1, self.z2, t, self.tol, self.path)

    def knopp(self, z: complex) -> complex:
        return knopp_integral(self.form, self.z1, self.z2, z, self.tol, self.path)


def cup_representative(f1: QExpansion, f2: QExpansion, t: complex, tol: float = 1e-10) -> complex:
    """c_{f1}(rho - 1, rho; t) c_{f2}(i, oo; t); the first factor along the unit arc."""
    if not f2.is_cuspidal:
        raise DomainError("the second form of the cup product must be a cusp form")
    first = eichler_integral(f1, RHO - 1.0, RHO, t, tol, ContourPath.unit_arc())
    if first == 0:
        return 0j
    return first * eichler_integral(f2, 1j, CUSP, t, tol)


def cup_representative_series(f1: QExpansion, f2: QExpansion, ts: Sequence[complex],
                              tol: float = 1e-10) -> np.ndarray:
    """cup_representative at each t in ``ts``."""
    return np.array([cup_representative(f1, f2, t, tol) for t in ts], dtype=complex)


def equivariance_residual(f: QExpansion, v: MultiplierSystem, g: str, z1: Endpoint, z2: Endpoint,
                          t: complex, tol: float = 1e-10) -> float:
    """|c_f(g^-1 z1, g^-1 z2; t) - v(g)^-1 (ct + d)^{r-2} c_f(z1, z2; g t)| for g in {S, T}."""
    t = complex(t)
    if g == 'T':
        def inverse(z):
            return z if is_cusp(z) else complex(z) - 1.0
        g_t = t + 1.0
        factor = 1.0 / v.v_T
    elif g == 'S':
        if is_cusp(z1) or is_cusp(z2):
            raise DomainError("S moves the cusp to 0; use finite endpoints")

        def inverse(z):
            return -1.0 / complex(z)
        g_t = -1.0 / t
        factor = cpow(t, f.weight - 2.0, LOWER_PLANE) / v.v_S
    else:
        raise DomainError(f"generator must be 'S' or 'T', got {g!r}")

    lhs = eichler_integral(f, inverse(z1), inverse(z2), t, tol)
    rhs = factor * eichler_integral(f, z1, z2, g_t, tol)
    return abs(lhs - rhs)


def cocycle_additivity_residual(f: QExpansion, z1: Endpoint, z2: Endpoint, z3: Endpoint,
                                t: complex, tol: float = 1e-10) -> float:
    """|c_f(z1, z3) - c_f(z1, z2) - c_f(z2, z3)| at t."""
    whole = eichler_integral(f, z1, z3, t, tol)
    parts = eichler_integral(f, z1, z2, t, tol) + eichler_integral(f, z2, z3, t, tol)
    return abs(whole - parts)


def eichler_polynomial_check(f: QExpansion, z1: Endpoint, z2: Endpoint,
                             points: Optional[Sequence[complex]] = None, tol: float = 1e-12) -> float:
    """Relative error of predicting c_f(z1, z2; t) at an extra point from a degree r - 2 fit on r points.

    For integral weight r >= 2 the cocycle is a polynomial of degree <= r - 2
    in t, so the prediction is exact up to quadrature error.
    """
    r = f.weight
    if not (float(r).is_integer() and r >= 2):
        raise DomainError(f"the polynomial check needs integral weight >= 2, got {r}")
    n = int(r) + 1
    if points is None:
        k = np.arange(n)
        points = 0.5 * np.cos(2 * math.pi * k / n) - 1j * (1.5 + 0.5 * np.sin(2 * math.pi * k / n))
    points = np.asarray(points, dtype=complex)
    if points.size < n:
        raise DomainError(f"need {n} points for weight {r}, got {points.size}")
    values = np.array([eichler_integral(f, z1, z2, t, tol) for t in points[:n]])
    # complex Vandermonde fit of degree r - 2; t lies off the real axis
    vander = np.vander(points[:n - 1], int(r) - 1)
    coeffs, *_ = np.linalg.lstsq(vander, values[:n - 1], rcond=None)
    predicted = complex(np.polyval(coeffs, points[n - 1]))
    actual = values[n - 1]
    residual = abs(predicted - actual) / max(1.0, abs(actual))
    logger.info(f"polynomial check for weight {r}: residual {residual:.3e}")
    return residual


@dataclass(frozen=True)
class PolyModule:
    """Polynomials of degree <= r - 2 with the weight 2 - r action of S and T."""

    r: int
    p: int

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 2:
            raise DomainError(f"polynomial module needs integral r >= 2, got {self.r}")
        if (self.p - self.r) % 2 != 0:
            raise DomainError(f"p = {self.p} does not match r = {self.r} mod 2")

    @property
    def dimension(self) -> int:
        return self.r - 1

    @property
    def multiplier(self) -> MultiplierSystem:
        return MultiplierSystem(float(self.p))

    def matrix(self, generator: str) -> np.ndarray:
        """Matrix on the monomials t^0..t^{r-2}; column k is the image of t^k."""
        d = self.dimension
        v = self.multiplier
        k = np.arange(d)
        if generator == 'T':
            # t^k -> v(T) (t + 1)^k
            binomials = comb(k[None, :], k[:, None], exact=False)
            return v.v_T * binomials.astype(complex)
        if generator == 'S':
            # t^k -> v(S)^-1 t^{r-2} (-1/t)^k = v(S)^-1 (-1)^k t^{r-2-k}
            m = np.zeros((d, d), dtype=complex)
            m[d - 1 - k, k] = (-1.0) ** k / v.v_S
            return m
        raise DomainError(f"generator must be 'S' or 'T', got {generator!r}")

    def act(self, generator: str, coeffs: Sequence[complex]) -> np.ndarray:
        return self.matrix(generator) @ np.asarray(coeffs, dtype=complex)


@dataclass(frozen=True)
class CoinvariantReport:
    r: int
    p: int
    dim: int
    rank: int
    margin: float


@lru_cache(maxsize=None)
def poly_coinvariant_report(r: int, p: int) -> CoinvariantReport:
    """Coinvariant dimension with the distance of the spectrum from the rank threshold."""
    if not RUN_LIMITS['rmax'][0] <= r <= RUN_LIMITS['rmax'][1]:
        raise DomainError(f"r must lie in [2, 40], got {r}")
    module = PolyModule(r, p % 12)
    identity = np.eye(module.dimension)
    stacked = np.hstack([identity - module.matrix('S'), identity - module.matrix('T')])
    singular = np.linalg.svd(stacked, compute_uv=False)
    if singular[0] == 0.0:
        return CoinvariantReport(r, p, module.dimension, 0, math.inf)

    threshold = NUMERICS_CONFIG['svd_threshold'] * singular[0]
    margin_required = NUMERICS_CONFIG['svd_margin']
    ratios = np.where(singular > 0, singular / threshold, 0.0)
    logs = np.abs(np.log10(np.where(ratios > 0, ratios, 1e-300)))
    margin = float(10.0 ** np.min(logs))
    if margin < margin_required:
        logger.error(f"singular values of the (r={r}, p={p}) coinvariant matrix within {margin:.3g} of the threshold")
        raise ThresholdAmbiguityError(
            f"singular value within a factor {margin:.3g} of the rank threshold for r={r}, p={p}")
    rank = int(np.sum(singular > threshold))
    return CoinvariantReport(r, p, module.dimension - rank, rank, margin)


def poly_coinvariant_dim(r: int, p: int) -> int:
    """dim V - rank[(I - M_S) | (I - M_T)] on polynomials of degree <= r - 2."""
    return poly_coinvariant_report(r, p).dim


def valid_parameters(r: int):
    """Residues p mod 12 with p = r mod 2."""
    return [p for p in range(12) if (p - r) % 2 == 0]
