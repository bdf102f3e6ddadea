"""
Scalar special functions, integer helpers and branch-controlled complex powers.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.special
import sympy

from utils import DomainError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ArgRange:
    """Half-open range of length 2π for the argument of a complex number.

    ``closed_end`` names the included endpoint: 'upper' for (lower, upper],
    'lower' for [lower, upper).
    """

    lower: float
    upper: float
    closed_end: str = 'upper'

    def __post_init__(self):
        if abs((self.upper - self.lower) - TWO_PI) > 1e-12:
            raise DomainError(f"argument range must have length 2π, got {self.upper - self.lower}")
        if self.closed_end not in ('lower', 'upper'):
            raise DomainError(f"closed_end must be 'lower' or 'upper', got {self.closed_end!r}")

    def reduce(self, theta):
        """Shift angles (scalar or array) by multiples of 2π into the range."""
        theta = np.asarray(theta, dtype=float)
        if self.closed_end == 'upper':
            # (lower, upper]
            k = np.ceil((theta - self.upper) / TWO_PI)
            out = theta - k * TWO_PI
            out = np.where(out <= self.lower, out + TWO_PI, out)
        else:
            # [lower, upper)
            k = np.floor((theta - self.lower) / TWO_PI)
            out = theta - k * TWO_PI
            out = np.where(out >= self.upper, out - TWO_PI, out)
        return out


# Conventions: z in the upper half-plane uses (−π, π]; t in the lower
# half-plane uses [−π, π); the Eichler kernel (τ − t)^{r−2} uses (−π/2, 3π/2).
PRINCIPAL = ArgRange(-math.pi, math.pi, 'upper')
LOWER_PLANE = ArgRange(-math.pi, math.pi, 'lower')
EICHLER = ArgRange(-math.pi / 2, 3 * math.pi / 2, 'upper')


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def gamma_real(x: float) -> float:
    """Γ(x) for real x off the poles."""
    if _is_nonpositive_integer(x):
        raise DomainError(f"Gamma has a pole at {x}")
    # scipy's gamma is a Lanczos-type rational approximation with reflection
    return float(scipy.special.gamma(x))


def pochhammer(r: float, n: int) -> float:
    """Rising factorial (r)_n = r(r+1)...(r+n-1), multiplied left to right."""
    if n < 0:
        raise DomainError(f"pochhammer needs n >= 0, got {n}")
    result = 1.0
    for k in range(n):
        result *= r + k
    return result


def pochhammer_table(r: float, n_max: int) -> np.ndarray:
    """Array [(r)_0, ..., (r)_{n_max}] built by the same left-to-right products."""
    out = np.empty(n_max + 1)
    out[0] = 1.0
    for k in range(n_max):
        out[k + 1] = out[k] * (r + k)
    return out


def beta(a: float, b: float) -> float:
    """Euler beta function for positive arguments."""
    if not (a > 0 and b > 0):
        raise DomainError(f"beta needs a, b > 0, got ({a}, {b})")
    return float(scipy.special.beta(a, b))


def cpow(z, s: float, arg_range: ArgRange = PRINCIPAL):
    """z**s with arg z taken in ``arg_range``; accepts scalars or arrays."""
    z_arr = np.asarray(z, dtype=complex)
    zero = z_arr == 0
    if np.any(zero) and s <= 0:
        raise DomainError(f"0 ** {s} is undefined")
    safe = np.where(zero, 1.0, z_arr)
    theta = arg_range.reduce(np.angle(safe))
    out = np.exp(s * (np.log(np.abs(safe)) + 1j * theta))
    out = np.where(zero, 0.0, out)
    if np.ndim(z) == 0:
        return complex(out)
    return out


def sinc(x):
    """S(x) = sin(x)/x with S(0) = 1; Taylor form for |x| < 1e-4."""
    x_arr = np.asarray(x, dtype=float)
    small = np.abs(x_arr) < 1e-4
    x2 = x_arr * x_arr
    taylor = 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    with np.errstate(invalid='ignore', divide='ignore'):
        direct = np.sin(x_arr) / np.where(small, 1.0, x_arr)
    out = np.where(small, taylor, direct)
    if np.ndim(x) == 0:
        return float(out)
    return out


def sigma_div(k: int, n: int) -> int:
    """Divisor power sum σ_k(n), exact."""
    if n < 1:
        raise DomainError(f"sigma_div needs n >= 1, got {n}")
    return int(sympy.divisor_sigma(n, k))


def binom_real(r: float, m: int) -> float:
    """Generalized binomial r(r-1)...(r-m+1)/m!."""
    if m < 0:
        raise DomainError(f"binom_real needs m >= 0, got {m}")
    result = 1.0
    for k in range(m):
        result *= (r - k) / (k + 1)
    return result


def binom_real_table(r: float, n_max: int) -> np.ndarray:
    """Array [binom(r, 0), ..., binom(r, n_max)] by the same recurrence."""
    out = np.empty(n_max + 1)
    out[0] = 1.0
    for k in range(n_max):
        out[k + 1] = out[k] * (r - k) / (k + 1)
    return out
