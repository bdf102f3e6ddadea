"""
q-expansions of eta powers, E4 and their products; multiplier systems v[p].

A QExpansion of weight r and eta parameter p represents
f(z) = sum_m a(m) exp(2 pi i (m + p/12) z).
"""

import cmath
import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import List, NamedTuple, Sequence, Tuple, Union

import numpy as np
import sympy

from config import NUMERICS_CONFIG
from special import PRINCIPAL, cpow, sigma_div
from utils import DomainError, InsufficientTruncationError

logger = logging.getLogger(__name__)

R_SYMBOL = sympy.Symbol('r')


def _is_integral(x: float, eps: float = 1e-12) -> bool:
    return abs(x - round(x)) <= eps


@dataclass(frozen=True)
class MultiplierSystem:
    """Multiplier system v[p] of eta^{2p}; only p mod 12 matters for its values."""

    p: float

    def suits_weight(self, r: float) -> bool:
        diff = (self.p - r) % 2.0
        return min(diff, 2.0 - diff) <= 1e-12

    @property
    def v_T(self) -> complex:
        return cmath.exp(1j * math.pi * self.p / 6.0)

    @property
    def v_S(self) -> complex:
        return cmath.exp(-1j * math.pi * self.p / 2.0)

    @property
    def is_character(self) -> bool:
        """Integral p gives integral weight, where v[p] is a character of SL2(Z)."""
        return _is_integral(self.p)


_TOKEN = re.compile(r'\s*([TS])(\^-1)?\s*')


def parse_word(word: Union[str, Sequence[str]]) -> List[str]:
    """Split 'ST^-1T' (or a token list) into tokens from {T, T^-1, S, S^-1}."""
    if not isinstance(word, str):
        tokens = [t.strip() for t in word]
        for t in tokens:
            if t not in ('T', 'T^-1', 'S', 'S^-1'):
                raise DomainError(f"unknown generator {t!r}")
        return tokens
    tokens = []
    pos = 0
    while pos < len(word):
        match = _TOKEN.match(word, pos)
        if not match:
            raise DomainError(f"cannot parse generator word {word!r} at position {pos}")
        tokens.append(match.group(1) + (match.group(2) or ''))
        pos = match.end()
    return tokens


def _free_reduce(tokens: List[str]) -> List[str]:
    stack: List[str] = []
    for t in tokens:
        if stack and stack[-1][0] == t[0] and (stack[-1] + t).count('^-1') == 1 and len(stack[-1]) != len(t):
            stack.pop()
        else:
            stack.append(t)
    return stack


def _accepted_normal_form(tokens: List[str]) -> bool:
    """Tⁿ, S, S², S³ (S⁻¹ counts as S³) and S·Tⁿ."""
    if all(t[0] == 'T' for t in tokens):
        return True
    if tokens == ['S^-1']:
        return True
    if all(t == 'S' for t in tokens):
        return 1 <= len(tokens) <= 3
    return tokens[0] == 'S' and all(t[0] == 'T' for t in tokens[1:])


def multiplier_value(v: MultiplierSystem, word: Union[str, Sequence[str]]) -> complex:
    """Value of v on a word over {T, T^-1, S, S^-1}.

    Non-integral p only admits the normal forms Tⁿ, S, S², S³, S·Tⁿ: the
    consistency factors of real-weight multiplier systems make the product
    of generator values meaningless on general words.
    """
    tokens = parse_word(word)
    limit = NUMERICS_CONFIG['max_word_length']
    if len(tokens) > limit:
        raise DomainError(f"word length {len(tokens)} exceeds bound {limit}")
    reduced = _free_reduce(tokens)
    if not v.is_character and not _accepted_normal_form(reduced):
        raise DomainError(f"word {word!r} rejected for non-integral p = {v.p}")

    values = {'T': v.v_T, 'T^-1': 1.0 / v.v_T, 'S': v.v_S, 'S^-1': v.v_S ** 3}
    result = 1.0 + 0j
    for t in reduced:
        result *= values[t]
    return result


@dataclass(frozen=True)
class EtaPolynomial:
    """p_m(r) with exact rational coefficients, ascending in r."""

    m: int
    coefficients: Tuple[sympy.Rational, ...]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def leading_coefficient(self) -> sympy.Rational:
        return self.coefficients[-1]

    def as_poly(self) -> sympy.Poly:
        return sympy.Poly(list(reversed(self.coefficients)), R_SYMBOL, domain='QQ')

    def __call__(self, r):
        """Exact rational value for rational input; for a float, the exact value rounded once."""
        if isinstance(r, (int, Fraction, sympy.Rational)):
            value = sympy.Integer(0)
            for c in reversed(self.coefficients):
                value = value * sympy.Rational(r) + c
            return value
        x = Fraction(float(r))
        value = Fraction(0)
        for c in reversed(self.coefficients):
            value = value * x + Fraction(int(c.p), int(c.q))
        return float(value)


@lru_cache(maxsize=None)
def _eta_polys(m_max: int) -> Tuple[sympy.Poly, ...]:
    # m p_m(r) = -2r sum_{k=1}^m sigma_1(k) p_{m-k}(r)
    polys = [sympy.Poly(1, R_SYMBOL, domain='QQ')]
    r_poly = sympy.Poly(R_SYMBOL, R_SYMBOL, domain='QQ')
    for m in range(1, m_max + 1):
        acc = sympy.Poly(0, R_SYMBOL, domain='QQ')
        for k in range(1, m + 1):
            acc += polys[m - k] * sigma_div(1, k)
        polys.append((acc * r_poly) * sympy.Rational(-2, m))
    return tuple(polys)


def eta_power_poly(m: int) -> EtaPolynomial:
    """The polynomial p_m with eta^{2r} = sum_m p_m(r) q^{m + r/12}."""
    if m < 0:
        raise DomainError(f"eta_power_poly needs m >= 0, got {m}")
    poly = _eta_polys(m)[m]
    coeffs = tuple(sympy.Rational(c) for c in reversed(poly.all_coeffs()))
    return EtaPolynomial(m=m, coefficients=coeffs)


def _eta_power_exact(r, M: int) -> List[Fraction]:
    """Exact p_0(r)..p_M(r) for rational r = N/D, in integer arithmetic.

    Q_m = m! D^m p_m(r) is an integer with
    Q_m = -2N sum_k sigma_1(k) (m-1)!/(m-k)! D^{k-1} Q_{m-k}.
    """
    ratio = Fraction(r)
    N, D = ratio.numerator, ratio.denominator
    sigma = [0] + [sigma_div(1, k) for k in range(1, M + 1)]
    Q = [1]
    for m in range(1, M + 1):
        acc = 0
        falling = 1  # (m-1)!/(m-k)!
        for k in range(1, m + 1):
            if k > 1:
                falling *= m - k + 1
            acc += sigma[k] * falling * D ** (k - 1) * Q[m - k]
        Q.append(-2 * N * acc)
    return [Fraction(Q[m], math.factorial(m) * D ** m) for m in range(M + 1)]


def eta_power_coeffs(r: float, M: int) -> np.ndarray:
    """Values p_0(r)..p_M(r) as binary64, rounded once from the exact recurrence."""
    if M < 0:
        raise DomainError(f"truncation M must be >= 0, got {M}")
    exact = _eta_power_exact(r, M)
    return np.array([q.numerator / q.denominator for q in exact], dtype=float)


@dataclass(frozen=True)
class QExpansion:
    """Truncated Fourier expansion sum_{m=0}^{M} a(m) e^{2 pi i (m + p/12) z}."""

    weight: float
    p: float
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.array(self.coeffs, copy=True)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise DomainError("a q-expansion needs at least one coefficient")
        if coeffs.dtype != object and not np.all(np.isfinite(coeffs)):
            raise DomainError("q-expansion coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, 'coeffs', coeffs)

    @property
    def M(self) -> int:
        return self.coeffs.size - 1

    @property
    def mu(self) -> np.ndarray:
        """Exponent offsets (12m + p)/12."""
        return (12.0 * np.arange(self.M + 1) + self.p) / 12.0

    @property
    def is_exact(self) -> bool:
        return self.coeffs.dtype == object

    @property
    def numeric_coeffs(self) -> np.ndarray:
        if self.is_exact:
            return np.array([float(c) for c in self.coeffs], dtype=float)
        return self.coeffs

    @property
    def multiplier(self) -> MultiplierSystem:
        return MultiplierSystem(self.p)

    @property
    def leading_exponent(self) -> float:
        """Smallest exponent with a non-zero coefficient (inf for the zero form)."""
        nz = np.nonzero(self.numeric_coeffs)[0]
        return float(self.mu[nz[0]]) if nz.size else math.inf

    @property
    def is_cuspidal(self) -> bool:
        return self.leading_exponent > 0

    def is_zero(self) -> bool:
        return not np.any(self.numeric_coeffs)

    def scaled(self, factor: float) -> 'QExpansion':
        return QExpansion(self.weight, self.p, self.numeric_coeffs * factor)

    def truncated(self, M: int) -> 'QExpansion':
        return QExpansion(self.weight, self.p, self.coeffs[:M + 1])

    def __add__(self, other: 'QExpansion') -> 'QExpansion':
        if abs(self.weight - other.weight) > 1e-12 or abs(self.p - other.p) > 1e-12:
            raise DomainError("only expansions of equal weight and eta parameter can be added")
        M = min(self.M, other.M)
        return QExpansion(self.weight, self.p, self.numeric_coeffs[:M + 1] + other.numeric_coeffs[:M + 1])

    def __call__(self, tau):
        """Truncated sum at tau (scalar or array), without a tail check."""
        tau_arr = np.asarray(tau, dtype=complex)
        phases = np.exp(2j * math.pi * np.multiply.outer(tau_arr, self.mu))
        values = phases @ self.numeric_coeffs
        if np.ndim(tau) == 0:
            return complex(values)
        return values


def e4_expansion(M: int) -> QExpansion:
    """Normalized Eisenstein series E4 = 1 + 240 sum sigma_3(n) q^n."""
    if M < 0:
        raise DomainError(f"truncation M must be >= 0, got {M}")
    coeffs = [1.0] + [240.0 * sigma_div(3, n) for n in range(1, M + 1)]
    return QExpansion(weight=4.0, p=0.0, coeffs=np.array(coeffs))


def eta_power_expansion(r: float, M: int, exact: bool = False) -> QExpansion:
    """eta^{2r}: weight r, eta parameter p = r (offsets use r as given).

    With ``exact=True`` the coefficients are sympy Rationals (r converted
    exactly from its binary value).
    """
    if M < 0:
        raise DomainError(f"truncation M must be >= 0, got {M}")
    if exact:
        values = _eta_power_exact(r, M)
        coeffs = np.empty(M + 1, dtype=object)
        for m, q in enumerate(values):
            coeffs[m] = sympy.Rational(q.numerator, q.denominator)
        return QExpansion(weight=float(r), p=float(r), coeffs=coeffs)
    return QExpansion(weight=float(r), p=float(r), coeffs=eta_power_coeffs(r, M))


def qexp_mul(f: QExpansion, g: QExpansion, M: int) -> QExpansion:
    """Product f g truncated at order M (Cauchy convolution)."""
    if M < 0:
        raise DomainError(f"truncation M must be >= 0, got {M}")
    if f.is_exact and g.is_exact:
        a, b = f.coeffs, g.coeffs
    else:
        a, b = f.numeric_coeffs, g.numeric_coeffs
    M_eff = min(M, f.M, g.M)
    conv = np.convolve(a[:M_eff + 1], b[:M_eff + 1])[:M_eff + 1]
    return QExpansion(weight=f.weight + g.weight, p=f.p + g.p, coeffs=conv)


class Evaluation(NamedTuple):
    value: Union[complex, np.ndarray]
    error: float


def coefficient_growth(coeffs: np.ndarray) -> Tuple[float, float]:
    """Envelope (largest |a| in the last quarter) and per-step growth ratio (>= 1)."""
    a = np.abs(np.asarray(coeffs, dtype=float))
    M = a.size - 1
    tail_start = max(0, M - max(1, (M + 1) // 4))
    envelope = float(np.max(a[tail_start:]))
    span = M - tail_start
    growth = 1.0
    if span > 0 and a[tail_start] > 0 and a[M] > 0:
        growth = max(1.0, (a[M] / a[tail_start]) ** (1.0 / span))
    return envelope, growth


def tail_bound(f: QExpansion, y_min: float) -> float:
    """Bound for sum_{m > M} |a(m)| e^{-2 pi mu(m) y} at heights y >= y_min.

    The coefficients beyond M are modelled from the last quarter of the
    stored ones: envelope A (largest |a|) and growth ratio g, inflated by
    the safety factor.
    """
    envelope, growth = coefficient_growth(f.numeric_coeffs)
    if envelope == 0.0:
        return 0.0
    M = f.M
    q = math.exp(-2.0 * math.pi * y_min)
    gq = growth * q
    if gq >= 1.0:
        return math.inf
    safety = NUMERICS_CONFIG['tail_safety']
    head = math.exp(-2.0 * math.pi * float(f.mu[M]) * y_min)
    return safety * envelope * head * gq / (1.0 - gq)


def evaluate(f: QExpansion, tau, tail_tol: float = 1e-10) -> Evaluation:
    """Truncated sum at tau with the tail bound at the lowest point of tau."""
    tau_arr = np.asarray(tau, dtype=complex)
    y_min = float(np.min(tau_arr.imag))
    if y_min <= 0:
        raise DomainError(f"evaluation point must lie in the upper half-plane, Im = {y_min}")
    bound = tail_bound(f, y_min)
    if bound > tail_tol:
        logger.error(f"truncation M={f.M} insufficient at y={y_min}: tail bound {bound:.3e} > {tail_tol:.3e}")
        raise InsufficientTruncationError(
            f"tail bound {bound:.3e} exceeds {tail_tol:.3e} at Im tau = {y_min}", bound)
    return Evaluation(f(tau), bound)


def coefficient_table(f: QExpansion) -> List[Tuple[int, float, float]]:
    """Rows (m, mu, a) for a coefficient dump."""
    coeffs = f.numeric_coeffs
    return [(m, float(mu), float(coeffs[m])) for m, mu in enumerate(f.mu)]


def eta_function(tau):
    """Dedekind eta via Euler's pentagonal series."""
    tau_arr = np.asarray(tau, dtype=complex)
    y_min = float(np.min(tau_arr.imag))
    if y_min <= 0:
        raise DomainError("eta needs Im tau > 0")
    # q^{n(3n-1)/2} below 1e-18 once n(3n-1)/2 * 2 pi y > 42
    n_max = int(math.sqrt(2.0 * 42.0 / (3.0 * 2.0 * math.pi * y_min))) + 2
    n = np.arange(-n_max, n_max + 1)
    exponents = n * (3 * n - 1) / 2.0
    signs = np.where(n % 2 == 0, 1.0, -1.0)
    series = np.exp(2j * math.pi * np.multiply.outer(tau_arr, exponents)) @ signs
    values = np.exp(1j * math.pi * tau_arr / 12.0) * series
    if np.ndim(tau) == 0:
        return complex(values)
    return values


def modular_residual(f: QExpansion, generator: str, tau: complex) -> float:
    """|f(g tau) - v(g) (c tau + d)^r f(tau)| for g in {S, T}."""
    v = f.multiplier
    if generator == 'T':
        return abs(f(tau + 1) - v.v_T * f(tau))
    if generator == 'S':
        automorphy = cpow(tau, f.weight, PRINCIPAL)
        return abs(f(-1.0 / tau) - v.v_S * automorphy * f(tau))
    raise DomainError(f"generator must be 'S' or 'T', got {generator!r}")
