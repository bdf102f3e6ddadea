"""
The trilinear form T(f1, f2, f3) attached to the cup product: Psi kernel,
Fourier triple sum, direct nested quadrature, table normalization and the
Haberland identity.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config import NUMERICS_CONFIG, RUN_CONFIG
from forms import (QExpansion, coefficient_growth, e4_expansion, eta_power_expansion,
                   qexp_mul, tail_bound)
from quad import (ContourPath, gauss_jacobi, graded_jacobi_rule, integrate_fundamental_domain,
                  integrate_path, integrate_vertical_ray)
from special import PRINCIPAL, beta, cpow, gamma_real, sinc
from utils import (DomainError, InsufficientTruncationError, ModcupError,
                   NonConvergenceError)

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class WeightTriple:
    """Weights r1 + r2 + r3 = 4 and eta parameters p1 + p2 + p3 = 0, p_j = r_j mod 2."""

    r1: float
    r2: float
    r3: float
    p1: float
    p2: float
    p3: float

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise DomainError(f"invalid weight triple {self}: {'; '.join(problems)}")

    @classmethod
    def for_table(cls, r1: float, r2: float) -> 'WeightTriple':
        """Weights of eta^{2 r1}, eta^{2 r2}, E4 eta^{-2(r1 + r2)}."""
        return cls(r1, r2, 4.0 - r1 - r2, r1, r2, -(r1 + r2))

    def violations(self) -> List[str]:
        problems = []
        if abs(self.r1 + self.r2 + self.r3 - 4.0) > 1e-12:
            problems.append("r1 + r2 + r3 != 4")
        if abs(self.p1 + self.p2 + self.p3) > 1e-12:
            problems.append("p1 + p2 + p3 != 0")
        for j, (r, p) in enumerate(((self.r1, self.p1), (self.r2, self.p2), (self.r3, self.p3)), 1):
            diff = (p - r) % 2.0
            if min(diff, 2.0 - diff) > 1e-12:
                problems.append(f"p{j} != r{j} mod 2")
        if not self.r1 < 2:
            problems.append("r1 must be < 2")
        if not 0 < self.r2 < 2:
            problems.append("r2 must lie in (0, 2)")
        if not self.r3 > 0:
            problems.append("r3 must be > 0")
        return problems

    @property
    def alpha(self) -> float:
        """Jacobi exponent of (1 - u)."""
        return 1.0 - self.r1

    @property
    def beta(self) -> float:
        """Jacobi exponent of u."""
        return 1.0 - self.r2

    def series_prefactor(self) -> complex:
        """(-2i)^{r3} / B(2 - r1, 2 - r2)."""
        return cpow(-2j, self.r3, PRINCIPAL) / beta(2.0 - self.r1, 2.0 - self.r2)

    def integral_prefactor(self) -> complex:
        """(-2i)^{r3} Gamma(r3) / (Gamma(2 - r1) Gamma(2 - r2))."""
        return (cpow(-2j, self.r3, PRINCIPAL) * gamma_real(self.r3)
                / (gamma_real(2.0 - self.r1) * gamma_real(2.0 - self.r2)))


@dataclass(frozen=True)
class TripleFormResult:
    value: complex
    tail_estimate: float
    M1: int
    M2: int
    M3: int
    nodes: int
    quadrature_change: float = 0.0
    bare_sum: float = field(default=0.0, repr=False)

    def __post_init__(self):
        if not math.isfinite(abs(self.value)):
            raise NonConvergenceError("triple form value is not finite", self.value)
        if self.tail_estimate < 0:
            raise DomainError("tail estimate must be non-negative")


# Psi kernel


def _psi_tilde_grid(r1: float, r2: float, mu1, mu2, mu3, n: int) -> np.ndarray:
    """e^{-2 pi mu2 - pi sqrt3 (mu1 + mu3)} times the u-integral, by n-point Gauss-Jacobi.

    mu1, mu2, mu3 broadcast against each other.
    """
    rule = gauss_jacobi(n, 1.0 - r1, 1.0 - r2)
    u = rule.nodes
    mu1, mu2, mu3 = (np.asarray(m, dtype=float)[..., None] for m in np.broadcast_arrays(mu1, mu2, mu3))
    smooth = (np.exp(-math.pi * (2.0 - SQRT3) * mu3 * u) / (mu2 + mu3 * u)
              * sinc(math.pi * (mu1 + (1.0 - u) * mu3)))
    integral = smooth @ rule.weights
    prefactor = np.exp(-2.0 * math.pi * mu2[..., 0] - math.pi * SQRT3 * (mu1[..., 0] + mu3[..., 0]))
    return prefactor * integral


def check_psi_domain(r1: float, r2: float, mu2: float, mu3: float):
    if not r1 < 2 or not 0 < r2 < 2:
        raise DomainError(f"Psi needs r1 < 2 and 0 < r2 < 2, got ({r1}, {r2})")
    if not mu2 > 0:
        raise DomainError(f"Psi needs mu2 > 0, got {mu2}")
    if not mu2 + min(mu3, 0.0) > 0:
        raise DomainError(f"Psi needs mu2 + mu3 > 0, got mu2={mu2}, mu3={mu3}")


def psi_tilde_with_error(r1: float, r2: float, mu1: float, mu2: float, mu3: float,
                         tol: float = 1e-12) -> Tuple[float, float]:
    """psi_tilde and the change of its last node doubling (0 for the closed form at mu3 = 0)."""
    check_psi_domain(r1, r2, mu2, mu3)
    if mu3 == 0:
        return (math.exp(-2.0 * math.pi * mu2 - math.pi * SQRT3 * mu1)
                * beta(2.0 - r2, 2.0 - r1) * sinc(math.pi * mu1) / mu2), 0.0

    n = NUMERICS_CONFIG['jacobi_start_nodes']
    limit = NUMERICS_CONFIG['jacobi_max_nodes']
    value = float(_psi_tilde_grid(r1, r2, mu1, mu2, mu3, n))
    while 2 * n <= limit:
        n *= 2
        refined = float(_psi_tilde_grid(r1, r2, mu1, mu2, mu3, n))
        change = abs(refined - value)
        if change <= tol:
            return refined, change
        value = refined
    logger.warning(f"Psi node doubling reached {limit} nodes at mu=({mu1}, {mu2}, {mu3})")
    raise NonConvergenceError(f"Psi integral not converged with {limit} Jacobi nodes", value)


def psi_tilde(r1: float, r2: float, mu1: float, mu2: float, mu3: float, tol: float = 1e-12) -> float:
    """The exponential factor times the u-integral, without the 2 pi i normalization."""
    return psi_tilde_with_error(r1, r2, mu1, mu2, mu3, tol)[0]


def psi_kernel(r1: float, r2: float, mu1: float, mu2: float, mu3: float, tol: float = 1e-12) -> complex:
    """Contribution of one Fourier-term triple: i psi_tilde / (2 pi)."""
    return 1j * psi_tilde(r1, r2, mu1, mu2, mu3, tol) / (2.0 * math.pi)


# Fourier triple sum


def _grid_blocks(wt: WeightTriple, a: Sequence[np.ndarray], mu: Sequence[np.ndarray], n: int,
                 threads: int) -> List[np.ndarray]:
    a1, a2, a3 = a
    mu1, mu2, mu3 = mu
    outer = np.outer(a2, a3)

    def block(m1: int) -> np.ndarray:
        if a1[m1] == 0:
            return np.zeros_like(outer)
        psi = _psi_tilde_grid(wt.r1, wt.r2, mu1[m1], mu2[:, None], mu3[None, :], n)
        return a1[m1] * outer * psi

    if threads <= 1:
        return [block(m1) for m1 in range(len(a1))]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(block, range(len(a1))))


def _fsum_blocks(blocks: List[np.ndarray]) -> float:
    return math.fsum(math.fsum(b.ravel()) for b in blocks)


def _truncation_tail(blocks: List[np.ndarray], coeffs: Sequence[np.ndarray]) -> float:
    stacked = np.abs(np.stack(blocks))
    safety = NUMERICS_CONFIG['tail_safety']
    per_step = (math.exp(-math.pi * SQRT3), math.exp(-2.0 * math.pi), math.exp(-math.pi * SQRT3))
    total = 0.0
    for axis, (c, q) in enumerate(zip(coeffs, per_step)):
        shell = float(np.sum(np.take(stacked, -1, axis=axis)))
        if shell == 0.0:
            continue
        _, growth = coefficient_growth(c)
        gq = growth * q
        if gq >= 1.0:
            return math.inf
        total += safety * shell * gq / (1.0 - gq)
    return total


def _bare_triple_sum(wt: WeightTriple, f1: QExpansion, f2: QExpansion, f3: QExpansion,
                     tol: float, threads: Optional[int]) -> TripleFormResult:
    if not f2.is_cuspidal:
        raise DomainError("the second form must be a cusp form")
    if threads is None:
        threads = RUN_CONFIG['threads']
    a = [f.numeric_coeffs for f in (f1, f2, f3)]
    mu = [f.mu for f in (f1, f2, f3)]
    check_psi_domain(wt.r1, wt.r2, float(mu[1][0]), float(np.min(mu[2])))

    n = NUMERICS_CONFIG['jacobi_start_nodes']
    limit = NUMERICS_CONFIG['jacobi_max_nodes']
    blocks = _grid_blocks(wt, a, mu, n, threads)
    change = math.inf
    while True:
        if 2 * n > limit:
            logger.error(f"triple sum not converged at {n} Jacobi nodes (change {change:.3e})")
            raise NonConvergenceError(f"triple sum not converged with {n} Jacobi nodes",
                                      _fsum_blocks(blocks), change)
        n *= 2
        refined = _grid_blocks(wt, a, mu, n, threads)
        change = math.fsum(float(np.sum(np.abs(r - b))) for r, b in zip(refined, blocks))
        blocks = refined
        logger.debug(f"triple sum with {n} nodes: change {change:.3e}")
        if change <= tol:
            break

    tail = _truncation_tail(blocks, a)
    if tail > tol:
        logger.error(f"truncation (M1, M2, M3) = ({f1.M}, {f2.M}, {f3.M}) leaves tail {tail:.3e} > {tol:.3e}")
        raise InsufficientTruncationError(f"triple-sum tail estimate {tail:.3e} exceeds {tol:.3e}", tail)

    total = _fsum_blocks(blocks)
    return TripleFormResult(total, tail, f1.M, f2.M, f3.M, n, change, total)


def triple_form_series(wt: WeightTriple, f1: QExpansion, f2: QExpansion, f3: QExpansion,
                       tol: float = 1e-10, threads: Optional[int] = None) -> TripleFormResult:
    """T(f1, f2, f3) = (-2i)^{r3}/B(2 - r1, 2 - r2) sum a1 a2 a3 Psi(mu1, mu2, mu3)."""
    bare = _bare_triple_sum(wt, f1, f2, f3, tol, threads)
    scale = wt.series_prefactor() * 1j / (2.0 * math.pi)
    logger.info(f"series T at (r1, r2) = ({wt.r1}, {wt.r2}) with {bare.nodes} Jacobi nodes")
    return TripleFormResult(scale * bare.bare_sum, abs(scale) * bare.tail_estimate,
                            bare.M1, bare.M2, bare.M3, bare.nodes,
                            abs(scale) * bare.quadrature_change, bare.bare_sum)


def table_forms(r1: float, r2: float, M: int) -> Tuple[QExpansion, QExpansion, QExpansion]:
    """f1 = eta^{2 r1}, f2 = eta^{2 r2}, f3 = E4 eta^{-2(r1 + r2)}."""
    f1 = eta_power_expansion(r1, M)
    f2 = eta_power_expansion(r2, M)
    f3 = qexp_mul(e4_expansion(M), eta_power_expansion(-(r1 + r2), M), M)
    return f1, f2, f3


def table_entry(r1: float, r2: float, M: Optional[int] = None, tol: float = 1e-10,
                threads: Optional[int] = None) -> TripleFormResult:
    """Bare triple sum: T without the leading prefactor and without 1/(2 pi i)."""
    if M is None:
        M = NUMERICS_CONFIG['truncation']
    wt = WeightTriple.for_table(r1, r2)
    return _bare_triple_sum(wt, *table_forms(r1, r2, M), tol, threads)


@dataclass
class GridCell:
    r1: float
    r2: float
    value: float = math.nan
    tail_estimate: float = math.nan
    seconds: float = 0.0
    status: str = 'ok'
    reason: str = ''


def cell_skip_reason(r1: float, r2: float) -> str:
    """Why (r1, r2) cannot be computed with the table forms, or '' if it can."""
    try:
        WeightTriple.for_table(r1, r2)
    except DomainError as e:
        return str(e)
    # smallest exponents: mu2(0) = r2/12, mu3(0) = -(r1 + r2)/12
    if not r2 / 12.0 + min(-(r1 + r2) / 12.0, 0.0) > 0:
        return "mu2 + mu3 must stay positive (needs r1 < 0)"
    return ''


def triple_form_grid(cells: Sequence[Tuple[float, float]], M: Optional[int] = None, tol: float = 1e-10,
                     threads: Optional[int] = None) -> List[GridCell]:
    """table_entry over (r1, r2) cells, with timing and skip reasons."""
    results = []
    for r1, r2 in cells:
        reason = cell_skip_reason(r1, r2)
        if reason:
            logger.warning(f"skipping ({r1}, {r2}): {reason}")
            results.append(GridCell(r1, r2, status='skip', reason=reason))
            continue
        start = time.perf_counter()
        try:
            entry = table_entry(r1, r2, M, tol, threads)
        except ModcupError as e:
            logger.error(f"cell ({r1}, {r2}) failed: {e}")
            results.append(GridCell(r1, r2, seconds=time.perf_counter() - start,
                                    status='fail', reason=str(e)))
            continue
        seconds = time.perf_counter() - start
        logger.info(f"cell ({r1}, {r2}) = {entry.bare_sum:.9g} in {seconds:.2f}s")
        results.append(GridCell(r1, r2, entry.bare_sum, entry.tail_estimate, seconds))
    return results


# Direct nested quadrature


@lru_cache(maxsize=64)
def _u_rule(n: int, alpha: float, beta_: float, level: int):
    return graded_jacobi_rule(n, alpha, beta_, 2.0 ** -level)


def _u_level(y: float) -> int:
    # first panel of width about 1/(4 pi max(y, 1))
    return max(1, int(math.ceil(math.log2(4.0 * math.pi * max(y, 1.0)))))


def triple_form_direct(wt: WeightTriple, f1: QExpansion, f2: QExpansion, f3: QExpansion,
                       tol: float = 1e-6, u_nodes: int = 20) -> complex:
    """T by nested quadrature: tau1 on the unit arc, tau2 on the ray above i, u on [0, 1]."""
    if not f2.is_cuspidal:
        raise DomainError("the second form must be a cusp form")
    if f1.is_zero() or f2.is_zero() or f3.is_zero():
        return 0j
    for f in (f1, f2, f3):
        bound = tail_bound(f, SQRT3 / 2.0)
        if bound > tol:
            raise InsufficientTruncationError(f"tail bound {bound:.3e} exceeds {tol:.3e}", bound)

    alpha, beta_ = wt.alpha, wt.beta
    rate = 2.0 * math.pi * (float(f2.mu[0]) + min(float(f3.mu[0]), 0.0))
    if rate <= 0:
        raise DomainError("f2 f3 does not decay along the ray")

    def u_integral(tau1: complex, tau2: complex) -> complex:
        rule = _u_rule(u_nodes, alpha, beta_, _u_level(tau2.imag))
        z = tau1 + rule.nodes * (tau2 - tau1)
        return complex(np.dot(rule.weights, f3(z)))

    def ray_integrand(tau1: complex):
        def integrand(tau2):
            tau2 = np.atleast_1d(tau2)
            inner = np.array([u_integral(tau1, complex(t2)) for t2 in tau2])
            return f2(tau2) * inner
        return integrand

    def arc_integrand(tau1):
        tau1 = np.atleast_1d(tau1)
        ray = np.array([integrate_vertical_ray(ray_integrand(complex(t1)), 0.0, 1.0, rate, tol / 4.0)
                        for t1 in tau1])
        return f1(tau1) * ray

    value = integrate_path(arc_integrand, ContourPath.unit_arc(), tol / 2.0)
    logger.info(f"direct T at (r1, r2) = ({wt.r1}, {wt.r2}): {value}")
    return wt.integral_prefactor() * value


# Haberland identity


def _same_type(f1: QExpansion, f2: QExpansion, r: float):
    if abs(f1.weight - f2.weight) > 1e-12 or abs(f1.p - f2.p) > 1e-12:
        raise DomainError("both forms need the same weight and eta parameter")
    if abs(f1.weight - r) > 1e-12:
        raise DomainError(f"forms have weight {f1.weight}, not {r}")
    if not (f1.is_cuspidal and f2.is_cuspidal):
        raise DomainError("both forms must be cusp forms")


def haberland_lhs(f1: QExpansion, f2: QExpansion, r: float, tol: float = 1e-8) -> complex:
    """(2i)^{2-r} int_arc f1(tau1) int_i^oo conj(f2(tau2)) (tau1 - conj(tau2))^{r-2} dconj(tau2) dtau1."""
    _same_type(f1, f2, r)
    if f1.is_zero() or f2.is_zero():
        return 0j
    rate = 2.0 * math.pi * float(f2.mu[0]) * (1.0 if r <= 2 else 0.9)

    def arc_integrand(tau1):
        tau1 = np.atleast_1d(tau1)
        inner = []
        for t1 in tau1:
            def ray(tau2, t1=complex(t1)):
                return np.conj(f2(tau2)) * cpow(t1 - np.conj(tau2), r - 2.0, PRINCIPAL)
            # dconj(tau2) = -i dy while the ray driver returns i int f dy
            inner.append(-integrate_vertical_ray(ray, 0.0, 1.0, rate, tol / 4.0))
        return f1(tau1) * np.array(inner)

    value = integrate_path(arc_integrand, ContourPath.unit_arc(), tol / 2.0)
    return cpow(2j, 2.0 - r, PRINCIPAL) * value


def petersson(f1: QExpansion, f2: QExpansion, r: float, tol: float = 1e-10,
              y_max: Optional[float] = None) -> complex:
    """(f1, f2)_r = integral over the fundamental domain of f1 conj(f2) y^{r-2} dx dy."""
    _same_type(f1, f2, r)
    for f in (f1, f2):
        bound = tail_bound(f, SQRT3 / 2.0)
        if bound > tol:
            raise InsufficientTruncationError(f"tail bound {bound:.3e} exceeds {tol:.3e}", bound)

    def integrand(x, y):
        z = x + 1j * y
        return f1(z) * np.conj(f2(z)) * y ** (r - 2.0)

    return integrate_fundamental_domain(integrand, tol, y_max)


def haberland_identity(f: QExpansion, tol: float = 1e-8) -> dict:
    """Both sides of LHS = -2i (f, f)_r and their relative residual."""
    r = f.weight
    lhs = haberland_lhs(f, f, r, tol)
    inner = petersson(f, f, r, tol)
    rhs = -2j * inner
    residual = abs(lhs - rhs) / max(abs(rhs), 1e-300)
    logger.info(f"Haberland at r={r}: lhs={lhs}, -2i(f,f)={rhs}, relative residual {residual:.3e}")
    return {'lhs': lhs, 'petersson': inner, 'rhs': rhs, 'relative_residual': residual}
