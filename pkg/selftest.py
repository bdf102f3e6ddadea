"""
Property checks run by `modcup selftest`.

Each check returns {'name', 'passed', 'detail'}; the sample counts are
smaller than in the pytest suites so the whole run takes a few minutes.
"""

import logging
import math
from typing import Callable, Dict, List

import numpy as np

from config import TABLE_REFERENCE_FILE
from cocycle import (cocycle_additivity_residual, eichler_polynomial_check,
                     equivariance_residual, poly_coinvariant_report, valid_parameters)
from forms import e4_expansion, eta_power_coeffs, eta_power_poly, eta_power_expansion
from polar import (PolarSeries, bracket, bracket_closed_form, eichler_kernel_minus_expansion,
                   from_disk, j_r, knopp_kernel_plus_expansion, sigma_r_coeff, sigma_r_contour)
from quad import fundamental_domain_area, gauss_jacobi
from special import beta, sigma_div
from triform import table_entry
from utils import ModcupError, load_reference_table

logger = logging.getLogger(__name__)


def ramanujan_tau_oracle(n_max: int) -> List[int]:
    """tau(1..n_max) by expanding q prod (1 - q^n)^24 with integer arithmetic."""
    series = [0] * (n_max + 1)
    series[0] = 1
    for n in range(1, n_max + 1):
        for _ in range(24):
            for k in range(n_max, n - 1, -1):
                series[k] -= series[k - n]
    return series[:n_max]


def check_eta_coefficients(rng) -> Dict:
    """p_m(12) = tau(m + 1) exactly, and the numeric path agrees with the exact one."""
    tau = ramanujan_tau_oracle(11)
    exact = [eta_power_poly(m)(12) for m in range(11)]
    ok = all(int(e) == t for e, t in zip(exact, tau))
    worst = 0.0
    for r in rng.uniform(-3.0, 3.0, size=5):
        numeric = eta_power_coeffs(float(r), 30)
        for m in range(31):
            ref = float(eta_power_poly(m)(float(r)))
            worst = max(worst, abs(numeric[m] - ref) / max(1.0, abs(ref)))
    return {'name': 'eta coefficients', 'passed': ok and worst <= 1e-12,
            'detail': f"tau match={ok}, recurrence gap={worst:.2e}"}


def check_e4(rng) -> Dict:
    e4 = e4_expansion(30)
    ok = all(e4.coeffs[n] == 240 * sigma_div(3, n) for n in range(1, 31)) and e4.coeffs[0] == 1
    return {'name': 'E4 coefficients', 'passed': bool(ok), 'detail': 'a(n) = 240 sigma_3(n), n <= 30'}


def check_jacobi_moments(rng) -> Dict:
    worst = 0.0
    for _ in range(5):
        a, b = rng.uniform(-0.9, 2.0, size=2)
        rule = gauss_jacobi(8, a, b)
        for k in range(16):
            exact = beta(b + 1.0 + k, a + 1.0)
            worst = max(worst, abs(np.dot(rule.weights, rule.nodes ** k) - exact) / exact)
    return {'name': 'Gauss-Jacobi moments', 'passed': worst <= 1e-12, 'detail': f"max rel error {worst:.2e}"}


def check_area(rng) -> Dict:
    area = fundamental_domain_area(1e-10)
    gap = abs(area - math.pi / 3.0)
    return {'name': 'fundamental domain area', 'passed': gap <= 1e-8, 'detail': f"area={area!r}, gap={gap:.2e}"}


def check_lift(rng) -> Dict:
    worst = 0.0
    for r in rng.uniform(0.1, 5.0, size=5):
        f = PolarSeries(-64, rng.normal(size=65) + 1j * rng.normal(size=65))
        back = j_r(sigma_r_coeff(f, float(r)), float(r))
        worst = max(worst, float(np.max(np.abs(back.coeffs - f.coeffs))))
    contour_gap = 0.0
    z = from_disk(0.9)
    for r in (0.5, 1.7):
        for n in (0, -1, -3):
            phi = PolarSeries.monomial(n)
            coeff = sigma_r_coeff(phi, r)
            w = (z - 1j) / (z + 1j)
            expected = coeff.coefficient(n - 1) * w ** (n - 1)
            contour_gap = max(contour_gap, abs(sigma_r_contour(phi, r, z, 0.5) - expected))
    return {'name': 'sigma_r lift', 'passed': worst <= 1e-14 and contour_gap <= 1e-9,
            'detail': f"J_r sigma_r gap={worst:.2e}, contour gap={contour_gap:.2e}"}


def _random_disk_point(rng, radius: float) -> complex:
    rho = radius * math.sqrt(rng.uniform())
    return rho * complex(math.cos(rng.uniform(0, 2 * math.pi)), math.sin(rng.uniform(0, 2 * math.pi)))


def check_kernel_bracket(rng) -> Dict:
    worst = 0.0
    for _ in range(10):
        tau1 = from_disk(_random_disk_point(rng, 0.6))
        tau2 = from_disk(_random_disk_point(rng, 0.6))
        r = float(rng.uniform(0.05, 1.95))
        series = bracket(knopp_kernel_plus_expansion(tau2, r, 200),
                         eichler_kernel_minus_expansion(tau1, r, 200), 2.0 - r)
        closed = bracket_closed_form(tau1, tau2, r)
        worst = max(worst, abs(series - closed) / abs(closed))
    return {'name': 'kernel bracket', 'passed': worst <= 1e-8, 'detail': f"max rel gap {worst:.2e}"}


def check_coinvariants(rng) -> Dict:
    bad = []
    min_margin = math.inf
    for r in range(2, 15):
        for p in valid_parameters(r):
            report = poly_coinvariant_report(r, p)
            min_margin = min(min_margin, report.margin)
            expected = 1 if (r, p) == (2, 0) else 0
            if report.dim != expected:
                bad.append((r, p, report.dim))
    return {'name': 'polynomial coinvariants', 'passed': not bad and min_margin >= 1e3,
            'detail': f"mismatches={bad}, threshold margin={min_margin:.2e}"}


def check_cocycle(rng) -> Dict:
    worst = 0.0
    for r in (0.4, 1.0, 1.6):
        f = eta_power_expansion(r, 30)
        for _ in range(2):
            z1, z2, z3 = (complex(rng.uniform(-0.5, 0.5), rng.uniform(0.8, 1.5)) for _ in range(3))
            t = complex(rng.uniform(-1, 1), -rng.uniform(0.5, 2.0))
            worst = max(worst, cocycle_additivity_residual(f, z1, z2, z3, t, 1e-11))
            for g in ('S', 'T'):
                worst = max(worst, equivariance_residual(f, f.multiplier, g, z1, z2, t, 1e-11))
    poly = eichler_polynomial_check(eta_power_expansion(4.0, 30), 1j, complex(0.5, 1.5))
    return {'name': 'cocycle relations', 'passed': worst <= 1e-8 and poly <= 1e-8,
            'detail': f"max residual={worst:.2e}, degree check={poly:.2e}"}


def check_table_cell(rng) -> Dict:
    reference = load_reference_table(TABLE_REFERENCE_FILE)[0]
    value = table_entry(reference['r1'], reference['r2']).bare_sum
    rel = abs(value - reference['value']) / abs(reference['value'])
    return {'name': 'table cell', 'passed': rel <= reference['rel_tol'],
            'detail': f"({reference['r1']}, {reference['r2']}) = {value:.7f}, rel gap {rel:.2e}"}


CHECKS: List[Callable] = [
    check_eta_coefficients,
    check_e4,
    check_jacobi_moments,
    check_area,
    check_lift,
    check_kernel_bracket,
    check_coinvariants,
    check_cocycle,
    check_table_cell,
]


def run_selftest(seed: int) -> List[Dict]:
    """Run every check with a generator seeded from ``seed``."""
    rng = np.random.default_rng(seed)
    results = []
    for check in CHECKS:
        try:
            result = check(rng)
        except ModcupError as e:
            logger.error(f"{check.__name__} raised {type(e).__name__}: {e}")
            result = {'name': check.__name__, 'passed': False, 'detail': f"{e.code}: {e}"}
        results.append(result)
        logger.info(f"{result['name']}: {'pass' if result['passed'] else 'FAIL'}")
    return results
