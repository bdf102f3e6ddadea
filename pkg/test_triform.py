"""
Tests for the Psi kernel, the Fourier triple sum, the nested-quadrature
oracle and the Haberland identity.
"""

import math

import numpy as np
import pytest
from scipy import integrate

from config import TABLE_REFERENCE_FILE
from forms import QExpansion, e4_expansion, eta_power_expansion
from special import beta, sinc
from triform import (TripleFormResult, WeightTriple, cell_skip_reason, haberland_identity,
                     haberland_lhs, petersson, psi_kernel, psi_tilde, table_entry, table_forms,
                     triple_form_direct, triple_form_grid, triple_form_series)
from utils import DomainError, InsufficientTruncationError, NonConvergenceError, load_reference_table

SQRT3 = math.sqrt(3.0)


def _psi_reference(r1, r2, mu1, mu2, mu3):
    # QUADPACK's algebraic-weight rule handles u^{1-r2} (1-u)^{1-r1}
    def smooth(u):
        return (math.exp(-math.pi * (2 - SQRT3) * mu3 * u) / (mu2 + mu3 * u)
                * sinc(math.pi * (mu1 + (1 - u) * mu3)))
    value, _ = integrate.quad(smooth, 0.0, 1.0, weight='alg', wvar=(1 - r2, 1 - r1),
                              epsabs=1e-14, epsrel=1e-13, limit=200)
    return math.exp(-2 * math.pi * mu2 - math.pi * SQRT3 * (mu1 + mu3)) * value


def test_weight_triple_for_table():
    wt = WeightTriple.for_table(-0.3, 0.2)
    assert wt.r3 == pytest.approx(4.1)
    assert wt.p3 == pytest.approx(0.1)
    assert wt.alpha == pytest.approx(1.3)
    assert wt.beta == pytest.approx(0.8)


@pytest.mark.parametrize("r1, r2", [(-0.3, 2.0), (2.0, 0.5), (-0.3, 0.0)])
def test_weight_triple_rejects(r1, r2):
    with pytest.raises(DomainError):
        WeightTriple.for_table(r1, r2)


def test_weight_triple_balance():
    with pytest.raises(DomainError):
        WeightTriple(-0.3, 0.2, 4.0, -0.3, 0.2, 0.1)
    with pytest.raises(DomainError):
        WeightTriple(-0.3, 0.2, 4.1, -0.3, 0.2, 0.3)


def test_prefactors_agree():
    # B(2 - r1, 2 - r2) = Gamma(2 - r1) Gamma(2 - r2) / Gamma(r3)
    wt = WeightTriple.for_table(-1.1, 1.3)
    assert wt.integral_prefactor() == pytest.approx(wt.series_prefactor(), rel=1e-13)


def test_psi_closed_form_at_zero_mu3():
    r1, r2, mu1, mu2 = -0.7, 0.6, -0.01, 0.05
    expected = (math.exp(-2 * math.pi * mu2 - math.pi * SQRT3 * mu1)
                * beta(2 - r2, 2 - r1) * sinc(math.pi * mu1) / mu2)
    assert psi_tilde(r1, r2, mu1, mu2, 0.0) == pytest.approx(expected, rel=1e-14)
    assert psi_kernel(r1, r2, mu1, mu2, 0.0) == pytest.approx(1j * expected / (2 * math.pi))


def test_psi_continuous_in_mu3():
    r1, r2, mu1, mu2 = -1.1, 1.3, 2.0 - 1.1 / 12, 1.3 / 12
    closed = psi_tilde(r1, r2, mu1, mu2, 0.0)
    near = psi_tilde(r1, r2, mu1, mu2, 1e-8)
    assert abs(near - closed) <= 1e-6 * abs(closed) + 1e-12


@pytest.mark.parametrize("r1, r2, mu1, mu2, mu3", [
    (-0.3, 0.2, -0.025, 1 / 60, 4 + 0.1 / 12),
    (-1.1, 1.3, 1 - 1.1 / 12, 1.3 / 12, -0.2 / 12),
    (-2.4, 1.8, -0.2, 2 + 1.8 / 12, 3 + 0.6 / 12),
    (-0.7, 0.6, 0.5, 0.05, 1.5),
])
def test_psi_against_weighted_quadpack(r1, r2, mu1, mu2, mu3):
    expected = _psi_reference(r1, r2, mu1, mu2, mu3)
    value = psi_tilde(r1, r2, mu1, mu2, mu3, tol=1e-11 * abs(expected))
    assert value == pytest.approx(expected, rel=1e-9)


def test_psi_stable_when_tol_halves():
    args = (-0.3, 0.2, -0.025, 1.0 / 60.0, 4.0 + 0.1 / 12.0)
    assert psi_tilde(*args, tol=1e-10) == pytest.approx(psi_tilde(*args, tol=5e-11), abs=2e-10)


@pytest.mark.parametrize("mu2, mu3", [(0.0, 1.0), (0.1, -0.2)])
def test_psi_domain(mu2, mu3):
    with pytest.raises(DomainError):
        psi_tilde(-0.3, 0.2, 0.1, mu2, mu3)


def test_triple_form_result_checks():
    with pytest.raises(NonConvergenceError):
        TripleFormResult(complex(math.nan), 0.0, 1, 1, 1, 16)
    with pytest.raises(DomainError):
        TripleFormResult(1.0, -1.0, 1, 1, 1, 16)


def test_series_vanishes_for_zero_form():
    wt = WeightTriple.for_table(-0.7, 0.6)
    _, f2, f3 = table_forms(-0.7, 0.6, 20)
    zero = QExpansion(-0.7, -0.7, np.zeros(21))
    result = triple_form_series(wt, zero, f2, f3)
    assert result.value == 0
    assert result.tail_estimate == 0


def test_series_needs_cusp_form():
    wt = WeightTriple.for_table(-0.7, 0.6)
    f1, _, f3 = table_forms(-0.7, 0.6, 20)
    with pytest.raises(DomainError):
        triple_form_series(wt, f1, e4_expansion(20), f3)


def test_series_prefactor_applied():
    wt = WeightTriple.for_table(-0.7, 0.6)
    result = triple_form_series(wt, *table_forms(-0.7, 0.6, 16), tol=1e-8, threads=1)
    scale = wt.series_prefactor() * 1j / (2 * math.pi)
    assert result.value == pytest.approx(scale * result.bare_sum, rel=1e-15)
    assert (result.M1, result.M2, result.M3) == (16, 16, 16)


def test_series_is_linear_in_first_form():
    wt = WeightTriple.for_table(-0.7, 0.6)
    f1, f2, f3 = table_forms(-0.7, 0.6, 16)
    base = triple_form_series(wt, f1, f2, f3, tol=1e-8, threads=1)
    # convergence tests scale with f1, so the tolerance scales with it
    tripled = triple_form_series(wt, f1.scaled(3.0), f2, f3, tol=3e-8, threads=1)
    assert tripled.nodes == base.nodes
    assert tripled.value == pytest.approx(3.0 * base.value, rel=1e-12)


def test_threads_do_not_change_the_sum():
    one = table_entry(-1.5, 0.6, M=12, tol=1e-8, threads=1)
    many = table_entry(-1.5, 0.6, M=12, tol=1e-8, threads=4)
    assert one.bare_sum == pytest.approx(many.bare_sum, rel=1e-14)


def test_short_truncation_detected():
    with pytest.raises(InsufficientTruncationError):
        table_entry(-0.3, 0.2, M=2, tol=1e-10)


def test_cell_skip_reasons():
    assert cell_skip_reason(-0.3, 0.2) == ''
    assert cell_skip_reason(0.3, 0.2) != ''
    assert cell_skip_reason(-1.1, 2.0) != ''


def test_grid_reports_skips():
    cells = triple_form_grid([(0.3, 0.2)], M=12, tol=1e-8, threads=1)
    assert cells[0].status == 'skip'
    assert math.isnan(cells[0].value)


def test_direct_vanishes_for_zero_form():
    wt = WeightTriple.for_table(-0.7, 0.6)
    _, f2, f3 = table_forms(-0.7, 0.6, 20)
    zero = QExpansion(-0.7, -0.7, np.zeros(21))
    assert triple_form_direct(wt, zero, f2, f3) == 0


def test_haberland_zero_and_checks():
    f = eta_power_expansion(1.2, 30)
    zero = QExpansion(1.2, 1.2, np.zeros(31))
    assert haberland_lhs(f, zero, 1.2) == 0
    with pytest.raises(DomainError):
        haberland_lhs(f, eta_power_expansion(0.8, 30), 1.2)
    with pytest.raises(DomainError):
        petersson(f, f, 0.8)


@pytest.mark.slow
def test_table_reference_cells():
    for ref in load_reference_table(TABLE_REFERENCE_FILE):
        value = table_entry(ref['r1'], ref['r2']).bare_sum
        assert value == pytest.approx(ref['value'], rel=ref['rel_tol'])


@pytest.mark.slow
@pytest.mark.parametrize("r1, r2", [(-0.7, 0.6), (-1.1, 1.3)])
def test_series_matches_direct(r1, r2):
    wt = WeightTriple.for_table(r1, r2)
    forms = table_forms(r1, r2, 30)
    series = triple_form_series(wt, *forms).value
    direct = triple_form_direct(wt, *forms, tol=1e-6)
    assert abs(series - direct) <= 1e-3 * max(abs(series), 1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("r", [0.8, 1.2, 1.6])
def test_haberland_identity(r):
    sides = haberland_identity(eta_power_expansion(r, 30), tol=1e-7)
    assert abs(sides['lhs'] + 2j * sides['petersson']) <= 1e-3 * abs(sides['petersson'])
    assert sides['petersson'].real > 0
