"""
Tests for Eichler/Knopp integrals, cocycle residuals and polynomial coinvariants.
"""

import math

import numpy as np
import pytest

from cocycle import (CUSP, RHO, CocycleValue, PolyModule, cocycle_additivity_residual,
                     cup_representative, cup_representative_series, eichler_integral,
                     eichler_polynomial_check, equivariance_residual, knopp_integral,
                     poly_coinvariant_dim, poly_coinvariant_report, valid_parameters)
from forms import QExpansion, e4_expansion, eta_power_expansion
from quad import ContourPath
from utils import DecayViolationError, DomainError


@pytest.fixture(scope="module")
def eta_06():
    return eta_power_expansion(0.6, 30)


def test_equal_endpoints_vanish(eta_06):
    assert eichler_integral(eta_06, 1j, 1j, -2j) == 0
    assert knopp_integral(eta_06, 1j, 1j, 2j) == 0
    assert eichler_integral(eta_06, CUSP, CUSP, -2j) == 0


def test_t_must_lie_below(eta_06):
    with pytest.raises(DomainError):
        eichler_integral(eta_06, 1j, 2j, 1j)
    with pytest.raises(DomainError):
        knopp_integral(eta_06, 1j, 2j, -1j)


def test_unknown_endpoint(eta_06):
    with pytest.raises(DomainError):
        eichler_integral(eta_06, 'infinity', 1j, -1j)


def test_cusp_needs_cusp_form():
    with pytest.raises(DecayViolationError):
        eichler_integral(e4_expansion(30), 1j, CUSP, -1j)
    with pytest.raises(DecayViolationError):
        CocycleValue(e4_expansion(30), 1j, CUSP)


def test_integral_weight_two_is_exact():
    # weight 2 kernel is 1, so c_f(z1, z2) is the integral of f itself
    # f = q, padded with zeros so the truncation tail is empty
    f = QExpansion(2.0, 12.0, np.array([1.0] + [0.0] * 30))
    z1, z2 = complex(-0.2, 1.0), complex(0.3, 1.4)
    expected = (np.exp(2j * math.pi * z2) - np.exp(2j * math.pi * z1)) / (2j * math.pi)
    assert eichler_integral(f, z1, z2, -1j, 1e-12) == pytest.approx(expected, abs=1e-12)


def test_additivity(eta_06):
    z1, z2, z3 = complex(-0.3, 1.0), complex(0.2, 1.3), complex(0.4, 0.9)
    assert cocycle_additivity_residual(eta_06, z1, z2, z3, -2j, 1e-11) <= 1e-10


def test_additivity_through_cusp(eta_06):
    residual = cocycle_additivity_residual(eta_06, 1j, complex(0.3, 1.2), CUSP, complex(0.5, -1.0), 1e-11)
    assert residual <= 1e-9


def test_path_independence(eta_06):
    t = complex(0.2, -1.5)
    straight = eichler_integral(eta_06, RHO - 1, RHO, t, 1e-12)
    two_legs = eichler_integral(eta_06, RHO - 1, 1j, t, 1e-12) + eichler_integral(eta_06, 1j, RHO, t, 1e-12)
    arc = eichler_integral(eta_06, RHO - 1, RHO, t, 1e-12, ContourPath.unit_arc())
    assert straight == pytest.approx(two_legs, abs=1e-10)
    assert straight == pytest.approx(arc, abs=1e-10)


def test_path_must_match_endpoints(eta_06):
    with pytest.raises(DomainError):
        eichler_integral(eta_06, 1j, 2j, -1j, path=ContourPath.unit_arc())


def test_knopp_is_conjugate(eta_06):
    z = complex(0.1, 0.7)
    assert knopp_integral(eta_06, 1j, 2j, z) == pytest.approx(
        eichler_integral(eta_06, 1j, 2j, z.conjugate()).conjugate())


def test_cocycle_value_object(eta_06):
    c = CocycleValue(eta_06, 1j, CUSP, tol=1e-11)
    assert c.weight == 0.6
    assert c(-1j) == pytest.approx(eichler_integral(eta_06, 1j, CUSP, -1j, 1e-11))
    assert c.knopp(1j) == pytest.approx(c(-1j).conjugate())


@pytest.mark.parametrize("g", ["T", "S"])
def test_equivariance_example(eta_06, g):
    assert equivariance_residual(eta_06, eta_06.multiplier, g, 1j, 2j, complex(-1, -1), 1e-11) <= 1e-8


def test_equivariance_zero_form():
    zero = QExpansion(0.6, 0.6, np.zeros(31))
    assert equivariance_residual(zero, zero.multiplier, 'S', 1j, 2j, complex(-1, -1)) == 0


@pytest.mark.parametrize("r", [0.4, 1.0, 1.6])
def test_equivariance_random(r):
    f = eta_power_expansion(r, 30)
    rng = np.random.default_rng(int(10 * r))
    for _ in range(3):
        z1, z2 = (complex(rng.uniform(-0.5, 0.5), rng.uniform(0.8, 1.5)) for _ in range(2))
        t = complex(rng.uniform(-1, 1), -rng.uniform(0.5, 2.0))
        for g in ("S", "T"):
            assert equivariance_residual(f, f.multiplier, g, z1, z2, t, 1e-11) <= 1e-9


def test_equivariance_argument_checks(eta_06):
    with pytest.raises(DomainError):
        equivariance_residual(eta_06, eta_06.multiplier, 'S', 1j, CUSP, -1j)
    with pytest.raises(DomainError):
        equivariance_residual(eta_06, eta_06.multiplier, 'U', 1j, 2j, -1j)


def test_cup_representative(eta_06):
    zero = QExpansion(-1.0, -1.0, np.zeros(31))
    assert cup_representative(zero, eta_06, -1j) == 0
    f1 = eta_power_expansion(-1.0, 30)
    t = complex(0.3, -1.2)
    expected = (eichler_integral(f1, RHO - 1, RHO, t, 1e-10, ContourPath.unit_arc())
                * eichler_integral(eta_06, 1j, CUSP, t, 1e-10))
    assert cup_representative(f1, eta_06, t) == pytest.approx(expected)
    series = cup_representative_series(f1, eta_06, [t, t])
    assert series[0] == series[1]
    with pytest.raises(DomainError):
        cup_representative(eta_06, e4_expansion(30), t)


@pytest.mark.parametrize("r", [4.0, 6.0, 12.0])
def test_integral_weight_cocycle_is_polynomial(r):
    f = eta_power_expansion(r, 30)
    assert eichler_polynomial_check(f, 1j, complex(0.5, 1.5)) <= 1e-8


def test_polynomial_check_on_a_vertical_line():
    # the fit nodes share one real part, so only their imaginary parts tell them apart
    f = eta_power_expansion(4.0, 30)
    points = [complex(0.5, -y) for y in (0.6, 0.9, 1.3, 1.8, 2.4)]
    assert eichler_polynomial_check(f, 1j, complex(0.5, 1.5), points) <= 1e-8


def test_polynomial_check_needs_integral_weight(eta_06):
    with pytest.raises(DomainError):
        eichler_polynomial_check(eta_06, 1j, 2j)


def test_poly_module_actions():
    module = PolyModule(3, 1)
    v = module.multiplier
    assert module.dimension == 2
    np.testing.assert_allclose(module.act('T', [0, 1]), v.v_T * np.array([1, 1]))
    module = PolyModule(4, 0)
    np.testing.assert_allclose(module.act('S', [0, 1, 0]), [0, -1, 0])
    np.testing.assert_allclose(module.act('S', [1, 0, 0]), [0, 0, 1])


@pytest.mark.parametrize("r, p", [(6, 2), (7, 3), (12, 0)])
def test_poly_module_s_squares_to_identity(r, p):
    s = PolyModule(r, p).matrix('S')
    np.testing.assert_allclose(s @ s, np.eye(r - 1), atol=1e-14)


def test_poly_module_checks():
    with pytest.raises(DomainError):
        PolyModule(1, 1)
    with pytest.raises(DomainError):
        PolyModule(4, 1)
    with pytest.raises(DomainError):
        PolyModule(4, 0).matrix('U')


@pytest.mark.parametrize("r, p, expected", [(2, 0, 1), (12, 0, 0), (2, 2, 0), (2, 12, 1)])
def test_coinvariant_examples(r, p, expected):
    assert poly_coinvariant_dim(r, p) == expected


def test_coinvariant_table():
    for r in range(2, 15):
        for p in valid_parameters(r):
            report = poly_coinvariant_report(r, p)
            assert report.dim == (1 if (r, p) == (2, 0) else 0)
            assert report.margin >= 1e3


def test_coinvariant_range():
    with pytest.raises(DomainError):
        poly_coinvariant_report(41, 1)


def test_valid_parameters():
    assert valid_parameters(3) == [1, 3, 5, 7, 9, 11]
    assert valid_parameters(2)[0] == 0


def test_cup_representative_is_linear_in_first_form(eta_06):
    f1 = eta_power_expansion(-1.0, 30)
    ts = [complex(0.3, -1.2), complex(-0.4, -0.7)]
    single = cup_representative_series(f1, eta_06, ts)
    combined = cup_representative_series(f1 + f1.scaled(2.0), eta_06, ts)
    np.testing.assert_allclose(combined, 3.0 * single, rtol=1e-9)


def test_cup_representative_stable_when_tol_halves():
    f1 = eta_power_expansion(-0.7, 30)
    f2 = eta_power_expansion(0.2, 30)
    coarse = cup_representative(f1, f2, -1j, 1e-10)
    fine = cup_representative(f1, f2, -1j, 5e-11)
    assert abs(coarse - fine) <= 1e-8 * max(1.0, abs(fine))
