"""
Tests for the scalar special functions and branch handling.
"""

import math

import numpy as np
import pytest
from scipy import integrate

from special import (EICHLER, LOWER_PLANE, PRINCIPAL, ArgRange, beta, binom_real,
                     binom_real_table, cpow, gamma_real, pochhammer, pochhammer_table,
                     sigma_div, sinc)
from utils import DomainError


@pytest.mark.parametrize("x, expected", [(1.0, 1.0), (5.0, 24.0), (0.5, math.sqrt(math.pi)),
                                         (-0.5, -2.0 * math.sqrt(math.pi))])
def test_gamma_real_values(x, expected):
    assert gamma_real(x) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("x", [0.0, -1.0, -7.0])
def test_gamma_real_poles(x):
    with pytest.raises(DomainError):
        gamma_real(x)


@pytest.mark.parametrize("r, n, expected", [(2.5, 0, 1.0), (2.5, 3, 39.375), (-2.0, 4, 0.0)])
def test_pochhammer(r, n, expected):
    assert pochhammer(r, n) == expected


def test_pochhammer_table_matches_scalar():
    table = pochhammer_table(0.7, 12)
    for n in range(13):
        assert table[n] == pochhammer(0.7, n)


def test_pochhammer_negative_order():
    with pytest.raises(DomainError):
        pochhammer(1.0, -1)


def test_beta():
    assert beta(2.0, 3.0) == pytest.approx(1.0 / 12.0, rel=1e-14)
    assert beta(0.5, 0.5) == pytest.approx(math.pi, rel=1e-14)
    with pytest.raises(DomainError):
        beta(0.0, 1.0)


def test_arg_range_length_enforced():
    with pytest.raises(DomainError):
        ArgRange(0.0, math.pi)
    with pytest.raises(DomainError):
        ArgRange(0.0, 2 * math.pi, 'both')


def test_arg_range_endpoints():
    assert PRINCIPAL.reduce(math.pi) == pytest.approx(math.pi)
    assert PRINCIPAL.reduce(-math.pi) == pytest.approx(math.pi)
    assert LOWER_PLANE.reduce(math.pi) == pytest.approx(-math.pi)
    assert EICHLER.reduce(-math.pi / 2) == pytest.approx(3 * math.pi / 2)


def test_cpow_branches():
    assert cpow(-1.0, 0.5, PRINCIPAL) == pytest.approx(1j)
    # [-pi, pi) puts the negative axis at -pi
    assert cpow(-1.0, 0.5, LOWER_PLANE) == pytest.approx(-1j)
    # (-pi/2, 3pi/2) keeps arg(-i) = 3pi/2
    assert cpow(-1j, 0.5, EICHLER) == pytest.approx(np.exp(0.75j * math.pi))


def test_cpow_zero():
    assert cpow(0j, 1.5) == 0
    with pytest.raises(DomainError):
        cpow(0j, 0.0)


def test_cpow_vectorized():
    z = np.array([1j, -1.0, 2.0 + 1j])
    values = cpow(z, 0.3)
    for zk, vk in zip(z, values):
        assert vk == pytest.approx(complex(zk) ** 0.3)


def test_sinc():
    assert sinc(0.0) == 1.0
    assert abs(sinc(math.pi)) < 1e-16
    assert sinc(1e-5) == pytest.approx(1.0 - 1e-10 / 6.0, rel=1e-15)
    np.testing.assert_allclose(sinc(np.array([0.0, 0.5])), [1.0, math.sin(0.5) / 0.5])


def test_sigma_div():
    assert sigma_div(3, 2) == 9
    assert sigma_div(1, 12) == 28
    with pytest.raises(DomainError):
        sigma_div(1, 0)


@pytest.mark.parametrize("r, m, expected", [(5.0, 2, 10.0), (0.5, 2, -0.125), (-1.0, 3, -1.0),
                                            (3.7, 0, 1.0)])
def test_binom_real(r, m, expected):
    assert binom_real(r, m) == pytest.approx(expected)


def test_binom_real_table():
    np.testing.assert_allclose(binom_real_table(-1.5, 6), [binom_real(-1.5, m) for m in range(7)])


def test_gamma_oracle():
    # gamma(3.7) = 2.7 * 1.7 * 0.7 * gamma(0.7), with the stdlib Lanczos gamma as the independent value
    assert gamma_real(3.7) == pytest.approx(2.7 * 1.7 * 0.7 * math.gamma(0.7), rel=1e-12)


def test_gamma_ratio():
    for x in np.linspace(0.1, 10.0, 200):
        assert gamma_real(x + 1.0) / gamma_real(x) == pytest.approx(x, rel=1e-11)


def test_beta_oracle():
    expected, _ = integrate.quad(lambda u: u ** 0.8 * (1.0 - u) ** 1.2, 0.0, 1.0,
                                 epsabs=1e-15, epsrel=1e-13, limit=200)
    assert beta(1.8, 2.2) == pytest.approx(expected, rel=1e-10)


def test_pochhammer_recurrence_is_exact():
    rng = np.random.default_rng(3)
    for r in rng.uniform(-5.0, 5.0, size=50):
        for n in range(20):
            assert pochhammer(r, n + 1) == pochhammer(r, n) * (r + n)


@pytest.mark.parametrize("arg_range", [PRINCIPAL, LOWER_PLANE, EICHLER])
def test_cpow_is_multiplicative(arg_range):
    rng = np.random.default_rng(11)
    modulus = np.exp(rng.uniform(math.log(0.1), math.log(10.0), size=1000))
    z = modulus * np.exp(1j * rng.uniform(-math.pi, math.pi, size=1000))
    s, t = rng.uniform(-3.0, 3.0, size=(2, 1000))
    for zk, sk, tk in zip(z, s, t):
        product = cpow(zk, sk, arg_range) * cpow(zk, tk, arg_range)
        combined = cpow(zk, sk + tk, arg_range)
        assert abs(product - combined) <= 1e-13 * abs(combined)


def test_sinc_is_c2_at_zero():
    x = np.linspace(-1e-2, 1e-2, 2001)
    # the bound x^4/100 plus a few ulps of 1.0 for rounding in sin(x)/x
    gap = np.abs(sinc(x) - (1.0 - x * x / 6.0))
    assert np.all(gap <= x ** 4 / 100.0 + 4 * np.finfo(float).eps)


def test_sigma_div_is_multiplicative():
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 100:
        m, n = (int(v) for v in rng.integers(1, 200, size=2))
        if math.gcd(m, n) != 1:
            continue
        for k in range(4):
            assert sigma_div(k, m * n) == sigma_div(k, m) * sigma_div(k, n)
        checked += 1
