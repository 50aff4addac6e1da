"""
Tests for the Bessel/Hankel routines and circular-harmonic helpers.
"""

import math
import os
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import special

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.errors import DomainError
from src.specfun import (
    MAX_ORDER, bessel_j, bessel_j_derivative, bessel_j_orders, bessel_j_signed_orders, bessel_y,
    circular_harmonic, hankel1, hankel1_derivative, i_power, jacobi_anger_order,
    mode_indices, plane_wave_expansion,
)


def test_bessel_j_matches_scipy_over_orders_and_arguments():
    """Miller recurrence agrees with scipy including deep in the tail."""
    x = np.array([0.05, 0.5, 1.0, 7.3, 25.0, 60.0])
    table = bessel_j_orders(80, x)
    for n in range(81):
        assert_allclose(table[n], special.jv(n, x), rtol=1e-10, atol=1e-300)


def test_bessel_j_at_origin():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(3, 0.0) == 0.0
    assert_allclose(bessel_j_orders(4, np.array([0.0, 1.0]))[:, 0], [1, 0, 0, 0, 0])


def test_bessel_y_matches_scipy():
    x = np.array([0.5, 2.0, 9.0, 30.0])
    for n in range(0, 25):
        assert_allclose(bessel_y(n, x), special.yv(n, x), rtol=1e-10)


def test_negative_orders_follow_parity():
    x = np.linspace(0.1, 12.0, 7)
    for n in range(1, 9):
        assert_allclose(bessel_j(-n, x), (-1) ** n * bessel_j(n, x))
        assert_allclose(bessel_y(-n, x), (-1) ** n * bessel_y(n, x))
    signed = bessel_j_signed_orders(3, x)
    assert signed.shape == (7, len(x))
    assert_allclose(signed[0], -bessel_j(3, x))
    assert_allclose(signed[3], bessel_j(0, x))


def test_wronskian_identity():
    """J_{n+1} Y_n - J_n Y_{n+1} = 2 / (π x)."""
    x = 3.7
    for n in range(12):
        lhs = bessel_j(n + 1, x) * bessel_y(n, x) - bessel_j(n, x) * bessel_y(n + 1, x)
        assert_allclose(lhs, 2.0 / (math.pi * x), rtol=1e-10)


def test_derivatives_against_scipy():
    x = np.array([0.3, 2.5, 11.0])
    for n in range(6):
        assert_allclose(bessel_j_derivative(n, x), special.jvp(n, x), rtol=1e-10, atol=1e-14)
        assert_allclose(hankel1_derivative(n, x), special.h1vp(n, x), rtol=1e-10)


def test_hankel_scalar_and_domain():
    value = hankel1(1, 2.0)
    assert isinstance(value, complex)
    assert_allclose(value, special.hankel1(1, 2.0), rtol=1e-12)
    with pytest.raises(DomainError):
        hankel1(0, 0.0)
    with pytest.raises(DomainError):
        bessel_j(0, -1.0)
    with pytest.raises(DomainError):
        bessel_j(201, 1.0)
    with pytest.raises(DomainError):
        bessel_j(0, float("nan"))


def test_jacobi_anger_expansion_reproduces_plane_wave():
    k, radius = 2.0, 3.0
    order = jacobi_anger_order(k, radius, margin=20)
    rng = np.random.default_rng(4)
    r = radius * np.sqrt(rng.random(50))
    t = 2 * np.pi * rng.random(50)
    x, y = r * np.cos(t), r * np.sin(t)
    theta_d = 0.7
    exact = np.exp(1j * k * (x * math.cos(theta_d) + y * math.sin(theta_d)))
    assert_allclose(plane_wave_expansion(k, x, y, theta_d, order), exact, atol=1e-12)


@pytest.mark.parametrize("k", [0.5, 10.0, 40.0])
def test_jacobi_anger_holds_at_the_rule_order(k):
    radius = 20.0
    order = jacobi_anger_order(k, radius)
    rng = np.random.default_rng(int(k * 10))
    r = np.concatenate([radius * np.sqrt(rng.random(40)), [radius, 0.0]])
    t = 2 * np.pi * rng.random(42)
    x, y = r * np.cos(t), r * np.sin(t)
    theta_d = 2.1
    exact = np.exp(1j * k * (x * math.cos(theta_d) + y * math.sin(theta_d)))
    assert np.max(np.abs(plane_wave_expansion(k, x, y, theta_d, order) - exact)) <= 1e-8


def test_order_tables_extend_past_single_order_limit():
    table = bessel_j_orders(400, np.array([300.0, 5.0]))
    assert_allclose(table[[0, 250, 400], 0], special.jv([0, 250, 400], 300.0), rtol=1e-9, atol=1e-14)
    assert_allclose(table[[0, 10, 30], 1], special.jv([0, 10, 30], 5.0), rtol=1e-9, atol=1e-300)
    with pytest.raises(DomainError):
        bessel_j(MAX_ORDER + 1, 1.0)


def test_circular_harmonics_are_orthonormal():
    theta = 2 * np.pi * np.arange(64) / 64
    weight = 2 * np.pi / 64
    basis = np.array([circular_harmonic(n, theta) for n in mode_indices(5)])
    gram = weight * basis.conj() @ basis.T
    assert_allclose(gram, np.eye(11), atol=1e-13)


def test_i_power_is_exact():
    assert [i_power(n) for n in range(-2, 4)] == [-1, -1j, 1, 1j, -1, -1j]
