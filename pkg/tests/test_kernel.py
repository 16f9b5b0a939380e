"""Kernel coefficient identities, positivity, and moment checks."""

import numpy as np
import pytest

from polyrelu import kernel as K
from polyrelu.errors import QuadratureError


def test_base_coeffs_n0():
    assert np.allclose(K.jackson_base_coeffs(0), [1.0 / np.sqrt(2.0)])


def test_base_coeffs_n1():
    # denominator 2(sin^2(pi/3) + sin^2(2pi/3)) = 3, numerators sqrt(3)/2
    assert np.allclose(K.jackson_base_coeffs(1), [0.5, 0.5], atol=1e-15)


@pytest.mark.parametrize("n", [0, 1, 2, 5, 17, 64, 200])
def test_base_normalization(n):
    a = K.jackson_base_coeffs(n)
    assert np.all(a > 0)
    assert abs(np.sum(a * a) - 0.5) < 1e-12


def test_hat_dc_term():
    for n in (0, 3, 12):
        assert K.jackson_hat_coeffs(n)[0] == pytest.approx(1.0 / (2 * np.pi), abs=1e-15)


def test_hat_n1():
    # (2/pi) * (1/2)(1/2)
    assert K.jackson_hat_coeffs(1)[1] == pytest.approx(1.0 / (2 * np.pi), abs=1e-15)


@pytest.mark.parametrize("n", [1, 4, 9, 33])
def test_hat_first_coefficient_identity(n):
    # adjacent-sum identity makes c_1 = cos(pi/(n+2))/pi
    c = K.jackson_hat_coeffs(n)
    assert c[1] == pytest.approx(np.cos(np.pi / (n + 2)) / np.pi, abs=1e-14)


def test_eval_constant_kernel():
    ker = K.JacksonKernel(0)
    for t in (-2.0, 0.0, 0.7):
        assert K.kernel_eval(ker, t) == pytest.approx(1 / (2 * np.pi), abs=1e-15)


def test_eval_n1_at_zero():
    assert K.kernel_eval(K.JacksonKernel(1), 0.0) == pytest.approx(1 / np.pi, abs=1e-14)


def test_evenness():
    ker = K.JacksonKernel(7)
    t = np.linspace(0.0, np.pi, 50)
    assert np.allclose(K.kernel_eval(ker, t), K.kernel_eval(ker, -t), atol=1e-14)


@pytest.mark.parametrize("n", [0, 1, 2, 4, 8, 16, 32, 64])
def test_cosine_vs_squared_form(n):
    ker = K.JacksonKernel(n)
    t = np.linspace(-np.pi, np.pi, 512)
    d = np.abs(K.kernel_eval(ker, t) - K.kernel_eval_squared_form(ker, t))
    assert d.max() <= 1e-10


@pytest.mark.parametrize("n", range(0, 65, 4))
def test_positivity(n):
    ker = K.JacksonKernel(n)
    t = np.linspace(-np.pi, np.pi, 512)
    assert K.kernel_eval(ker, t).min() >= -1e-12


@pytest.mark.parametrize("n", [1, 2, 7, 33, 64])
def test_adjacent_sum_identity(n):
    assert K.adjacent_sum_defect(K.JacksonKernel(n)) <= 1e-12


def test_coefficient_bound_up_to_256():
    for n in (0, 1, 17, 128, 256):
        ker = K.JacksonKernel(n)
        assert np.max(np.abs(ker.cosine)) <= 5 * np.pi


def test_checks_record():
    rec = K.kernel_checks(K.JacksonKernel(0), 16)
    assert rec["normality"] == pytest.approx(1.0, abs=1e-12)
    assert rec["scaled_first_moment"] == 0.0
    rec4 = K.kernel_checks(K.JacksonKernel(4), 4 * 6)
    assert abs(rec4["normality"] - 1.0) <= 1e-10
    rec16 = K.kernel_checks(K.JacksonKernel(16), 4 * 18)
    assert rec16["scaled_first_moment"] <= np.pi ** 2 / 2
    assert K.checks_pass(rec) and K.checks_pass(rec4) and K.checks_pass(rec16)


def test_checks_reject_low_resolution():
    with pytest.raises(QuadratureError):
        K.kernel_checks(K.JacksonKernel(4), 8)


def test_rejects_negative_degree():
    with pytest.raises(ValueError):
        K.jackson_base_coeffs(-1)
