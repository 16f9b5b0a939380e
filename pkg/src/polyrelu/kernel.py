"""Explicit nonnegative trigonometric smoothing kernel of degree n.

The kernel is J_n(t) = (1/pi) |sum_k a_k e^{ikt}|^2 = sum_k c_k cos(kt)
with base weights

    a_k = sin((k+1) pi / (n+2)) / sqrt(2 sum_j sin^2((j+1) pi / (n+2))),

so J_n is even, nonnegative, integrates to 1 over [-pi, pi], and its
scaled first absolute moment n * int |t| J_n(t) dt stays below pi^2/2
for every n.  The cosine coefficients obey c_0 = 1/(2 pi) and
c_k = (2/pi) sum_j a_j a_{j+k}, all bounded by 5 pi.  Convolution with
J_n smooths 2pi-periodic functions at the Jackson rate, which is what
every Chebyshev coefficient computation downstream builds on.
"""

from __future__ import annotations

import numpy as np

from .errors import QuadratureError

MOMENT_BOUND = np.pi ** 2 / 2
COEFF_BOUND = 5 * np.pi


def jackson_base_coeffs(n: int) -> np.ndarray:
    """Base weights a_0..a_n; positive, with squares summing to 1/2."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    k = np.arange(n + 1)
    s = np.sin((k + 1) * np.pi / (n + 2))
    return s / np.sqrt(2.0 * np.sum(s * s))


def jackson_hat_coeffs(n: int) -> np.ndarray:
    """Cosine coefficients c_0..c_n of J_n.

    c_0 = 1/(2 pi); c_k = (2/pi) * sum_{j=0}^{n-k} a_j a_{j+k} for k >= 1.
    """
    a = jackson_base_coeffs(n)
    c = np.empty(n + 1)
    c[0] = 1.0 / (2.0 * np.pi)
    for k in range(1, n + 1):
        c[k] = (2.0 / np.pi) * np.dot(a[: n + 1 - k], a[k:])
    return c


class JacksonKernel:
    """Degree-n kernel with validated coefficient vectors."""

    def __init__(self, n: int):
        self.n = int(n)
        self.base = jackson_base_coeffs(self.n)
        self.cosine = jackson_hat_coeffs(self.n)
        sq = float(np.sum(self.base ** 2))
        if abs(sq - 0.5) > 1e-12:
            raise ValueError(f"base normalization off: sum of squares {sq!r}")
        if np.any(self.base <= 0.0):
            raise ValueError("base weights must be positive")
        if np.max(np.abs(self.cosine)) > COEFF_BOUND:
            raise ValueError("cosine coefficient exceeds 5 pi")

    def __call__(self, t):
        return kernel_eval(self, t)


def kernel_eval(kernel: JacksonKernel, t):
    """J_n(t) = sum_k c_k cos(kt); scalar or array t."""
    t = np.asarray(t, dtype=float)
    k = np.arange(kernel.n + 1)
    return np.cos(np.multiply.outer(t, k)) @ kernel.cosine


def kernel_eval_squared_form(kernel: JacksonKernel, t):
    """(1/pi) |sum_k a_k e^{ikt}|^2, the independent route to J_n(t)."""
    t = np.asarray(t, dtype=float)
    k = np.arange(kernel.n + 1)
    phase = np.exp(1j * np.multiply.outer(t, k))
    return np.abs(phase @ kernel.base.astype(complex)) ** 2 / np.pi


def _trapezoid_grid(quad_points: int):
    """Uniform periodic grid on [-pi, pi) with equal weights 2*pi/m."""
    m = int(quad_points)
    t = -np.pi + 2.0 * np.pi * np.arange(m) / m
    return t, 2.0 * np.pi / m


def kernel_checks(kernel: JacksonKernel, quad_points: int, moment_points: int = 2 ** 16,
                  sample_points: int = 512) -> dict:
    """Quadrature verification of normality, moment bound, and positivity.

    The periodic trapezoid rule is exact for trigonometric polynomials of
    degree < quad_points, so normality is checked exactly up to rounding.
    The |t| factor in the moment integral is not smooth; it is integrated
    on a fixed fine grid (moment_points) and only the inequality against
    pi^2/2 is reported, not an identity.
    """
    n = kernel.n
    if quad_points < 4 * (n + 2):
        raise QuadratureError(
            f"need at least {4 * (n + 2)} quadrature points for degree {n}")
    t, w = _trapezoid_grid(quad_points)
    normality = float(np.sum(kernel_eval(kernel, t)) * w)
    tm, wm = _trapezoid_grid(moment_points)
    scaled_first_moment = float(n * np.sum(np.abs(tm) * kernel_eval(kernel, tm)) * wm)
    ts = np.linspace(-np.pi, np.pi, sample_points)
    min_value = float(np.min(kernel_eval(kernel, ts)))
    return {
        "n": n,
        "normality": normality,
        "scaled_first_moment": scaled_first_moment,
        "min_value": min_value,
        "max_abs_cosine_coeff": float(np.max(np.abs(kernel.cosine))),
        "adjacent_sum_defect": adjacent_sum_defect(kernel),
    }


def adjacent_sum_defect(kernel: JacksonKernel) -> float:
    """|sum_k a_k a_{k+1} - cos(pi/(n+2))/2|; zero in exact arithmetic."""
    a = kernel.base
    s = float(np.dot(a[:-1], a[1:])) if kernel.n >= 1 else 0.0
    return abs(s - np.cos(np.pi / (kernel.n + 2)) / 2.0)


def checks_pass(record: dict, norm_tol: float = 1e-10, moment_tol: float = 1e-8,
                positivity_tol: float = 1e-12, adjacent_tol: float = 1e-12) -> bool:
    return bool(
        abs(record["normality"] - 1.0) <= norm_tol
        and record["scaled_first_moment"] <= MOMENT_BOUND + moment_tol
        and record["min_value"] >= -positivity_tol
        and record["max_abs_cosine_coeff"] <= COEFF_BOUND
        and record["adjacent_sum_defect"] <= adjacent_tol
    )
