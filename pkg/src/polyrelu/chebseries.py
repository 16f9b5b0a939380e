"""Chebyshev-series coefficients for target functions, and series evaluation.

Two coefficient routes share one tensor type:

  * kernel route: degree-n smoothing of f via the explicit kernel,
    written in the Chebyshev basis.  In one dimension the coefficients
    are c_k = hat_a_k * int f(cos t) cos(kt) dt; in d dimensions the
    tensor coefficients factor as hat_a_{j1} ... hat_a_{jd} times the
    corresponding multivariate cosine integral.  The resulting series
    is a contraction (sup never grows) and achieves the Jackson rate.
  * interpolation route: tensor Chebyshev interpolation on the
    Chebyshev-Lobatto grid, for targets smooth enough that geometric
    coefficient decay makes interpolation the better compile input.

All integrals use the uniform periodic trapezoid rule, which is exact
for the trigonometric-polynomial factors at the chosen resolutions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BudgetError, QuadratureError
from .kernel import jackson_hat_coeffs

DEFAULT_QUAD_FACTOR = 32
DEFAULT_COEFF_BUDGET = 50_000_000


@dataclass(frozen=True)
class TargetFn:
    """A named target: evaluator maps an (m, d) batch of points to (m,) values."""
    name: str
    dim: int
    fn: Callable[[np.ndarray], np.ndarray]
    params: tuple = field(default_factory=tuple)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if self.dim == 1 else x[None, :]
        out = np.asarray(self.fn(x), dtype=float)
        if not np.all(np.isfinite(out)):
            raise ValueError(f"target {self.name!r} produced non-finite values")
        return out


@dataclass
class ChebTensor:
    """Dense tensor of Chebyshev-series coefficients, shape (n+1,)*d."""
    dim: int
    degree: int
    coeffs: np.ndarray
    path: str = "kernel"  # which route produced it: "kernel" | "interp"

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        expected = (self.degree + 1,) * self.dim
        if self.coeffs.shape != expected:
            raise ValueError(f"coeff shape {self.coeffs.shape} != {expected}")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite coefficients")
        if self.path not in ("kernel", "interp"):
            raise ValueError(f"unknown path {self.path!r}")

    def to_json(self) -> str:
        return json.dumps({
            "dim": self.dim,
            "degree": self.degree,
            "path": self.path,
            "coeffs": self.coeffs.ravel().tolist(),
        })

    @classmethod
    def from_json(cls, text) -> "ChebTensor":
        d = json.loads(text)
        n = int(d["degree"])
        coeffs = np.array(d["coeffs"], dtype=float).reshape((n + 1,) * int(d["dim"]))
        return cls(int(d["dim"]), n, coeffs, d["path"])


def _periodic_grid(m: int):
    return -np.pi + 2.0 * np.pi * np.arange(m) / m


def cheb_coeff_1d(f, n: int, quad_points: int | None = None) -> np.ndarray:
    """Kernel-route coefficients c_0..c_n for f on [-1, 1]."""
    if quad_points is None:
        quad_points = DEFAULT_QUAD_FACTOR * (n + 2)
    if quad_points < 8 * (n + 2):
        raise QuadratureError(
            f"need at least {8 * (n + 2)} quadrature points for degree {n}")
    hat = jackson_hat_coeffs(n)
    t = _periodic_grid(quad_points)
    fx = np.asarray(f(np.cos(t)), dtype=float).ravel()
    cos_kt = np.cos(np.outer(np.arange(n + 1), t))
    integrals = cos_kt @ fx * (2.0 * np.pi / quad_points)
    return hat * integrals


def cheb_coeff_tensor(f, n: int, d: int, quad_points: int | None = None,
                      budget: int = DEFAULT_COEFF_BUDGET) -> ChebTensor:
    """Kernel-route coefficient tensor for f on [-1, 1]^d."""
    if quad_points is None:
        quad_points = DEFAULT_QUAD_FACTOR * (n + 2)
    if quad_points < 8 * (n + 2):
        raise QuadratureError(
            f"need at least {8 * (n + 2)} quadrature points for degree {n}")
    cost = d * (n + 1) ** d * quad_points
    if cost > budget:
        raise BudgetError(f"coefficient cost {cost} exceeds budget {budget}")
    t = _periodic_grid(quad_points)
    x = np.cos(t)
    mesh = np.meshgrid(*([x] * d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    vals = np.asarray(f(pts), dtype=float).reshape((quad_points,) * d)
    cosw = np.cos(np.outer(np.arange(n + 1), t)) * (2.0 * np.pi / quad_points)
    out = vals
    for _ in range(d):
        # contract the leading quadrature axis, cycling it to the back
        out = np.tensordot(cosw, out, axes=(1, 0))
        out = np.moveaxis(out, 0, -1)
    hat = jackson_hat_coeffs(n)
    scale = hat
    for _ in range(d - 1):
        scale = np.multiply.outer(scale, hat)
    return ChebTensor(d, n, out * scale, path="kernel")


def cheb_interp_coeffs_1d(values: np.ndarray) -> np.ndarray:
    """Interpolation coefficients from values on cos(i pi / n), i = 0..n."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0] - 1
    if n == 0:
        return values.copy()
    i = np.arange(n + 1)
    w = np.ones(n + 1)
    w[0] = w[n] = 0.5
    mat = np.cos(np.outer(i, i) * np.pi / n) * w  # (coeff index, node index)
    c = (2.0 / n) * (mat @ values)
    c[0] *= 0.5
    c[n] *= 0.5
    return c


def cheb_interp_tensor(f, n: int, d: int) -> ChebTensor:
    """Tensor Chebyshev interpolation coefficients on the Lobatto grid."""
    nodes = np.cos(np.arange(n + 1) * np.pi / n) if n > 0 else np.array([1.0])
    mesh = np.meshgrid(*([nodes] * d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    vals = np.asarray(f(pts), dtype=float).reshape((n + 1,) * d)
    out = vals
    for _ in range(d):
        out = np.apply_along_axis(cheb_interp_coeffs_1d, 0, out)
        out = np.moveaxis(out, 0, -1)
    return ChebTensor(d, n, out, path="interp")


def _clenshaw_last_axis(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Backward recurrence along the last coefficient axis.

    coeffs has shape (..., n+1); x has shape (m,).  Returns (..., m).
    """
    n = coeffs.shape[-1] - 1
    shape = coeffs.shape[:-1] + x.shape
    b1 = np.zeros(shape)
    b2 = np.zeros(shape)
    for k in range(n, 0, -1):
        b1, b2 = coeffs[..., k, None] + 2.0 * x * b1 - b2, b1
    return coeffs[..., 0, None] + x * b1 - b2


def _clenshaw_pointwise(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Backward recurrence along axis -2 with a per-point argument.

    coeffs has shape (..., n+1, m); x has shape (m,).  Returns (..., m).
    """
    n = coeffs.shape[-2] - 1
    shape = coeffs.shape[:-2] + coeffs.shape[-1:]
    b1 = np.zeros(shape)
    b2 = np.zeros(shape)
    for k in range(n, 0, -1):
        b1, b2 = coeffs[..., k, :] + 2.0 * x * b1 - b2, b1
    return coeffs[..., 0, :] + x * b1 - b2


def cheb_series_eval(tensor: ChebTensor, x) -> np.ndarray:
    """Evaluate the series at a point or an (m, d) batch of points."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 0 or (pts.ndim == 1 and tensor.dim > 1)
    if pts.ndim == 0:
        pts = pts[None, None]
    elif pts.ndim == 1:
        pts = pts[None, :] if tensor.dim > 1 else pts[:, None]
    if pts.shape[1] != tensor.dim:
        raise ValueError(f"points have dim {pts.shape[1]}, tensor dim {tensor.dim}")
    out = _clenshaw_last_axis(tensor.coeffs, pts[:, tensor.dim - 1])
    for axis in range(tensor.dim - 2, -1, -1):
        out = _clenshaw_pointwise(out, pts[:, axis])
    return out[0] if single else out


def chebyshev_monomial_coeffs(n: int) -> np.ndarray:
    """Rows k = 0..n give the monomial coefficients of T_k (exact integers).

    The three-term recurrence keeps every entry an integer; entries stay
    exactly representable in binary64 for n <= 50.
    """
    if n > 50:
        raise ValueError("monomial coefficients of T_k overflow binary64 past degree 50")
    c = np.zeros((n + 1, n + 1))
    c[0, 0] = 1.0
    if n >= 1:
        c[1, 1] = 1.0
    for k in range(2, n + 1):
        c[k, 1:] = 2.0 * c[k - 1, :-1]
        c[k] -= c[k - 2]
    return c


def chebyshev_value(k: int, x):
    """T_k(x) by the three-term recurrence (test oracle, never cos powers)."""
    x = np.asarray(x, dtype=float)
    t0, t1 = np.ones_like(x), x.copy()
    if k == 0:
        return t0
    for _ in range(k - 1):
        t0, t1 = t1, 2.0 * x * t1 - t0
    return t1
