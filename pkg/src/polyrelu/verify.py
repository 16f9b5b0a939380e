"""Measurement harness: grid sup errors, rate fits, support checks, bounds.

Everything here is deterministic: grids are uniform tensor products in
one and two dimensions and Halton sets in three, so repeated runs return
identical numbers and fitted rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Parallelepiped, exterior_points, halton, pp_to_cube_map

EPS_FLOOR = np.finfo(float).tiny


@dataclass
class ErrorLadder:
    """Rows of (size parameter, measured error, theoretical bound)."""
    ns: list = field(default_factory=list)
    measured: list = field(default_factory=list)
    bounds: list = field(default_factory=list)

    def add(self, n, measured, bound=np.inf):
        if measured < 0 or bound < 0:
            raise ValueError("errors and bounds must be nonnegative")
        self.ns.append(n)
        self.measured.append(float(measured))
        self.bounds.append(float(bound))

    def rows(self):
        return list(zip(self.ns, self.measured, self.bounds))


def region_grid(region, grid: int = 4096, seed: int = 0) -> np.ndarray:
    """Deterministic evaluation set for a region.

    Tuple (lo, hi) or Parallelepiped/Polytope/BoxUnion; `grid` is the
    total point budget.  Dimensions one and two use uniform tensor grids
    (endpoints included, so dyadic extrema are on-grid); dimension three
    and up uses a Halton set filtered to the region.
    """
    if isinstance(region, tuple):
        lo = np.asarray(region[0], dtype=float).ravel()
        hi = np.asarray(region[1], dtype=float).ravel()
        contains = None
    elif isinstance(region, Parallelepiped):
        lo, hi = None, None
    else:
        lo, hi = region.bounding_box()
        contains = region.contains

    if isinstance(region, Parallelepiped):
        d = region.dim
        _, inv = pp_to_cube_map(region)
        cube = region_grid((np.full(d, -1.0), np.ones(d)), grid=grid)
        return inv(cube)

    d = lo.shape[0]
    if d <= 2:
        per_axis = max(2, int(round(grid ** (1.0 / d))))
        axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
    else:
        pts = lo + halton(grid, d, offset=seed * 1_000_003) * (hi - lo)
    if contains is not None:
        keep = contains(pts)
        if not np.isscalar(keep):
            pts = pts[keep]
    if len(pts) == 0:
        raise ValueError("empty region sample")
    return pts


def sup_error(net, f, region, grid: int = 4096) -> dict:
    """Max |net(x) - f(x)| over a deterministic grid on the region."""
    pts = region_grid(region, grid=grid)
    vals = net.eval(pts)
    if vals.ndim == 2:
        vals = vals[:, 0]
    err = np.abs(vals - f(pts))
    i = int(np.argmax(err))
    return {"max_abs_error": float(err[i]), "argmax": pts[i].tolist(),
            "points": len(pts)}


def decay_fit(ladder, model: str = "power") -> dict:
    """Least-squares rate fit on an error ladder.

    power:       log m = slope * log n + c        (returns slope)
    power_log:   log m - log|ln n| = slope*log n + c   (x values are steps t)
    exponential: log m = c - rate * n             (returns decay rate)

    Nonpositive measured values are floored to the smallest positive
    double and flagged.
    """
    if isinstance(ladder, ErrorLadder):
        ns = np.asarray(ladder.ns, dtype=float)
        ms = np.asarray(ladder.measured, dtype=float)
    else:
        ns, ms = map(np.asarray, ladder)
        ns, ms = ns.astype(float), ms.astype(float)
    if len(ns) < 4:
        raise ValueError("need at least 4 ladder rows to fit a rate")
    floored = bool(np.any(ms <= 0))
    ms = np.maximum(ms, EPS_FLOOR)
    logm = np.log(ms)
    if model == "power":
        x = np.log(ns)
        y = logm
    elif model == "power_log":
        x = np.log(ns)
        y = logm - np.log(np.abs(np.log(ns)))
    elif model == "exponential":
        x = ns
        y = logm
    else:
        raise ValueError(f"unknown model {model!r}")
    A = np.column_stack([x, np.ones_like(x)])
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ sol
    slope = float(sol[0])
    spread = float(np.std(y))
    rms = float(np.sqrt(np.mean(resid ** 2)))
    out = {
        "model": model,
        "slope": slope,
        "intercept": float(sol[1]),
        # misfit normalized by the response spread: 0 for a perfect line,
        # near 1 when the model explains nothing; a shape check that does
        # not punish decay faster than the fitted law
        "residual": rms / spread if spread > 0 else (0.0 if rms == 0 else 1.0),
        "rms_residual": rms,
        "floored": floored,
    }
    if model == "exponential":
        out["rate"] = -slope
    return out


def support_check(net, domain, margin: float | None = None,
                  samples: int = 10_000, seed: int = 0) -> dict:
    """Max |net| over points outside the domain by at least `margin`."""
    if margin is None:
        margin = 1e-6 * max(domain.diameter, 1.0)
    pts = exterior_points(domain, samples, margin, seed=seed)
    vals = net.eval(pts)
    if vals.ndim == 2:
        vals = np.abs(vals).max(axis=1)
    else:
        vals = np.abs(vals)
    i = int(np.argmax(vals))
    return {"max_abs_outside": float(vals[i]), "argmax": pts[i].tolist(),
            "samples": samples, "margin": margin}


def grid_modulus(g, a: float, b: float, t: float, points: int = 10_000) -> float:
    """Modulus of a univariate function on a uniform grid of [a, b].

    sup |g(u) - g(v)| over grid pairs with |u - v| <= t; used as the
    empirical right-hand side of the smoothing-rate inequality.
    """
    xs = np.linspace(a, b, points)
    gv = np.asarray(g(xs), dtype=float)
    step = (b - a) / (points - 1)
    shifts = int(np.floor(t / step + 1e-12))
    best = 0.0
    for s in range(1, shifts + 1):
        best = max(best, float(np.abs(gv[s:] - gv[:-s]).max()))
    return best


def bound_table(n: int, N1: int, N2: int, d: int = 1, k_pieces: int = 1,
                M: float = 1.0, N_glue: int | None = None,
                a_max: float = 1.0) -> dict:
    """Closed-form error bounds used in report columns.

    poly_gadget:      a_max * n^2 * 2^(-2 N1 - 1)   (power-chain polynomials)
    cheb_gadget:      n^2 * 3^n * 2^(-2 N1 - 1)     (clipped Chebyshev unit)
    square_interp:    2^(-2 (N1 + 1))
    product:          2^(-2 N2)
    piece_combination: n^d 2^(-2 N2) + n^(d+2) 3^n 2^(-2 N1)
    glue_overhead:    (3/4) (k+2)^2 M 2^(-2 N_glue)
    glue_overhead_alt: (k+2)^2 M 2^(-2 N_glue)
    """
    if N_glue is None:
        N_glue = N2
    return {
        "poly_gadget": a_max * n ** 2 * 2.0 ** (-2 * N1 - 1),
        "cheb_gadget": n ** 2 * 3.0 ** n * 2.0 ** (-2 * N1 - 1),
        "square_interp": 2.0 ** (-2 * (N1 + 1)),
        "product": 2.0 ** (-2 * N2),
        "piece_combination": n ** d * 2.0 ** (-2 * N2)
        + n ** (d + 2) * 3.0 ** n * 2.0 ** (-2 * N1),
        "glue_overhead": 0.75 * (k_pieces + 2) ** 2 * M * 2.0 ** (-2 * N_glue),
        "glue_overhead_alt": (k_pieces + 2) ** 2 * M * 2.0 ** (-2 * N_glue),
    }
