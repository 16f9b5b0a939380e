"""End-to-end synthesis: per-piece networks, plateau masks, and gluing.

A piece network approximates f on one parallelepiped E of the covering:
the coordinates are mapped to the reference cube, clipped, raised to
powers through chained product gadgets, combined per axis into Chebyshev
readouts weighted by the smoothing (or interpolation) coefficients, and
contracted across axes through scaled product gadgets.  A final
soft-threshold gate against the piece's plateau mask pins the support:
the gate passes the polynomial value unchanged on the shrunken piece,
shrinks it to zero across the margin band, and outputs a hard zero
outside E (its pre-activations sit below a negative margin there, which
no floating-point reordering can flip).

Gluing folds the pieces with their masks,

    glued_1 = piece_1,
    glued_j = gate(piece_j, mask_j) + gate(glued_{j-1}, 1 - mask_j),

so later pieces overwrite earlier ones on their shrunken cores, earlier
values survive outside, and the support never grows.  On the reliable
region (every mask exactly 0 or 1) the fold is exact up to rounding, far
inside the product-gadget overhead budget it is compared against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .chebseries import (DEFAULT_COEFF_BUDGET, cheb_coeff_tensor,
                         cheb_interp_tensor, cheb_series_eval,
                         chebyshev_monomial_coeffs)
from .errors import InvariantError
from .gadgets import Builder, LayerSpec, Val, clip_block, gate_bank, \
    plateau_block, product_bank
from .geometry import (Covering, Parallelepiped, pp_contains, pp_dilate,
                       pp_to_cube_map)
from .netir import ReluNetwork, compose, size_report, stack
from .verify import ErrorLadder, bound_table, decay_fit, region_grid, support_check


@dataclass
class CompileParams:
    """Accuracy knobs for one compile run.

    Unset accuracies follow the defaults: N1 = n and
    N2 = ceil((d + alpha)/2 * log2 n) on the continuous path; on the
    analytic path both default to 2n + 16 so gadget error decays faster
    than any geometric coefficient tail.  N_glue defaults to N2; the clip
    margin delta defaults to 1 - lam so the clipped interval matches the
    shrunken piece.
    """
    n: int = 8
    N1: int | None = None
    N2: int | None = None
    N_glue: int | None = None
    alpha: float = 2.0
    lam: float = 0.9
    delta: float | None = None
    M: float | None = None
    path: str = "continuous"
    quad_points: int | None = None
    budget: int = DEFAULT_COEFF_BUDGET
    ladder: tuple = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("degree must be >= 1")
        if not 0.0 < self.lam < 1.0:
            raise ValueError("shrink factor must lie in (0, 1)")
        if self.path not in ("continuous", "analytic"):
            raise ValueError(f"unknown path {self.path!r}")
        if self.delta is not None and not 0.0 < self.delta < 1.0:
            raise ValueError("clip margin must lie in (0, 1)")

    def resolved(self, d: int) -> "CompileParams":
        n1, n2 = self.N1, self.N2
        if self.path == "analytic":
            n1 = n1 if n1 is not None else 2 * self.n + 16
            n2 = n2 if n2 is not None else 2 * self.n + 16
        else:
            n1 = n1 if n1 is not None else self.n
            n2 = n2 if n2 is not None else \
                max(1, math.ceil((d + self.alpha) / 2.0
                                 * math.log2(max(self.n, 2))))
        return replace(self, N1=n1, N2=n2,
                       N_glue=self.N_glue if self.N_glue is not None else n2,
                       delta=self.delta if self.delta is not None else 1.0 - self.lam)


def mask_fold(spec: LayerSpec, coord_vals, delta: float):
    """Plateau blocks per coordinate plus an intra min-fold.

    Emits, inside the given layer, a trapezoid plateau per coordinate and
    the running minimum min(p_1, .., p_d) materialized one neuron at a
    time (every intra pre-activation touches exactly two neurons, so the
    fold stays exact at the 0/1 plateaus).  Returns the local index of
    the final mask neuron.
    """
    ps = [plateau_block(spec, v, delta) + 2 for v in coord_vals]
    cur = ps[0]
    zero = Val(np.zeros(spec.in_dim))
    for p in ps[1:]:
        q = spec.neuron(zero, intra=[(p, 1.0), (cur, -1.0)])   # sigma(p - cur)
        cur = spec.neuron(zero, intra=[(p, 1.0), (q, -1.0)])   # min(p, cur)
    return cur


def fast_decreasing_net(E: Parallelepiped, lam: float) -> ReluNetwork:
    """Plateau mask of E: exactly 1 on the lam-shrunken piece, exactly 0
    outside E, in [0, 1] between; single intra-linked layer."""
    if not 0.0 < lam < 1.0:
        raise ValueError("shrink factor must lie in (0, 1)")
    fwd, _ = pp_to_cube_map(E)
    d = E.dim
    b = Builder(d)
    b.prepend_affine(fwd.matrix, fwd.bias)
    spec = LayerSpec(d)
    mask = mask_fold(spec, [b.e(i) for i in range(d)], 1.0 - lam)
    b.push(spec)
    return b.finish(b.e(mask))


def _chain_powers(builder, axis_units, n, N1, mask_val, extra_pass):
    """Chained powers h_2..h_n per axis with shared passthrough plumbing.

    axis_units: list of clip functionals u_i.  Returns (history, mask,
    extras) where history[i][j] is the power-j functional of axis i.
    """
    d = len(axis_units)
    us = list(axis_units)
    hist = [[None, us[i]] for i in range(d)]  # hist[i][j] ~ u_i^j
    mask = mask_val
    extras = list(extra_pass)
    for j in range(2, n + 1):
        units = [(us[i], hist[i][j - 1], 1.0, 1.0) for i in range(d)]
        passthrough = [(us[i], False) for i in range(d)]
        passthrough += [(hist[i][jj], False)
                        for i in range(d) for jj in range(2, j)]
        passthrough.append((mask, True))
        passthrough += [(v, False) for v in extras]
        outs, passed = product_bank(builder, units, passthrough, N1)
        us = passed[:d]
        k = d
        for i in range(d):
            for jj in range(2, j):
                hist[i][jj] = passed[k]
                k += 1
        mask = passed[k]
        k += 1
        extras = passed[k:]
        for i in range(d):
            hist[i][1] = us[i]
            hist[i].append(outs[i])
    return hist, mask, extras


def _cheb_readouts(hist_axis, mono) -> list:
    """Chebyshev readout functionals over one axis's power history."""
    n = len(mono) - 1
    outs = []
    for k in range(n + 1):
        val = Val(np.zeros(hist_axis[1].row.shape[0]), mono[k][0])
        for j in range(1, k + 1):
            if mono[k][j] != 0.0:
                val = val + hist_axis[j] * mono[k][j]
        outs.append(val)
    return outs


def _power_error_bounds(n: int, N1: int, mono) -> np.ndarray:
    """Rigorous sup bounds for |readout_k - T_k| on the clipped interval.

    Chained products add at most 2^(-2 N1 - 2) per stage, so power j is
    off by (j-1) 2^(-2 N1 - 2) and the readout inherits the weighted sum.
    """
    unit = 2.0 ** (-2 * N1 - 2)
    errs = np.zeros(n + 1)
    for k in range(n + 1):
        errs[k] = sum(abs(mono[k][j]) * (j - 1) * unit for j in range(2, k + 1))
    return errs


def compile_piece(f, E: Parallelepiped, params: CompileParams):
    """Network approximating f on the lam-core of E, vanishing outside E.

    Returns (net, report).  The report carries the measured sup error on
    the shrunken piece, the measured polynomial (series) error, the
    rigorous gadget budget, the official budget formulas, a global output
    bound, and size accounting.
    """
    d = E.dim
    p = params.resolved(d)
    n = p.n
    fwd, inv = pp_to_cube_map(E)

    def on_cube(u):
        return f(inv.apply(np.atleast_2d(u)))

    if p.path == "analytic":
        tensor = cheb_interp_tensor(on_cube, n, d)
    else:
        tensor = cheb_coeff_tensor(on_cube, n, d, quad_points=p.quad_points,
                                   budget=p.budget)

    mono = chebyshev_monomial_coeffs(n)
    err_t = _power_error_bounds(n, p.N1, mono)
    bt = 1.0 + err_t  # global bound of each readout (clip keeps |u| <= 1)

    b = Builder(d)
    b.prepend_affine(fwd.matrix, fwd.bias)
    spec = LayerSpec(d)
    clip_bases = [clip_block(spec, b.e(i), p.delta) for i in range(d)]
    mask_local = mask_fold(spec, [b.e(i) for i in range(d)], 1.0 - p.lam)
    b.push(spec)
    us = [b.e(cb + 1) - b.e(cb + 3) for cb in clip_bases]
    mask = b.e(mask_local)

    if n >= 2:
        hist, mask, _ = _chain_powers(b, us, n, p.N1, mask, [])
    else:
        hist = [[None, us[i]] for i in range(d)]

    coeffs = tensor.coeffs
    abs_coeffs = np.abs(coeffs)
    reads = [_cheb_readouts(hist[i], mono) for i in range(d)]

    # innermost axis: plain linear combinations over the last index
    vals = np.empty((n + 1,) * (d - 1), dtype=object) if d > 1 else None
    if d == 1:
        total = Val(np.zeros(b.cur))
        for k in range(n + 1):
            if coeffs[k] != 0.0:
                total = total + reads[0][k] * coeffs[k]
        bound = float(abs_coeffs @ bt)
        gadget_err = float(abs_coeffs @ err_t)
    else:
        bound_arr = np.tensordot(abs_coeffs, bt, axes=(d - 1, 0))
        err_arr = np.tensordot(abs_coeffs, err_t, axes=(d - 1, 0))
        for idx in np.ndindex(*(n + 1,) * (d - 1)):
            v = Val(np.zeros(b.cur))
            for k in range(n + 1):
                c = coeffs[idx + (k,)]
                if c != 0.0:
                    v = v + reads[d - 1][k] * c
            vals[idx] = v
        # contract axes d-2 .. 0 through scaled product banks
        for axis in range(d - 2, -1, -1):
            lead = (n + 1,) * axis
            new_vals = np.empty(lead, dtype=object) if axis else None
            new_bound = np.zeros(lead)
            new_err = np.zeros(lead)
            units, meta = [], []
            for idx in np.ndindex(*lead):
                for k in range(n + 1):
                    sub = idx + (k,)
                    bx = max(float(bound_arr[sub]), 1e-300)
                    units.append((vals[sub], reads[axis][k], bx, float(bt[k])))
                    meta.append((idx, k, bx))
            passthrough = [(mask, True)]
            for i in range(axis):
                for j in range(1, n + 1):
                    passthrough.append((hist[i][j], False))
            outs, passed = product_bank(b, units, passthrough, p.N2)
            mask = passed[0]
            kpos = 1
            for i in range(axis):
                for j in range(1, n + 1):
                    hist[i][j] = passed[kpos]
                    kpos += 1
            reads = [_cheb_readouts(hist[i], mono) if i < axis else None
                     for i in range(d)]
            acc = {}
            for out, (idx, k, bx) in zip(outs, meta):
                acc.setdefault(idx, Val(np.zeros(b.cur)))
                acc[idx] = acc[idx] + out
                new_bound[idx] += bx * bt[k]
                new_err[idx] += (bx * bt[k] * 2.0 ** (-2 * p.N2 - 2)
                                 + bx * err_t[k] + err_arr[idx + (k,)])
            if axis:
                for idx in np.ndindex(*lead):
                    new_vals[idx] = acc[idx]
                vals, bound_arr, err_arr = new_vals, new_bound, new_err
            else:
                total = acc[()]
                bound = float(new_bound[()])
                gadget_err = float(new_err[()])

    m_gate = 1.05 * bound + 1e-9
    outs, _ = gate_bank(b, [(total, mask, m_gate)], [])
    net = b.finish(outs[0])

    core = pp_dilate(E, p.lam)
    grid = region_grid(core, grid=4096 if d == 1 else 16384)
    fx = f(grid)
    series = cheb_series_eval(tensor, fwd.apply(grid))
    net_vals = net.eval(grid)[:, 0]
    series_err = float(np.abs(series - fx).max())
    measured = float(np.abs(net_vals - fx).max())
    full_grid = region_grid(E, grid=4096 if d == 1 else 16384)
    sup_net = float(np.abs(net.eval(full_grid)[:, 0]).max())
    report = {
        "dim": d,
        "n": n,
        "N1": p.N1,
        "N2": p.N2,
        "path": p.path,
        "sup_error": measured,
        "series_error": series_err,
        "gadget_budget": gadget_err + 1e-12 * m_gate,
        "budget": series_err + gadget_err + 1e-12 * m_gate,
        "official_budget": series_err
        + bound_table(n, p.N1, p.N2, d=d)["piece_combination"],
        "output_bound": m_gate,
        "sup_abs": sup_net,
        "M_exceeded": bool(p.M is not None and sup_net > p.M),
        **size_report(net),
    }
    return net, report


def glue(pieces, lam: float, N_glue: int, M: float | None = None,
         piece_bounds=None):
    """Fold piece networks with their plateau masks.

    pieces: list of (ReluNetwork, Parallelepiped) in gluing order; later
    pieces take precedence on their shrunken cores.  M (or per-piece
    piece_bounds) must dominate each network's output everywhere; it sets
    the gate thresholds and the reported overhead bound
    (3/4)(k+2)^2 M 2^(-2 N_glue).

    Returns (net, report).
    """
    pieces = list(pieces)
    k = len(pieces)
    if k == 0:
        raise ValueError("nothing to glue")
    if piece_bounds is None:
        if M is None:
            raise ValueError("need M or per-piece bounds")
        piece_bounds = [float(M)] * k
    for j, (net, E) in enumerate(pieces):
        sample = region_grid(E, grid=2048)
        sup = float(np.abs(net.eval(sample)).max())
        if sup > piece_bounds[j]:
            raise InvariantError(
                f"piece {j} reaches {sup}, above its declared bound "
                f"{piece_bounds[j]}")
    m_total = float(max(piece_bounds))
    if k == 1:
        report = {"pieces": 1, "overhead_bound": 0.0,
                  "overhead_bound_alt": 0.0, "order": [0]}
        return pieces[0][0], report

    # gluing is order dependent on overlaps: record how much of each piece
    # is already claimed by earlier pieces at its turn
    overlaps = []
    for j in range(1, k):
        sample = region_grid(pieces[j][1], grid=2048)
        earlier = np.zeros(len(sample), dtype=bool)
        for _, E in pieces[:j]:
            earlier |= pp_contains(E, sample, tol=1e-12)
        overlaps.append(float(np.mean(earlier)))

    masks = [fast_decreasing_net(E, lam) for _, E in pieces[1:]]
    stacked = stack([net for net, _ in pieces] + masks)

    b = Builder(stacked.out_dim)
    piece_vals = [b.e(j) for j in range(k)]
    mask_vals = [b.e(k + j) for j in range(k - 1)]
    cur = piece_vals[0]
    cur_bound = piece_bounds[0]
    for j in range(1, k):
        units = [
            (piece_vals[j], mask_vals[j - 1], piece_bounds[j]),
            (cur, Val(-mask_vals[j - 1].row, 1.0 - mask_vals[j - 1].bias),
             cur_bound),
        ]
        passthrough = [(piece_vals[l], False) for l in range(j + 1, k)]
        passthrough += [(mask_vals[l - 1], True) for l in range(j + 1, k)]
        outs, passed = gate_bank(b, units, passthrough)
        cur = outs[0] + outs[1]
        cur_bound = cur_bound + piece_bounds[j]
        piece_vals = [None] * (j + 1) + passed[: k - j - 1]
        mask_vals = [None] * j + passed[k - j - 1:]
    fold = b.finish(cur)
    net = compose(fold, stacked)
    bounds = bound_table(1, 1, N_glue, k_pieces=k, M=m_total, N_glue=N_glue)
    report = {
        "pieces": k,
        "M": m_total,
        "N_glue": N_glue,
        "overhead_bound": bounds["glue_overhead"],
        "overhead_bound_alt": bounds["glue_overhead_alt"],
        "order": list(range(k)),
        "overlap_fractions": overlaps,
    }
    return net, report


def k_prime_mask(pieces, lam: float, pts: np.ndarray) -> np.ndarray:
    """Points of the covered region lying in no shrink margin.

    A point qualifies if some shrunken piece contains it and every piece
    either contains it in its shrunken core or misses it entirely.
    """
    pts = np.atleast_2d(pts)
    in_core = np.zeros(len(pts), dtype=bool)
    in_margin = np.zeros(len(pts), dtype=bool)
    for E in pieces:
        inside = pp_contains(E, pts, tol=1e-12)
        core = pp_contains(pp_dilate(E, lam), pts, tol=1e-12)
        in_core |= core
        in_margin |= inside & ~core
    return in_core & ~in_margin


def compile(f, domain, covering: Covering, params: CompileParams):
    """Full pipeline: compile every piece, glue, and measure.

    Returns (net, report).  The report records per-piece errors and
    budgets, glue overheads (bound and measured), the exterior support
    leak (which must be exactly zero), the sup error over the reliable
    region, size accounting with the width/depth ratio columns, and a
    fitted decay rate when params.ladder lists degrees to sweep.
    """
    if not covering.validated:
        raise InvariantError("covering must be validated before compiling")
    p = params.resolved(covering.pieces[0].dim)

    def build(pp: CompileParams):
        piece_nets, piece_reports = [], []
        for E in covering.pieces:
            net, rep = compile_piece(f, E, pp)
            piece_nets.append((net, E))
            piece_reports.append(rep)
        bounds = [rep["output_bound"] for rep in piece_reports]
        glued, glue_rep = glue(piece_nets, pp.lam, pp.N_glue,
                               M=pp.M, piece_bounds=bounds)
        return glued, piece_nets, piece_reports, glue_rep

    glued, piece_nets, piece_reports, glue_rep = build(p)
    # declared sup bound for the overhead columns: user value, else the
    # measured piece sup with a 5% safety factor (gates themselves use
    # the rigorous coefficient bounds)
    m_declared = p.M if p.M is not None else \
        1.05 * max(r["sup_abs"] for r in piece_reports)
    k = len(covering.pieces)
    tab = bound_table(1, 1, p.N_glue, k_pieces=k, M=m_declared, N_glue=p.N_glue)
    glue_rep = {**glue_rep, "M_declared": m_declared,
                "overhead_bound": tab["glue_overhead"],
                "overhead_bound_alt": tab["glue_overhead_alt"]}

    pts = np.vstack([region_grid(E, grid=4096 if p.path == "analytic" or
                                 covering.pieces[0].dim == 1 else 16384)
                     for E in covering.pieces])
    keep = k_prime_mask(covering.pieces, p.lam, pts)
    kp = pts[keep]
    fx = f(kp)
    gv = glued.eval(kp)[:, 0]
    k_prime_error = float(np.abs(gv - fx).max())
    # the shrink margins carry no accuracy claim; their error is reported
    # separately so the reliable-region number stays meaningful
    tr = pts[~keep]
    trifling_error = float(np.abs(glued.eval(tr)[:, 0] - f(tr)).max()) \
        if len(tr) else 0.0

    # glue overhead: departure from the piece active at each point
    active = np.full(len(kp), -1)
    for j, E in enumerate(covering.pieces):
        core = pp_contains(pp_dilate(E, p.lam), kp, tol=1e-12)
        active[core] = j
    overhead = 0.0
    for j, (pnet, _) in enumerate(piece_nets):
        sel = active == j
        if np.any(sel):
            pv = pnet.eval(kp[sel])[:, 0]
            overhead = max(overhead, float(np.abs(gv[sel] - pv).max()))

    leak = support_check(glued, domain, samples=10_000)
    sizes = size_report(glued)
    nn = float(p.n)
    d = covering.pieces[0].dim
    report = {
        "params": {"n": p.n, "N1": p.N1, "N2": p.N2, "N_glue": p.N_glue,
                   "alpha": p.alpha, "lambda": p.lam, "delta": p.delta,
                   "path": p.path},
        "per_piece": piece_reports,
        "glue": {**glue_rep, "measured": overhead},
        "support_leak": leak["max_abs_outside"],
        "support_leak_argmax": leak["argmax"],
        "K_prime_error": k_prime_error,
        "K_prime_points": int(keep.sum()),
        "trifling_error": trifling_error,
        "budget_max": max(r["budget"] for r in piece_reports),
        **sizes,
        "width_ratio": sizes["width"] / max(nn ** 3,
                                            nn ** max(d - 1, 1) * math.log2(nn + 1)),
        "depth_ratio": sizes["depth"] / math.log2(nn + 1),
    }

    if p.ladder:
        ladder = ErrorLadder()
        for n_i in p.ladder:
            pp = replace(params, n=int(n_i)).resolved(d)
            g_i, _, reps_i, _ = build(pp)
            v_i = g_i.eval(kp)[:, 0]
            err_i = float(np.abs(v_i - fx).max())
            ladder.add(int(n_i), err_i, max(r["budget"] for r in reps_i))
        model = "exponential" if p.path == "analytic" else "power"
        report["ladder"] = [{"n": a, "error": m, "budget": bd}
                            for a, m, bd in ladder.rows()]
        report["ladder_fit"] = decay_fit(ladder, model=model)
    return glued, report
