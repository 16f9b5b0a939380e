"""Command-line frontend: kernel-check, modulus, compile, eval, verify, demo.

Exit codes: 0 success, 2 config or usage error, 3 invariant violation
(support leak, covering failure, failed kernel check), 4 budget exceeded.
All runs are deterministic given the config and seed.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys

import numpy as np

from . import compiler, gadgets, geometry, kernel, netir, verify
from .chebseries import TargetFn, chebyshev_value
from .errors import BudgetError, ConfigError, InvariantError


# ---------------------------------------------------------------------------
# target function registry

def _fn_constant(params):
    c = params[0] if params else 1.0
    return lambda p: np.full(p.shape[0], float(c))


def _fn_identity_sum(params):
    return lambda p: p.sum(axis=1)


def _fn_abs_sum(params):
    def f(p):
        shift = np.asarray(params, dtype=float) if params else np.zeros(p.shape[1])
        return np.abs(p - shift).sum(axis=1)
    return f


def _fn_x13lnx(params):
    def f(p):
        x = p[:, 0]
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = -np.cbrt(x[pos]) * np.log(x[pos])
        return out
    return f


def _fn_max_exp_diff(params):
    return lambda p: np.maximum(np.exp(p[:, 0] - p[:, 1]), np.exp(p[:, 1] - p[:, 0]))


def _fn_rot_sqrt_log(params):
    """Diagonal-singular square example; params = [cutoff_radius] or none."""
    r0 = float(params[0]) if params else None

    def f(p):
        x, y = p[:, 0], p[:, 1]
        r2 = x * x + y * y
        out = np.zeros_like(x)
        ok = r2 > 0
        out[ok] = np.sqrt(np.abs(x[ok] ** 2 - y[ok] ** 2) / 2.0) \
            * np.log(1.0 / r2[ok])
        if r0 is not None:
            # radial cosine taper to zero at r0 (smooth cutoff variant)
            r = np.sqrt(r2)
            taper = np.clip(1.0 - r / r0, 0.0, 1.0)
            out *= np.sin(0.5 * np.pi * np.minimum(taper * 2.0, 1.0)) ** 2
        return out
    return f


def _fn_exp_sum(params):
    return lambda p: np.exp(p.sum(axis=1))


def _fn_runge(params):
    a = float(params[0]) if params else 25.0
    return lambda p: 1.0 / (1.0 + a * (p ** 2).sum(axis=1))


def _fn_cheb(params):
    k = int(params[0]) if params else 1
    return lambda p: chebyshev_value(k, p[:, 0])


def _fn_poly(params):
    coeffs = np.asarray(params, dtype=float)

    def f(p):
        x = p[:, 0]
        out = np.zeros_like(x)
        for c in coeffs[::-1]:
            out = out * x + c
        return out
    return f


FUNCTION_REGISTRY = {
    "constant": _fn_constant,
    "identity_sum": _fn_identity_sum,
    "abs_sum": _fn_abs_sum,
    "x13lnx": _fn_x13lnx,
    "max_exp_diff": _fn_max_exp_diff,
    "rot_sqrt_log": _fn_rot_sqrt_log,
    "exp_sum": _fn_exp_sum,
    "runge": _fn_runge,
    "cheb": _fn_cheb,
    "poly": _fn_poly,
}


def make_target(name: str, dim: int, params=()) -> TargetFn:
    """Resolve a registry name like "cheb:3" or ("poly", [1, 0, 2])."""
    params = list(params)
    if ":" in name:
        name, arg = name.split(":", 1)
        params = [float(v) for v in arg.split(",")] + params
    if name not in FUNCTION_REGISTRY:
        raise ConfigError(f"unknown function {name!r}; known: "
                          f"{sorted(FUNCTION_REGISTRY)}")
    return TargetFn(name, dim, FUNCTION_REGISTRY[name](params), tuple(params))


# ---------------------------------------------------------------------------
# config parsing

def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None


def _require(cfg, key, types, where):
    if key not in cfg:
        raise ConfigError(f"missing {key!r} in {where}")
    if not isinstance(cfg[key], types):
        raise ConfigError(f"{key!r} in {where} has wrong type")
    return cfg[key]


def domain_from_config(cfg) -> tuple:
    """Returns (domain object, dim) from a polytope/box-union config."""
    if "boxes" in cfg:
        boxes = [(b[0], b[1]) for b in cfg["boxes"]]
        dom = geometry.BoxUnion(boxes)
        return dom, dom.dim
    if "interval" in cfg:
        a, b = cfg["interval"]
        return geometry.Polytope.interval(a, b), 1
    if "box" in cfg:
        lo, hi = cfg["box"]
        dom = geometry.Polytope.box(lo, hi)
        return dom, dom.dim
    verts = _require(cfg, "vertices", list, "polytope")
    if "halfspaces" in cfg:
        hs = [(h["normal"], h["offset"]) for h in cfg["halfspaces"]]
        dom = geometry.Polytope(np.array(verts, dtype=float), hs,
                                edge_dirs=cfg.get("edges"))
    elif len(verts[0]) == 2:
        dom = geometry.Polytope.from_vertices_2d(verts)
    else:
        raise ConfigError("need halfspaces for non-2d vertex polytopes")
    return dom, dom.dim


def covering_from_config(cfg, domain, lam, seed=0) -> geometry.Covering:
    if "covering" in cfg:
        pieces = [geometry.Parallelepiped(np.array(p["corner"], dtype=float),
                                          np.array(p["edges"], dtype=float))
                  for p in cfg["covering"]]
        return geometry.validate_covering(domain, pieces, lam, seed=seed)
    if isinstance(domain, geometry.BoxUnion):
        cov = geometry.auto_cover_box_union(domain.boxes, lam)
        return geometry.validate_covering(domain, cov.pieces, lam, seed=seed)
    raise ConfigError("config needs a covering (or a box-union domain)")


def params_from_config(cfg) -> compiler.CompileParams:
    keys = {"n", "N1", "N2", "N_glue", "alpha", "lambda", "delta", "M",
            "path", "quad_points", "budget", "ladder"}
    unknown = set(cfg) - keys
    if unknown:
        raise ConfigError(f"unknown compile params {sorted(unknown)}")
    kw = dict(cfg)
    if "lambda" in kw:
        kw["lam"] = kw.pop("lambda")
    if "ladder" in kw:
        kw["ladder"] = tuple(kw["ladder"])
    try:
        return compiler.CompileParams(**kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad compile params: {e}") from None


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------------------
# subcommands

def cmd_kernel_check(args) -> int:
    ns = [int(v) for v in args.n.split(",")]
    records = []
    ok = True
    for n in ns:
        ker = kernel.JacksonKernel(n)
        quad = args.quad_points if args.quad_points else 4 * (n + 2)
        rec = kernel.kernel_checks(ker, quad)
        rec["pass"] = kernel.checks_pass(rec)
        ok &= rec["pass"]
        records.append(rec)
    print(json.dumps(records, indent=2))
    if args.out:
        _write_json(os.path.join(args.out, "kernel_check.json"), records)
    return 0 if ok else 3


def cmd_modulus(args) -> int:
    cfg = _load_json(args.config)
    dom, dim = domain_from_config(_require(cfg, "polytope", dict, "config"))
    fn_cfg = _require(cfg, "function", dict, "config")
    target = make_target(fn_cfg["name"], dim, fn_cfg.get("params", ()))
    ts = np.asarray(_require(cfg, "t_ladder", list, "config"), dtype=float)
    n_x = int(cfg.get("n_x", 512))
    dt = geometry.dt_modulus_ladder(target, dom, ts, n_x=n_x, seed=args.seed)
    ordinary = geometry.ordinary_modulus_ladder(target, dom, ts, n_pairs=n_x,
                                                seed=args.seed)
    fit_model = cfg.get("fit_model", "power_log")
    fits = {
        "ordinary": verify.decay_fit((ts, ordinary), model=fit_model),
        "dt": verify.decay_fit((ts, dt), model=fit_model),
    }
    rows = [(t, o, d) for t, o, d in zip(ts, ordinary, dt)]
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(os.path.join(out_dir, "modulus.csv"),
               ["t", "omega", "omega_dt"], rows)
    _write_json(os.path.join(out_dir, "modulus_fits.json"), fits)
    print(json.dumps(fits, indent=2))
    return 0


def cmd_compile(args) -> int:
    cfg = _load_json(args.config)
    dom, dim = domain_from_config(_require(cfg, "polytope", dict, "config"))
    params = params_from_config(cfg.get("params", {}))
    if args.budget:
        params = dataclasses.replace(params, budget=args.budget)
    cov = covering_from_config(cfg, dom, params.lam, seed=args.seed)
    fn_cfg = _require(cfg, "function", dict, "config")
    target = make_target(fn_cfg["name"], dim, fn_cfg.get("params", ()))
    net, report = compiler.compile(target, dom, cov, params)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "network.json"), "w", encoding="utf-8") as fh:
        fh.write(netir.serialize(net))
    _write_json(os.path.join(out_dir, "report.json"), report)
    print(json.dumps({k: report[k] for k in
                      ("K_prime_error", "support_leak", "width", "depth")},
                     indent=2))
    if report["support_leak"] != 0.0:
        return 3
    return 0


def cmd_eval(args) -> int:
    with open(args.network, "r", encoding="utf-8") as fh:
        net = netir.deserialize(fh.read())
    pts = []
    with open(args.points, "r", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if row:
                pts.append([float(v) for v in row])
    writer = csv.writer(sys.stdout)
    if pts:
        vals = net.eval(np.array(pts, dtype=float))
        for row, v in zip(pts, np.atleast_2d(vals)):
            writer.writerow(list(row) + list(np.atleast_1d(v)))
    return 0


def cmd_verify(args) -> int:
    with open(args.network, "r", encoding="utf-8") as fh:
        net = netir.deserialize(fh.read())
    cfg = _load_json(args.scenario)
    dom, dim = domain_from_config(_require(cfg, "polytope", dict, "scenario"))
    fn_cfg = _require(cfg, "function", dict, "scenario")
    target = make_target(fn_cfg["name"], dim, fn_cfg.get("params", ()))
    grid = int(cfg.get("grid", args.grid or 4096))
    sup = verify.sup_error(net, target, dom, grid=grid)
    sup_dom = dom
    if "support_polytope" in cfg:
        sup_dom, _ = domain_from_config(cfg["support_polytope"])
    leak = verify.support_check(net, sup_dom,
                                samples=int(cfg.get("samples", 10_000)),
                                seed=args.seed)
    report = {"sup_error": sup, "support": leak}
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    _write_json(os.path.join(out_dir, "verify_report.json"), report)
    _write_csv(os.path.join(out_dir, "verify.csv"),
               ["max_abs_error", "max_abs_outside"],
               [(sup["max_abs_error"], leak["max_abs_outside"])])
    print(json.dumps(report, indent=2))
    return 0 if leak["max_abs_outside"] == 0.0 else 3


DEMOS = ("squaring", "product", "chebyshev", "abs-1d", "lshape-2d",
         "analytic-exp", "modulus-ex13", "modulus-ex22")


def cmd_demo(args) -> int:
    name = args.name
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    if name == "squaring":
        rows = []
        for N in range(1, 11):
            net = gadgets.even_square_net(N)
            xs = np.linspace(-1.0, 1.0, 8193)
            err = float(np.abs(net.eval(xs[:, None]).ravel() - xs ** 2).max())
            rows.append((N, err, 2.0 ** (-2 * (N + 1))))
        _write_csv(os.path.join(out_dir, "squaring.csv"),
                   ["N", "measured", "bound"], rows)
    elif name == "product":
        rows = []
        g = np.linspace(-1.0, 1.0, 500)
        X, Y = np.meshgrid(g, g)
        P = np.column_stack([X.ravel(), Y.ravel()])
        for N in range(1, 9):
            net = gadgets.product_net(N)
            err = float(np.abs(net.eval(P).ravel() - P[:, 0] * P[:, 1]).max())
            rows.append((N, err, 2.0 ** (-2 * N)))
        _write_csv(os.path.join(out_dir, "product.csv"),
                   ["N", "measured", "bound"], rows)
    elif name == "chebyshev":
        rows = []
        xs = np.linspace(-0.95, 0.95, 4001)
        for k in range(5):
            net = gadgets.cheb_net(k, 12, 0.05)
            err = float(np.abs(net.eval(xs[:, None]).ravel()
                               - chebyshev_value(k, xs)).max())
            rows.append((k, err, k * k * 3.0 ** k * 2.0 ** -25))
        _write_csv(os.path.join(out_dir, "chebyshev.csv"),
                   ["k", "measured", "bound"], rows)
    elif name in ("abs-1d", "analytic-exp"):
        dom = geometry.Polytope.interval(-1.0, 1.0)
        cov = geometry.validate_covering(
            dom, [geometry.Parallelepiped.box([-1.0], [1.0])], 0.9)
        if name == "abs-1d":
            target = make_target("abs_sum", 1)
            params = compiler.CompileParams(n=8, lam=0.9, ladder=(4, 8, 16, 32))
        else:
            target = make_target("exp_sum", 1)
            params = compiler.CompileParams(n=12, lam=0.9, path="analytic",
                                            ladder=(4, 6, 8, 10, 12))
        net, report = compiler.compile(target, dom, cov, params)
        _write_json(os.path.join(out_dir, f"{name}-report.json"), report)
        _write_csv(os.path.join(out_dir, f"{name}-ladder.csv"),
                   ["n", "error", "budget"],
                   [(r["n"], r["error"], r["budget"]) for r in report["ladder"]])
    elif name == "lshape-2d":
        boxes = [([0.0, 0.0], [2.0, 1.0]), ([0.0, 0.0], [1.0, 2.0])]
        dom = geometry.BoxUnion(boxes)
        cov = geometry.validate_covering(
            dom, geometry.auto_cover_box_union(boxes, 0.9).pieces, 0.9)
        target = make_target("abs_sum", 2, params=(1.0, 0.0))
        net, report = compiler.compile(target, dom, cov,
                                       compiler.CompileParams(n=8, lam=0.9))
        _write_json(os.path.join(out_dir, "lshape-2d-report.json"), report)
    elif name == "modulus-ex13":
        dom = geometry.Polytope.interval(0.0, 1.0)
        target = make_target("x13lnx", 1)
        ts = 2.0 ** -np.arange(4, 15)
        dt = geometry.dt_modulus_ladder(target, dom, ts)
        ordinary = geometry.ordinary_modulus_ladder(target, dom, ts)
        fits = {"ordinary": verify.decay_fit((ts, ordinary), "power_log"),
                "dt": verify.decay_fit((ts, dt), "power_log")}
        _write_csv(os.path.join(out_dir, "modulus-ex13.csv"),
                   ["t", "omega", "omega_dt"], list(zip(ts, ordinary, dt)))
        _write_json(os.path.join(out_dir, "modulus-ex13-fits.json"), fits)
    elif name == "modulus-ex22":
        tri = geometry.Polytope.from_vertices_2d([[0, 0], [1, 1], [1, -1]])
        square = geometry.Polytope.box([-1, -1], [1, 1])
        target = make_target("rot_sqrt_log", 2)
        ts = 2.0 ** -np.arange(4, 15)
        dt_tri = geometry.dt_modulus_ladder(target, tri, ts)
        dt_sq = geometry.dt_modulus_ladder(target, square, ts)
        fits = {"triangle": verify.decay_fit((ts, dt_tri), "power"),
                "square": verify.decay_fit((ts, dt_sq), "power")}
        _write_csv(os.path.join(out_dir, "modulus-ex22.csv"),
                   ["t", "dt_triangle", "dt_square"],
                   list(zip(ts, dt_tri, dt_sq)))
        _write_json(os.path.join(out_dir, "modulus-ex22-fits.json"), fits)
    else:
        raise ConfigError(f"unknown demo {name!r}; known: {DEMOS}")
    print(f"demo {name}: artifacts in {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyrelu",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("kernel-check", help="verify kernel conditions")
    p.add_argument("--n", default="0,1,4,16,64,256")
    p.add_argument("--quad-points", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("modulus", help="modulus-of-continuity ladders and fits")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("compile", help="compile a config to a network + report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=None)

    p = sub.add_parser("eval", help="evaluate a network on CSV points")
    p.add_argument("--network", required=True)
    p.add_argument("--points", required=True)

    p = sub.add_parser("verify", help="measure a network against a scenario")
    p.add_argument("--network", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=None)

    p = sub.add_parser("demo", help="run a named end-to-end scenario")
    p.add_argument("name")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        handler = {
            "kernel-check": cmd_kernel_check,
            "modulus": cmd_modulus,
            "compile": cmd_compile,
            "eval": cmd_eval,
            "verify": cmd_verify,
            "demo": cmd_demo,
        }[args.cmd]
        return handler(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except InvariantError as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return 3
    except BudgetError as e:
        print(f"budget exceeded: {e}", file=sys.stderr)
        return 4
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
