"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Networks constructed in criteria 2 through 8 are collected and re-checked
for serialization integrity in criterion 10.
"""

import functools
import time

import numpy as np

from polyrelu import compiler as comp
from polyrelu import gadgets as G
from polyrelu import geometry as geo
from polyrelu import kernel as K
from polyrelu import netir, verify
from polyrelu.chebseries import ChebTensor, cheb_coeff_1d, cheb_coeff_tensor, \
    cheb_series_eval, chebyshev_value

NETWORKS = {}  # name -> (net, input_dim), filled by suites 2..8


def _report(num, ok, detail, t0, limit):
    dt = time.perf_counter() - t0
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} ({dt:.2f}s) {detail}"
    print(line)
    assert ok, line
    assert dt < limit, f"criterion {num} exceeded {limit}s: {dt:.2f}s"


def test_criterion_01_kernel_suite():
    t0 = time.perf_counter()
    worst = {"norm": 0.0, "moment": 0.0, "min": 0.0, "coeff": 0.0, "adj": 0.0}
    for n in (0, 1, 4, 16, 64, 256):
        ker = K.JacksonKernel(n)
        rec = K.kernel_checks(ker, 4 * (n + 2))
        worst["norm"] = max(worst["norm"], abs(rec["normality"] - 1.0))
        worst["moment"] = max(worst["moment"], rec["scaled_first_moment"])
        worst["min"] = min(worst["min"], rec["min_value"])
        worst["coeff"] = max(worst["coeff"], rec["max_abs_cosine_coeff"])
        worst["adj"] = max(worst["adj"], rec["adjacent_sum_defect"])
    ok = (worst["norm"] <= 1e-10
          and worst["moment"] <= np.pi ** 2 / 2 + 1e-8
          and worst["min"] >= -1e-12
          and worst["coeff"] <= 5 * np.pi
          and worst["adj"] <= 1e-12)
    _report(1, ok, f"normality defect {worst['norm']:.1e}, "
            f"moment {worst['moment']:.3f} <= {np.pi**2/2:.3f}", t0, 5.0)


def test_criterion_02_squaring_exactness():
    t0 = time.perf_counter()
    xs = np.linspace(-1.0, 1.0, 8193)[:, None]
    worst = 0.0
    for N in range(1, 11):
        net = G.even_square_net(N)
        NETWORKS[f"even_square_{N}"] = (net, 1)
        err = np.abs(net.eval(xs).ravel() - xs.ravel() ** 2).max()
        worst = max(worst, abs(err - 2.0 ** (-2 * (N + 1))))
    _report(2, worst <= 1e-12, f"max |measured - 2^-2(N+1)| = {worst:.2e}", t0, 5.0)


def test_criterion_03_product_bound(rng):
    t0 = time.perf_counter()
    g = np.linspace(-1.0, 1.0, 500)
    X, Y = np.meshgrid(g, g)
    P = np.column_stack([X.ravel(), Y.ravel()])
    xs = rng.uniform(-1.0, 1.0, 1000)
    zeros = np.zeros(1000)
    ok = True
    worst_ratio = 0.0
    leak = 0.0
    for N in range(1, 9):
        net = G.product_net(N)
        NETWORKS[f"product_{N}"] = (net, 2)
        err = np.abs(net.eval(P).ravel() - P[:, 0] * P[:, 1]).max()
        ok &= err <= 2.0 ** (-2 * N)
        worst_ratio = max(worst_ratio, err / 2.0 ** (-2 * N))
        leak = max(leak,
                   np.abs(net.eval(np.column_stack([xs, zeros]))).max(),
                   np.abs(net.eval(np.column_stack([zeros, xs]))).max())
    ok &= leak == 0.0
    _report(3, ok, f"worst err/bound = {worst_ratio:.3f}, axis leak = {leak}",
            t0, 10.0)


def test_criterion_04_chebyshev_gadget(rng):
    t0 = time.perf_counter()
    N, delta = 12, 0.05
    xs = np.linspace(-0.95, 0.95, 4001)[:, None]
    far = rng.uniform(1.0 + 1e-6, 4.0, 1000) * rng.choice([-1.0, 1.0], 1000)
    ok = True
    leak = 0.0
    for k in range(5):
        net = G.cheb_net(k, N, delta)
        NETWORKS[f"cheb_{k}"] = (net, 1)
        err = np.abs(net.eval(xs).ravel() - chebyshev_value(k, xs.ravel())).max()
        ok &= err <= k * k * 3.0 ** k * 2.0 ** -25 + 1e-12
        leak = max(leak, np.abs(net.eval(far[:, None])).max())
    ok &= leak == 0.0
    _report(4, ok, f"outside leak = {leak}", t0, 10.0)


def test_criterion_05_series_coefficients():
    t0 = time.perf_counter()
    ok = True
    # delta tensor for the constant target
    c = cheb_coeff_1d(lambda x: np.ones_like(x), 8)
    ok &= abs(c[0] - 1.0) < 1e-12 and np.abs(c[1:]).max() < 1e-12
    t2 = cheb_coeff_tensor(lambda p: np.ones(p.shape[0]), 4, 2)
    m = t2.coeffs.copy()
    ok &= abs(m[0, 0] - 1.0) < 1e-12
    m[0, 0] = 0.0
    ok &= np.abs(m).max() < 1e-12
    # identity coefficient shrink
    for n in (2, 8, 32):
        c = cheb_coeff_1d(lambda x: x, n)
        ok &= abs(c[1] - np.cos(np.pi / (n + 2))) <= 1e-10
    # smoothing-rate inequality for the three-function set
    xs = np.linspace(-1.0, 1.0, 10_001)
    margin = np.inf
    for f in (np.abs, lambda x: x ** 2, lambda x: np.cos(3 * x)):
        for n in (8, 16, 32, 64):
            tensor = ChebTensor(1, n, cheb_coeff_1d(f, n))
            err = np.abs(cheb_series_eval(tensor, xs) - f(xs)).max()
            omega = verify.grid_modulus(lambda th: f(np.cos(th)),
                                        -np.pi, np.pi, 1.0 / n)
            bound = (np.pi ** 2 / 2 + 1.0) * omega
            ok &= err <= bound
            margin = min(margin, bound / max(err, 1e-300))
    _report(5, ok, f"smallest bound/error margin = {margin:.2f}", t0, 30.0)


@functools.lru_cache(maxsize=None)
def _abs_ladder():
    K1 = geo.Polytope.interval(-1.0, 1.0)
    cov = geo.validate_covering(
        K1, [geo.Parallelepiped.box([-1.0], [1.0])], 0.9)
    f = lambda p: np.abs(p[:, 0])
    out = []
    for n in (4, 8, 16, 32):
        net, rep = comp.compile(f, K1, cov, comp.CompileParams(n=n, lam=0.9))
        out.append((n, net, rep))
    return out


def test_criterion_06_end_to_end_abs():
    t0 = time.perf_counter()
    rows = _abs_ladder()
    for n, net, _ in rows:
        NETWORKS[f"abs1d_{n}"] = (net, 1)
    ladder = ([n for n, _, _ in rows],
              [rep["K_prime_error"] for _, _, rep in rows])
    fit = verify.decay_fit(ladder, model="power")
    ok = abs(fit["slope"] + 1.0) <= 0.25
    ok &= all(rep["support_leak"] == 0.0 for _, _, rep in rows)
    _report(6, ok, f"log-log slope = {fit['slope']:.3f} (want -1 +- 0.25)",
            t0, 120.0)


@functools.lru_cache(maxsize=None)
def _lshape_compile():
    boxes = [([0.0, 0.0], [2.0, 1.0]), ([0.0, 0.0], [1.0, 2.0])]
    dom = geo.BoxUnion(boxes)
    cov = geo.validate_covering(
        dom, geo.auto_cover_box_union(boxes, 0.9).pieces, 0.9)
    f = lambda p: np.abs(p[:, 0] - 1.0) + p[:, 1]
    return comp.compile(f, dom, cov, comp.CompileParams(n=8, lam=0.9))


def test_criterion_07_lshape_gluing():
    t0 = time.perf_counter()
    net, rep = _lshape_compile()
    NETWORKS["lshape"] = (net, 2)
    ok = rep["support_leak"] == 0.0
    budget = rep["budget_max"] + rep["glue"]["overhead_bound"]
    ok &= rep["K_prime_error"] <= budget
    ok &= rep["glue"]["pieces"] == 2
    _report(7, ok, f"leak = {rep['support_leak']}, K' error "
            f"{rep['K_prime_error']:.4f} <= {budget:.4f}", t0, 180.0)


@functools.lru_cache(maxsize=None)
def _analytic_ladder():
    K1 = geo.Polytope.interval(-1.0, 1.0)
    cov = geo.validate_covering(
        K1, [geo.Parallelepiped.box([-1.0], [1.0])], 0.9)
    f = lambda p: np.exp(p[:, 0])
    out = []
    for n in (4, 6, 8, 10, 12):
        net, rep = comp.compile(f, K1, cov,
                                comp.CompileParams(n=n, lam=0.9, path="analytic"))
        out.append((n, net, rep))
    return out


def test_criterion_08_analytic_path():
    t0 = time.perf_counter()
    rows = _analytic_ladder()
    for n, net, _ in rows:
        NETWORKS[f"exp1d_{n}"] = (net, 1)
    ladder = ([n for n, _, _ in rows],
              [rep["K_prime_error"] for _, _, rep in rows])
    fit = verify.decay_fit(ladder, model="exponential")
    ok = fit["slope"] <= -0.8 and fit["residual"] < 0.2
    ok &= all(rep["support_leak"] == 0.0 for _, _, rep in rows)
    _report(8, ok, f"semilog slope = {fit['slope']:.2f}, residual = "
            f"{fit['residual']:.3f}", t0, 120.0)


def test_criterion_09_moduli_exponents():
    t0 = time.perf_counter()
    ts = 2.0 ** -np.arange(4, 15)

    def f13(p):
        x = p[:, 0]
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = -np.cbrt(x[pos]) * np.log(x[pos])
        return out

    K1 = geo.Polytope.interval(0.0, 1.0)
    ords = geo.ordinary_modulus_ladder(f13, K1, ts, n_pairs=512)
    dts = geo.dt_modulus_ladder(f13, K1, ts, n_x=512)
    b_ord = verify.decay_fit((ts, ords), model="power_log")["slope"]
    b_dt = verify.decay_fit((ts, dts), model="power_log")["slope"]

    def f22(p):
        x, y = p[:, 0], p[:, 1]
        r2 = x * x + y * y
        out = np.zeros_like(x)
        okm = r2 > 0
        out[okm] = np.sqrt(np.abs(x[okm] ** 2 - y[okm] ** 2) / 2.0) \
            * np.log(1.0 / r2[okm])
        return out

    tri = geo.Polytope.from_vertices_2d([[0, 0], [1, 1], [1, -1]])
    tri_vals = geo.dt_modulus_ladder(f22, tri, ts, n_x=512)
    b_tri = verify.decay_fit((ts, tri_vals), model="power")["slope"]

    ok = abs(b_ord - 1 / 3) <= 0.1 and abs(b_dt - 2 / 3) <= 0.1 \
        and abs(b_tri - 1.0) <= 0.1
    _report(9, ok, f"exponents: ordinary {b_ord:.3f} (1/3), weighted "
            f"{b_dt:.3f} (2/3), triangle {b_tri:.3f} (1)", t0, 120.0)


def test_criterion_10_ir_integrity(rng):
    t0 = time.perf_counter()
    assert len(NETWORKS) >= 25, "suites 2-8 must register their networks first"
    ok = True
    for name, (net, dim) in NETWORKS.items():
        back = netir.deserialize(netir.serialize(net))
        pts = rng.uniform(-2.0, 2.0, (200, dim))
        if not np.array_equal(net.eval(pts), back.eval(pts)):
            ok = False
            print(f"  round-trip mismatch: {name}")
    # composition and padding are exact on random cases
    a = G.even_square_net(3)
    b = G.sawtooth_net(4)
    compd = netir.compose(a, b)
    xs = rng.uniform(-1.5, 1.5, (1000, 1))
    ok &= np.array_equal(compd.eval(xs), a.eval(b.eval(xs)))
    padded = netir.pad_depth(netir.identity_net(1), 3)
    ok &= np.array_equal(padded.eval(xs), xs)
    stacked = netir.stack([a, G.even_square_net(5)])
    sv = stacked.eval(xs)
    ok &= np.abs(sv[:, :1] - a.eval(xs)).max() <= 1e-13
    _report(10, ok, f"{len(NETWORKS)} networks round-tripped bit-exact",
            t0, 10.0)
