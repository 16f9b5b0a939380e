"""Piece compilation, plateau masks, and gluing."""

import numpy as np
import pytest

from polyrelu import compiler as comp
from polyrelu import geometry as geo
from polyrelu.errors import InvariantError


def interval_piece():
    return geo.Parallelepiped.box([-1.0], [1.0])


def test_fast_decreasing_center_and_outside():
    E = geo.Parallelepiped.box([0.0, 0.0], [1.0, 1.0])
    net = comp.fast_decreasing_net(E, 0.5)
    assert net.eval(np.array([0.5, 0.5]))[0] == 1.0
    outward = np.array([1.0, 1.0]) + 0.25
    assert net.eval(outward)[0] == 0.0
    assert net.eval(np.array([-0.3, 0.5]))[0] == 0.0


def test_fast_decreasing_partial_value():
    # one coordinate halfway down its ramp, the other on the plateau
    E = geo.Parallelepiped.box([0.0, 0.0], [1.0, 1.0])
    net = comp.fast_decreasing_net(E, 0.5)
    assert net.eval(np.array([1.0 / 8.0, 0.5]))[0] == pytest.approx(0.5)


def test_fast_decreasing_range(rng):
    E = geo.Parallelepiped([0.0, 0.0], [[1.0, 0.2], [0.0, 0.7]])
    net = comp.fast_decreasing_net(E, 0.8)
    pts = rng.uniform(-0.5, 1.5, (2000, 2))
    v = net.eval(pts).ravel()
    assert v.min() >= 0.0 and v.max() <= 1.0
    core = geo.pp_dilate(E, 0.8)
    inside = geo.pp_contains(core, pts, tol=-1e-9)
    assert np.all(v[inside] == 1.0)
    outside = ~geo.pp_contains(E, pts, tol=1e-9)
    assert np.all(v[outside] == 0.0)


def test_params_defaults():
    p = comp.CompileParams(n=8, alpha=2.0).resolved(2)
    assert p.N1 == 8
    assert p.N2 == int(np.ceil(2.0 * np.log2(8)))
    assert p.N_glue == p.N2
    assert p.delta == pytest.approx(0.1)
    pa = comp.CompileParams(n=6, path="analytic").resolved(1)
    assert pa.N1 == 28 and pa.N2 == 28


def test_params_validation():
    with pytest.raises(ValueError):
        comp.CompileParams(n=0)
    with pytest.raises(ValueError):
        comp.CompileParams(n=2, lam=1.5)
    with pytest.raises(ValueError):
        comp.CompileParams(n=2, path="wrong")


def test_compile_piece_constant():
    E = interval_piece()
    net, rep = comp.compile_piece(lambda p: np.full(p.shape[0], 2.5), E,
                                  comp.CompileParams(n=4, lam=0.9))
    xs = np.linspace(-0.9, 0.9, 501)[:, None]
    assert np.abs(net.eval(xs) - 2.5).max() <= rep["budget"] + 1e-9
    assert rep["sup_error"] <= rep["budget"]


def test_compile_piece_identity_series_error():
    # for f(x) = x the polynomial part has the known coefficient shrink
    E = interval_piece()
    n = 8
    net, rep = comp.compile_piece(lambda p: p[:, 0], E,
                                  comp.CompileParams(n=n, lam=0.9))
    xs = np.linspace(-0.9, 0.9, 1001)[:, None]
    expected = (1.0 - np.cos(np.pi / (n + 2))) * 0.9
    err = np.abs(net.eval(xs).ravel() - xs.ravel()).max()
    assert err <= expected + rep["gadget_budget"] + 1e-9


def test_compile_piece_matches_series_oracle():
    # network vs the Clenshaw evaluation of its own coefficient tensor:
    # the gap is pure gadget error and must respect the rigorous budget
    from polyrelu.chebseries import cheb_coeff_tensor, cheb_series_eval
    from polyrelu.geometry import pp_to_cube_map
    E = geo.Parallelepiped([0.0, 0.0], [[1.0, 0.2], [0.0, 0.8]])
    f = lambda p: np.abs(p[:, 0] - 0.4) + np.cos(p[:, 1])
    params = comp.CompileParams(n=6, lam=0.9)
    net, rep = comp.compile_piece(f, E, params)
    fwd, inv = pp_to_cube_map(E)

    def on_cube(u):
        return f(inv.apply(np.atleast_2d(u)))

    p = params.resolved(2)
    tensor = cheb_coeff_tensor(on_cube, p.n, 2, quad_points=p.quad_points)
    core = geo.pp_dilate(E, p.lam)
    from polyrelu.verify import region_grid
    grid = region_grid(core, grid=4096)
    oracle = cheb_series_eval(tensor, fwd.apply(grid))
    gap = np.abs(net.eval(grid)[:, 0] - oracle).max()
    assert gap <= rep["gadget_budget"]


def test_compile_piece_support():
    E = interval_piece()
    net, _ = comp.compile_piece(lambda p: np.abs(p[:, 0]), E,
                                comp.CompileParams(n=6, lam=0.9))
    xs = np.array([[1.0 + 1e-6], [1.5], [-2.0], [100.0]])
    assert np.abs(net.eval(xs)).max() == 0.0


def test_compile_piece_skewed_2d():
    E = geo.Parallelepiped([0.0, 0.0], [[1.0, 0.0], [1.0, 1.0]])
    f = lambda p: p[:, 0] + 2.0 * p[:, 1]
    net, rep = comp.compile_piece(f, E, comp.CompileParams(n=4, lam=0.9))
    assert rep["sup_error"] <= rep["budget"] + 1e-9
    assert np.abs(net.eval(np.array([[3.0, 3.0], [-0.5, 0.2]]))).max() == 0.0


def test_glue_single_piece_passthrough():
    E = interval_piece()
    net, rep = comp.compile_piece(lambda p: p[:, 0] ** 2, E,
                                  comp.CompileParams(n=4, lam=0.9))
    glued, _ = comp.glue([(net, E)], 0.9, 6, M=rep["output_bound"])
    assert glued is net


def test_glue_two_overlapping_pieces():
    # two overlapping interval pieces agreeing on the overlap: the fold
    # matches the later piece on its core
    f = lambda p: np.sin(p[:, 0])
    E1 = geo.Parallelepiped.box([-1.0], [0.5])
    E2 = geo.Parallelepiped.box([-0.5], [1.0])
    params = comp.CompileParams(n=6, lam=0.9)
    n1, r1 = comp.compile_piece(f, E1, params)
    n2, r2 = comp.compile_piece(f, E2, params)
    glued, rep = comp.glue([(n1, E1), (n2, E2)], 0.9, 6,
                           piece_bounds=[r1["output_bound"], r2["output_bound"]])
    xs = np.linspace(-0.4, 0.9, 301)[:, None]  # core of piece 2
    assert np.abs(glued.eval(xs) - n2.eval(xs)).max() <= 1e-12
    xs1 = np.linspace(-0.95, -0.6, 101)[:, None]  # piece 1 only
    assert np.abs(glued.eval(xs1) - n1.eval(xs1)).max() <= 1e-12
    out = np.array([[1.5], [-1.5], [3.0]])
    assert np.abs(glued.eval(out)).max() == 0.0


def test_glue_three_pieces():
    f = lambda p: np.sin(p[:, 0])
    Es = [geo.Parallelepiped.box([-1.0], [0.0]),
          geo.Parallelepiped.box([-0.4], [0.6]),
          geo.Parallelepiped.box([0.2], [1.0])]
    params = comp.CompileParams(n=6, lam=0.9)
    nets, bounds = [], []
    for E in Es:
        net, rep = comp.compile_piece(f, E, params)
        nets.append((net, E))
        bounds.append(rep["output_bound"])
    glued, rep = comp.glue(nets, 0.9, 6, piece_bounds=bounds)
    assert len(rep["overlap_fractions"]) == 2
    assert all(0.0 < v < 1.0 for v in rep["overlap_fractions"])
    # the fold agrees with whichever piece core is active last
    regions = [(np.linspace(-0.95, -0.45, 100), 0),
               (np.linspace(-0.3, 0.15, 100), 1),
               (np.linspace(0.25, 0.95, 100), 2)]
    for xs, j in regions:
        xs = xs[:, None]
        assert np.abs(glued.eval(xs) - nets[j][0].eval(xs)).max() <= 1e-12
    assert np.abs(glued.eval(np.array([[1.5], [-1.5], [20.0]]))).max() == 0.0


def test_glue_with_global_bound():
    f = lambda p: np.cos(p[:, 0])
    E1 = geo.Parallelepiped.box([-1.0], [0.3])
    E2 = geo.Parallelepiped.box([-0.3], [1.0])
    params = comp.CompileParams(n=5, lam=0.9)
    n1, _ = comp.compile_piece(f, E1, params)
    n2, _ = comp.compile_piece(f, E2, params)
    glued, rep = comp.glue([(n1, E1), (n2, E2)], 0.9, 8, M=4.0)
    assert rep["M"] == 4.0
    xs = np.linspace(-0.2, 0.85, 200)[:, None]
    assert np.abs(glued.eval(xs) - n2.eval(xs)).max() <= 1e-12


def test_glue_rejects_bound_violation():
    E = interval_piece()
    net, _ = comp.compile_piece(lambda p: p[:, 0] ** 2 + 1.0, E,
                                comp.CompileParams(n=4, lam=0.9))
    with pytest.raises(InvariantError):
        comp.glue([(net, E), (net, E)], 0.9, 6, M=0.1)


def test_compile_requires_validated_covering():
    E = interval_piece()
    cov = geo.Covering([E], 0.9, validated=False)
    with pytest.raises(InvariantError):
        comp.compile(lambda p: p[:, 0], geo.Polytope.interval(-1, 1), cov,
                     comp.CompileParams(n=4))


def test_compile_end_to_end_1d():
    K = geo.Polytope.interval(-1, 1)
    cov = geo.validate_covering(K, [interval_piece()], 0.9)
    f = lambda p: np.abs(p[:, 0])
    net, rep = comp.compile(f, K, cov, comp.CompileParams(n=8, lam=0.9))
    assert rep["support_leak"] == 0.0
    assert rep["K_prime_error"] <= rep["budget_max"] + rep["glue"]["overhead_bound"]
    assert rep["glue"]["measured"] <= rep["glue"]["overhead_bound"]


def test_compile_triangle_skewed_covering():
    # one square plus two parallelograms with edges parallel to the
    # triangle's edges cover the simplex exactly
    tri = geo.Polytope.from_vertices_2d([[0, 0], [1, 0], [0, 1]])
    pieces = [
        geo.Parallelepiped([0.0, 0.0], [[0.5, 0.0], [0.0, 0.5]]),
        geo.Parallelepiped([1.0, 0.0], [[-0.5, 0.0], [-0.5, 0.5]]),
        geo.Parallelepiped([0.0, 1.0], [[0.0, -0.5], [0.5, -0.5]]),
    ]
    cov = geo.validate_covering(tri, pieces, 0.9, 10_000)
    f = lambda p: np.exp(p[:, 0] - p[:, 1]) + np.abs(p[:, 0] - 0.3)
    net, rep = comp.compile(f, tri, cov, comp.CompileParams(n=4, lam=0.9))
    assert rep["support_leak"] == 0.0
    assert rep["K_prime_error"] <= rep["budget_max"] + rep["glue"]["overhead_bound"]
    assert rep["glue"]["measured"] <= 1e-12
    assert len(rep["glue"]["overlap_fractions"]) == 2


def test_compile_monotone_improvement():
    # doubling the degree must not worsen the reliable-region error by
    # more than the gadget budget
    K = geo.Polytope.interval(-1, 1)
    cov = geo.validate_covering(K, [interval_piece()], 0.9)
    f = lambda p: np.abs(p[:, 0])
    errs, budgets = [], []
    for n in (4, 8, 16):
        _, rep = comp.compile(f, K, cov, comp.CompileParams(n=n, lam=0.9))
        errs.append(rep["K_prime_error"])
        budgets.append(rep["budget_max"] - rep["per_piece"][0]["series_error"])
    for i in range(1, len(errs)):
        assert errs[i] <= errs[i - 1] + budgets[i] + budgets[i - 1]


def test_compile_piece_3d():
    E = geo.Parallelepiped.box([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    f = lambda p: p[:, 0] + np.abs(p[:, 1] - 0.5) * p[:, 2]
    net, rep = comp.compile_piece(f, E, comp.CompileParams(n=2, lam=0.85))
    assert rep["sup_error"] <= rep["budget"] + 1e-9
    out = np.array([[1.2, 0.5, 0.5], [0.5, 0.5, -0.1], [2.0, 2.0, 2.0]])
    assert np.abs(net.eval(out)).max() == 0.0


def test_fast_decreasing_3d():
    E = geo.Parallelepiped.box([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    net = comp.fast_decreasing_net(E, 0.5)
    assert net.eval(np.array([0.5, 0.5, 0.5]))[0] == 1.0
    assert net.eval(np.array([0.5, 0.5, 1.25]))[0] == 0.0
    assert net.eval(np.array([-0.25, 0.5, 0.5]))[0] == 0.0


def test_compile_deterministic():
    from polyrelu import netir
    K = geo.Polytope.interval(-1, 1)
    cov = geo.validate_covering(K, [interval_piece()], 0.9)
    f = lambda p: np.abs(p[:, 0])
    a, ra = comp.compile(f, K, cov, comp.CompileParams(n=4, lam=0.9))
    b, rb = comp.compile(f, K, cov, comp.CompileParams(n=4, lam=0.9))
    assert netir.serialize(a) == netir.serialize(b)
    assert ra["K_prime_error"] == rb["K_prime_error"]


def test_k_prime_mask():
    pieces = [geo.Parallelepiped.box([0.0], [1.0]),
              geo.Parallelepiped.box([0.5], [1.5])]
    pts = np.array([[0.02], [0.45], [0.7], [1.4], [1.6], [0.5001]])
    mask = comp.k_prime_mask(pieces, 0.9, pts)
    # cores are [0.05, 0.95] and [0.55, 1.45]; margins are the 0.05-wide
    # bands at the piece ends; 0.5001 sits in piece 2's lower margin
    assert list(mask) == [False, True, True, True, False, False]
