"""Domain model: parallelepipeds, convex polytopes, box unions, coverings,
and the boundary-weighted modulus-of-continuity estimators.

Moduli estimation is deliberately deterministic: all sampling flows from
a Halton sequence with a seed-derived offset, interior points are convex
vertex mixtures (so affinely mapped domains get affinely mapped samples),
and boundary behavior is captured by geometric layers shrinking each bulk
point toward every vertex and facet midpoint.  The step ladder of the
estimators is a fixed global geometric grid filtered to h <= t, making
the estimate a supremum over nested sets, hence monotone in t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoveringError
from .netir import AffineMap

REL_TOL = 1e-10  # membership tolerance relative to domain diameter


def halton(count: int, dim: int, offset: int = 0) -> np.ndarray:
    """First `count` points of the Halton sequence after `offset`, in [0,1)^dim."""
    primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]
    if dim > len(primes):
        raise ValueError("Halton sampler supports up to 12 dimensions")
    out = np.empty((count, dim))
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.int64)
    for j in range(dim):
        b = primes[j]
        i = idx.copy()
        f = 1.0
        r = np.zeros(count)
        while np.any(i > 0):
            f /= b
            r += f * (i % b)
            i //= b
        out[:, j] = r
    return out


@dataclass
class Parallelepiped:
    """Corner point plus d independent edge vectors (rows of `edges`)."""
    corner: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        self.corner = np.asarray(self.corner, dtype=float).ravel()
        self.edges = np.atleast_2d(np.asarray(self.edges, dtype=float))
        d = self.corner.shape[0]
        if self.edges.shape != (d, d):
            raise ValueError("edge matrix must be d x d")
        scale = np.max(np.linalg.norm(self.edges, axis=1))
        if scale == 0 or abs(np.linalg.det(self.edges)) <= 1e-12 * scale ** d:
            raise ValueError("edge vectors are (numerically) dependent")

    @property
    def dim(self):
        return self.corner.shape[0]

    @property
    def center(self):
        return self.corner + 0.5 * self.edges.sum(axis=0)

    def vertices(self) -> np.ndarray:
        d = self.dim
        corners = np.empty((2 ** d, d))
        for i in range(2 ** d):
            mask = [(i >> j) & 1 for j in range(d)]
            corners[i] = self.corner + np.asarray(mask, dtype=float) @ self.edges
        return corners

    @classmethod
    def box(cls, lo, hi) -> "Parallelepiped":
        lo = np.asarray(lo, dtype=float).ravel()
        hi = np.asarray(hi, dtype=float).ravel()
        return cls(lo, np.diag(hi - lo))


def pp_to_cube_map(E: Parallelepiped):
    """Affine A with A(E) = [-1,1]^d, corner to (-1,..,-1); plus its inverse."""
    inv_edges = np.linalg.inv(E.edges.T)
    fwd = AffineMap(2.0 * inv_edges, -2.0 * inv_edges @ E.corner - 1.0)
    inv = AffineMap(E.edges.T / 2.0, E.corner + 0.5 * E.edges.sum(axis=0))
    return fwd, inv


def pp_dilate(E: Parallelepiped, lam: float) -> Parallelepiped:
    """Shrink (or keep) E by factor lam about its center."""
    if not 0.0 < lam <= 1.0:
        raise ValueError("dilation factor must lie in (0, 1]")
    edges = lam * E.edges
    corner = E.center - 0.5 * edges.sum(axis=0)
    return Parallelepiped(corner, edges)


def pp_contains(E: Parallelepiped, x, tol: float = 1e-12) -> np.ndarray:
    """Membership via cube coordinates; tol is in cube units."""
    fwd, _ = pp_to_cube_map(E)
    u = fwd(np.atleast_2d(np.asarray(x, dtype=float)))
    inside = np.all(np.abs(u) <= 1.0 + tol, axis=1)
    return inside if inside.size > 1 else bool(inside[0])


@dataclass
class Polytope:
    """Convex polytope given by vertices and inward halfspaces n.x >= c."""
    vertices: np.ndarray
    halfspaces: list  # [(unit normal, offset)], inside iff normal.x >= offset
    edge_dirs: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        hs = []
        for n, c in self.halfspaces:
            n = np.asarray(n, dtype=float).ravel()
            nn = np.linalg.norm(n)
            hs.append((n / nn, float(c) / nn))
        self.halfspaces = hs
        if self.edge_dirs is not None:
            self.edge_dirs = np.atleast_2d(np.asarray(self.edge_dirs, dtype=float))
        tol = REL_TOL * max(self.diameter, 1.0)
        for v in self.vertices:
            for n, c in self.halfspaces:
                if n @ v < c - max(1e-10, tol):
                    raise ValueError("vertex violates a halfspace")

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def diameter(self):
        if len(self.vertices) < 2:
            return 0.0
        diff = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((diff ** 2).sum(-1).max()))

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def contains(self, x, tol: float | None = None):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if tol is None:
            tol = REL_TOL * max(self.diameter, 1.0)
        ok = np.ones(x.shape[0], dtype=bool)
        for n, c in self.halfspaces:
            ok &= x @ n >= c - tol
        return ok if ok.size > 1 else bool(ok[0])

    def boundary_margin(self, x):
        """Signed distance to the nearest facet plane (positive inside)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m = np.full(x.shape[0], np.inf)
        for n, c in self.halfspaces:
            m = np.minimum(m, x @ n - c)
        return m

    @classmethod
    def interval(cls, a: float, b: float) -> "Polytope":
        return cls(np.array([[a], [b]]), [([1.0], a), ([-1.0], -b)])

    @classmethod
    def box(cls, lo, hi) -> "Polytope":
        lo = np.asarray(lo, dtype=float).ravel()
        hi = np.asarray(hi, dtype=float).ravel()
        d = lo.shape[0]
        verts = Parallelepiped.box(lo, hi).vertices()
        hs = []
        for i in range(d):
            e = np.zeros(d)
            e[i] = 1.0
            hs.append((e.copy(), lo[i]))
            hs.append((-e, -hi[i]))
        return cls(verts, hs)

    @classmethod
    def from_vertices_2d(cls, pts) -> "Polytope":
        """Convex polygon from its (unordered) vertex list."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        c = pts.mean(axis=0)
        order = np.argsort(np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]))
        pts = pts[order]
        hs = []
        m = len(pts)
        for i in range(m):
            a, b = pts[i], pts[(i + 1) % m]
            t = b - a
            n = np.array([-t[1], t[0]])  # rotate edge; orient inward via centroid
            if n @ (c - a) < 0:
                n = -n
            hs.append((n, n @ a))
        return cls(pts, hs)


@dataclass
class BoxUnion:
    """Union of axis-aligned boxes (the L-shaped test domain and friends)."""
    boxes: list  # [(lo, hi)]

    def __post_init__(self):
        self.boxes = [(np.asarray(lo, dtype=float).ravel(),
                       np.asarray(hi, dtype=float).ravel())
                      for lo, hi in self.boxes]
        if not self.boxes:
            raise ValueError("empty box union")

    @property
    def dim(self):
        return self.boxes[0][0].shape[0]

    @property
    def diameter(self):
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))

    def bounding_box(self):
        lo = np.min([b[0] for b in self.boxes], axis=0)
        hi = np.max([b[1] for b in self.boxes], axis=0)
        return lo, hi

    def contains(self, x, tol: float | None = None):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if tol is None:
            tol = REL_TOL * max(self.diameter, 1.0)
        ok = np.zeros(x.shape[0], dtype=bool)
        for lo, hi in self.boxes:
            ok |= np.all((x >= lo - tol) & (x <= hi + tol), axis=1)
        return ok if ok.size > 1 else bool(ok[0])

    def boundary_margin(self, x):
        """Max over boxes of the box's inner margin (positive inside)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m = np.full(x.shape[0], -np.inf)
        for lo, hi in self.boxes:
            inner = np.minimum((x - lo).min(axis=1), (hi - x).min(axis=1))
            m = np.maximum(m, inner)
        return m

    @property
    def vertices(self):
        return np.vstack([Parallelepiped.box(lo, hi).vertices()
                          for lo, hi in self.boxes])


@dataclass
class Covering:
    """Validated list of parallelepiped pieces covering a domain."""
    pieces: list
    lam: float
    validated: bool = False
    leak_fraction: float = 0.0
    trifling_fraction: float = 0.0
    samples_used: int = 0

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError("shrink factor must lie in (0, 1)")
        if not self.pieces:
            raise ValueError("covering needs at least one piece")


def sample_region(domain, count: int, seed: int = 0) -> np.ndarray:
    """Quasi-uniform points of the domain via Halton rejection from its box."""
    lo, hi = domain.bounding_box()
    d = lo.shape[0]
    pts = []
    have = 0
    offset = seed * 1_000_003
    batch = max(4 * count, 256)
    while have < count:
        u = halton(batch, d, offset)
        offset += batch
        cand = lo + u * (hi - lo)
        keep = domain.contains(cand)
        if np.isscalar(keep):
            keep = np.array([keep])
        cand = cand[keep]
        pts.append(cand)
        have += len(cand)
        if offset > seed * 1_000_003 + 200 * batch and have == 0:
            raise CoveringError("domain rejection sampling found no interior points")
    return np.vstack(pts)[:count]


def exterior_points(domain, count: int, margin: float, seed: int = 0,
                    inflate: float = 0.75) -> np.ndarray:
    """Points outside the domain by at least `margin` (plane distance)."""
    lo, hi = domain.bounding_box()
    span = hi - lo
    lo2, hi2 = lo - inflate * span, hi + inflate * span
    d = lo.shape[0]
    pts = []
    have = 0
    offset = (seed + 7) * 1_000_003
    batch = max(4 * count, 256)
    while have < count:
        u = halton(batch, d, offset)
        offset += batch
        cand = lo2 + u * (hi2 - lo2)
        keep = domain.boundary_margin(cand) <= -margin
        cand = cand[keep]
        pts.append(cand)
        have += len(cand)
    return np.vstack(pts)[:count]


def validate_covering(domain, pieces, lam: float, samples: int = 10_000,
                      seed: int = 0) -> Covering:
    """Check the pieces stay inside the domain and jointly cover it.

    Hard failures: any piece vertex outside the domain (pieces must not
    interfere with the exterior), or any domain sample missed by every
    piece.  The fraction of samples falling in the shrink margins
    (union of piece minus shrunken piece) is reported for comparison
    against the 1 - lam^d volume heuristic.
    """
    if samples < 10_000:
        raise ValueError("need at least 10^4 validation samples")
    pieces = list(pieces)
    tol = REL_TOL * max(domain.diameter, 1.0)
    for i, E in enumerate(pieces):
        ok = domain.contains(E.vertices(), tol=max(tol, 1e-9))
        if not (np.all(ok) if not np.isscalar(ok) else ok):
            raise CoveringError(f"piece {i} has vertices outside the domain")
    pts = sample_region(domain, samples, seed=seed)
    covered = np.zeros(len(pts), dtype=bool)
    trifling = np.zeros(len(pts), dtype=bool)
    for E in pieces:
        inside = pp_contains(E, pts, tol=1e-12)
        core = pp_contains(pp_dilate(E, lam), pts, tol=1e-12)
        covered |= inside
        trifling |= inside & ~core
    leak = 1.0 - float(np.mean(covered))
    if leak > 0.0:
        raise CoveringError(
            f"{int(round(leak * len(pts)))} of {len(pts)} domain samples uncovered")
    return Covering(pieces, lam, validated=True, leak_fraction=leak,
                    trifling_fraction=float(np.mean(trifling)),
                    samples_used=samples)


def auto_cover_box_union(boxes, lam: float = 0.9) -> Covering:
    """The boxes of an axis-aligned union are their own covering."""
    boxes = list(boxes)
    if not boxes:
        raise ValueError("no boxes given")
    pieces = [Parallelepiped.box(lo, hi) for lo, hi in boxes]
    return Covering(pieces, lam, validated=True)


def polytope_contains(K, x, tol: float | None = None):
    return K.contains(x, tol=tol)


def dt_distance(K: Polytope, e, x) -> float:
    """Geometric mean of the two ray distances from x to the boundary along e."""
    e = np.asarray(e, dtype=float).ravel()
    e = e / np.linalg.norm(e)
    x = np.asarray(x, dtype=float).ravel()
    if not K.contains(x):
        raise ValueError("point lies outside the polytope")
    t_plus, t_minus = np.inf, np.inf
    for n, c in K.halfspaces:
        slope = n @ e
        room = n @ x - c  # >= 0 inside
        if slope < 0:
            t_plus = min(t_plus, room / -slope)
        elif slope > 0:
            t_minus = min(t_minus, room / slope)
    if not np.isfinite(t_plus) or not np.isfinite(t_minus):
        raise ValueError("polytope is unbounded along the given direction")
    return float(np.sqrt(max(t_plus, 0.0) * max(t_minus, 0.0)))


def _dt_distances_batch(K: Polytope, e: np.ndarray, x: np.ndarray) -> np.ndarray:
    e = e / np.linalg.norm(e)
    t_plus = np.full(x.shape[0], np.inf)
    t_minus = np.full(x.shape[0], np.inf)
    for n, c in K.halfspaces:
        slope = n @ e
        room = np.maximum(x @ n - c, 0.0)
        if slope < 0:
            t_plus = np.minimum(t_plus, room / -slope)
        elif slope > 0:
            t_minus = np.minimum(t_minus, room / slope)
    return np.sqrt(t_plus * t_minus)


def edge_directions(K: Polytope) -> np.ndarray:
    """Deduplicated unit directions of the polytope's edges.

    Uses facet incidence: a vertex pair sharing d-1 facets spans an edge.
    Automatic extraction is restricted to d <= 3; higher dimensions must
    supply edge_dirs explicitly.
    """
    if K.edge_dirs is not None:
        dirs = K.edge_dirs / np.linalg.norm(K.edge_dirs, axis=1, keepdims=True)
        return _dedupe_directions(dirs)
    d = K.dim
    if d == 1:
        return np.array([[1.0]])
    if d > 3:
        raise ValueError("automatic edge extraction needs d <= 3; pass edge_dirs")
    tol = max(1e-9, REL_TOL * max(K.diameter, 1.0))
    verts = K.vertices
    active = []
    for v in verts:
        active.append({i for i, (n, c) in enumerate(K.halfspaces)
                       if abs(n @ v - c) <= tol})
    dirs = []
    for i in range(len(verts)):
        for j in range(i + 1, len(verts)):
            if len(active[i] & active[j]) >= d - 1:
                t = verts[j] - verts[i]
                nt = np.linalg.norm(t)
                if nt > tol:
                    dirs.append(t / nt)
    if not dirs:
        raise ValueError("no edges found; check vertex/halfspace consistency")
    return _dedupe_directions(np.array(dirs))


def _dedupe_directions(dirs: np.ndarray) -> np.ndarray:
    out = []
    for e in dirs:
        # canonical sign: first nonzero coordinate positive
        nz = np.nonzero(np.abs(e) > 1e-12)[0][0]
        if e[nz] < 0:
            e = -e
        if not any(np.allclose(e, f, atol=1e-9) for f in out):
            out.append(e)
    return np.array(out)


# ---------------------------------------------------------------------------
# modulus estimation


def _step_pool(t: float, top: float, per_octave: int = 8,
               octaves: int = 22) -> np.ndarray:
    """Global geometric step grid intersected with (0, t].

    The grid never depends on t, so estimates over the filtered grid are
    suprema over nested sets and therefore monotone in t.
    """
    hs = top * 2.0 ** (-np.arange(0, octaves * per_octave + 1) / per_octave)
    return hs[hs <= t]


def modulus_sample_points(K, n_x: int, seed: int = 0,
                          boundary_levels: int = 48) -> np.ndarray:
    """Deterministic interior pool: convex vertex mixtures plus geometric
    layers toward every vertex and facet midpoint.

    Vertex mixtures make the pool equivariant under affine maps of the
    vertex list, and the shrinking layers resolve boundary-weighted
    behavior down to distances diam * 2^-boundary_levels, far below any
    step in the ladder.
    """
    verts = np.atleast_2d(K.vertices)
    m = len(verts)
    w = -np.log(np.maximum(halton(n_x, m, offset=seed * 999_983), 1e-300))
    w /= w.sum(axis=1, keepdims=True)
    bulk = w @ verts
    anchors = [verts]
    if hasattr(K, "halfspaces"):
        tol = max(1e-9, REL_TOL * max(K.diameter, 1.0))
        for n, c in K.halfspaces:
            on = verts[np.abs(verts @ n - c) <= tol]
            if len(on):
                anchors.append(on.mean(axis=0, keepdims=True))
    anchors = np.vstack(anchors)
    layers = [bulk]
    shrink = 2.0 ** -np.arange(1, boundary_levels + 1)
    sub = bulk[: max(4, n_x // 16)]
    for a in anchors:
        for s in shrink:
            layers.append(a + s * (sub - a))
    layers.append(verts)
    return np.vstack(layers)


def _sup_by_step(f, K, points, dirs, hs, weighted: bool) -> np.ndarray:
    """Per-step suprema of symmetric differences over the pool.

    weighted=True scales the step at x by the direction's boundary
    distance factor; pairs leaving the domain are discarded.
    """
    sups = np.zeros(len(hs))
    for e in dirs:
        e = e / np.linalg.norm(e)
        if weighted:
            dist = _dt_distances_batch(K, e, points)
            keep = dist > 0
            pts, scale = points[keep], dist[keep]
        else:
            pts, scale = points, np.ones(len(points))
        for i, h in enumerate(hs):
            step = 0.5 * h * scale
            a = pts + step[:, None] * e
            b = pts - step[:, None] * e
            ok = K.contains(a) & K.contains(b)
            if not np.any(ok):
                continue
            diff = np.abs(f(a[ok]) - f(b[ok]))
            sups[i] = max(sups[i], float(diff.max()))
    return sups


def dt_modulus_estimate(f, K: Polytope, t: float, n_x: int = 512, n_h: int = 8,
                        seed: int = 0, points=None, dirs=None) -> float:
    """Empirical boundary-weighted modulus at step t.

    Supremum of |f(x + s e / 2) - f(x - s e / 2)| with s = h * dist(e, x)
    over the sample pool, all edge directions, and the global ladder of
    steps h <= t (n_h steps per octave); monotone nondecreasing in t.
    """
    if t <= 0:
        raise ValueError("step must be positive")
    if points is None:
        points = modulus_sample_points(K, n_x, seed=seed)
    if dirs is None:
        dirs = edge_directions(K)
    hs = _step_pool(t, 1.0, per_octave=n_h)
    sups = _sup_by_step(f, K, points, dirs, hs, weighted=True)
    return float(sups.max()) if len(sups) else 0.0


def dt_modulus_ladder(f, K: Polytope, ts, n_x: int = 512, n_h: int = 8,
                      seed: int = 0, dirs=None) -> np.ndarray:
    """dt_modulus_estimate over a whole t ladder with one evaluation pass."""
    points = modulus_sample_points(K, n_x, seed=seed)
    if dirs is None:
        dirs = edge_directions(K)
    ts = np.asarray(ts, dtype=float)
    hs = _step_pool(float(ts.max()), 1.0, per_octave=n_h)
    sups = _sup_by_step(f, K, points, dirs, hs, weighted=True)
    return np.array([sups[hs <= t].max() if np.any(hs <= t) else 0.0 for t in ts])


def ordinary_modulus_estimate(f, K, t: float, n_pairs: int = 512, seed: int = 0,
                              points=None, dirs=None) -> float:
    """Empirical unweighted modulus: sup |f(x) - f(y)| over sampled pairs
    at distance at most t inside the domain."""
    if t <= 0:
        raise ValueError("step must be positive")
    if points is None:
        points = modulus_sample_points(K, n_pairs, seed=seed)
    if dirs is None:
        dirs = _ordinary_directions(K)
    hs = _step_pool(t, max(K.diameter, 1.0))
    sups = _sup_by_step(f, K, points, dirs, hs, weighted=False)
    return float(sups.max()) if len(sups) else 0.0


def ordinary_modulus_ladder(f, K, ts, n_pairs: int = 512, seed: int = 0,
                            dirs=None) -> np.ndarray:
    points = modulus_sample_points(K, n_pairs, seed=seed)
    if dirs is None:
        dirs = _ordinary_directions(K)
    ts = np.asarray(ts, dtype=float)
    hs = _step_pool(float(ts.max()), max(K.diameter, 1.0))
    sups = _sup_by_step(f, K, points, dirs, hs, weighted=False)
    return np.array([sups[hs <= t].max() if np.any(hs <= t) else 0.0 for t in ts])


def _ordinary_directions(K) -> np.ndarray:
    if K.dim == 1:
        return np.array([[1.0]])
    if K.dim == 2:
        ang = np.pi * halton(16, 1, offset=13).ravel()
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
        if hasattr(K, "halfspaces"):
            dirs = np.vstack([dirs, edge_directions(K)])
        return dirs
    raise ValueError("supply directions explicitly for d >= 3")
