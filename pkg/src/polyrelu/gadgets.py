"""Constructive ReLU sub-networks: sawtooth, squaring, products, polynomials.

The constructions all hang off one intra-linked hidden-layer pattern.
A width s+1 layer with strictly lower-triangular links realizes every
sawtooth g_1..g_s at once (g_1(x) = 2x - 4 sigma(x - 1/2), and each
further tooth costs one neuron fed 1/2 - g_{j-1} through intra links).
Telescoping the teeth gives the piecewise-linear interpolant of x^2 on
dyadic nodes,

    f_N(x) = x - sum_{j=1}^{N} g_j(x) / 4^j,

whose even extension sigma(f_N(x)) + sigma(f_N(-x)) feeds the product
gadget f~((x+y)/2) - f~((x-y)/2) = xy up to 2^{-2N-2}, exactly zero when
either factor is zero.  Products chain into approximate powers and hence
polynomials and clipped Chebyshev units.

Exact support containment is load bearing everywhere downstream, so the
clip and plateau gadgets are built from nested minima (min(u, v) =
v - sigma(v - u)) whose final pre-activation is strictly negative outside
the target interval: the network output outside is a ReLU of a negative
number, identically zero in floating point, not a cancellation of
rounded terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netir import AffineMap, Layer, ReluNetwork


@dataclass(frozen=True)
class GadgetParams:
    """Common accuracy knobs: product level N, degree n, clip margin, ranges."""
    N: int = 8
    n: int = 4
    delta: float = 0.05
    Bx: float = 1.0
    By: float = 1.0

    def __post_init__(self):
        if self.N < 1 or self.n < 1:
            raise ValueError("N and n must be >= 1")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("clip margin must lie in (0, 1)")
        if self.Bx <= 0 or self.By <= 0:
            raise ValueError("range bounds must be positive")


# ---------------------------------------------------------------------------
# layer assembly machinery (also used by the compiler)

class Val:
    """Affine functional row . y + bias over the builder's current outputs."""

    __slots__ = ("row", "bias")

    def __init__(self, row, bias=0.0):
        self.row = np.asarray(row, dtype=float)
        self.bias = float(bias)

    def __add__(self, other):
        if isinstance(other, Val):
            return Val(self.row + other.row, self.bias + other.bias)
        return Val(self.row, self.bias + float(other))

    def __sub__(self, other):
        if isinstance(other, Val):
            return Val(self.row - other.row, self.bias - other.bias)
        return Val(self.row, self.bias - float(other))

    def __mul__(self, c):
        return Val(self.row * float(c), self.bias * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return Val(-self.row, -self.bias)


def sawtooth_rows(s: int):
    """Layer data for the shared sawtooth hidden layer of width s+1.

    Returns (bias, intra, g_rows, g_bias): the first two neurons take the
    block input u and u - 1/2; neuron j+1 (j >= 1) has zero affine row,
    bias 1/2 - b_j, and intra weights -w_j, where g_j = w_j . y + b_j are
    the tooth readouts accumulated in g_rows / g_bias.
    """
    if s < 1:
        raise ValueError("need s >= 1")
    w = s + 1
    bias = np.zeros(w)
    bias[1] = -0.5
    intra = np.zeros((w, w))
    g_rows = np.zeros((s, w))
    g_bias = np.zeros(s)
    g_rows[0, 0], g_rows[0, 1] = 2.0, -4.0
    for j in range(1, s):
        intra[j + 1, : j + 1] = -g_rows[j - 1, : j + 1]
        bias[j + 1] = 0.5 - g_bias[j - 1]
        g_rows[j] = -2.0 * g_rows[j - 1]
        g_rows[j, j + 1] = -4.0
        g_bias[j] = 2.0 - 2.0 * g_bias[j - 1]
    return bias, intra, g_rows, g_bias


def square_readout(s: int):
    """Readout of f_s (PWL interpolant of x^2) over the sawtooth layer."""
    _, _, g_rows, g_bias = sawtooth_rows(s)
    row = np.zeros(s + 1)
    row[0] = 1.0
    b = 0.0
    for j in range(s):
        row -= g_rows[j] / 4.0 ** (j + 1)
        b -= g_bias[j] / 4.0 ** (j + 1)
    return row, b


class LayerSpec:
    """Accumulates neurons of one activated layer before it is frozen."""

    def __init__(self, in_dim: int):
        self.in_dim = in_dim
        self.rows = []
        self.biases = []
        self.intra = []  # (row, col, weight), local indices

    @property
    def width(self):
        return len(self.rows)

    def neuron(self, val: Val, intra=()):
        if val.row.shape[0] != self.in_dim:
            raise ValueError("functional does not match layer input width")
        idx = len(self.rows)
        self.rows.append(val.row)
        self.biases.append(val.bias)
        for col, wgt in intra:
            self.intra.append((idx, col, wgt))
        return idx

    def sawtooth_block(self, val: Val, s: int):
        """s+1 neurons realizing the sawtooth layer fed by the functional val."""
        bias, intra, _, _ = sawtooth_rows(s)
        base = len(self.rows)
        self.neuron(val)
        self.neuron(val - 0.5)
        zero = Val(np.zeros(self.in_dim))
        for j in range(1, s):
            links = [(base + c, intra[j + 1, c])
                     for c in range(j + 1) if intra[j + 1, c] != 0.0]
            self.neuron(zero + bias[j + 1], intra=links)
        return base

    def passthrough(self, val: Val, nonneg: bool = False):
        if nonneg:
            return ("pos", self.neuron(val))
        return ("pair", self.neuron(val), self.neuron(-val))


class Builder:
    """Grows a network layer by layer; functionals index the latest outputs."""

    def __init__(self, input_dim: int):
        self.input_dim = input_dim
        self.cur = input_dim
        self.layers = []

    def input_val(self, i: int) -> Val:
        return self.e(i)

    def e(self, i: int) -> Val:
        row = np.zeros(self.cur)
        row[i] = 1.0
        return Val(row)

    def slice_val(self, start: int, local_row, bias=0.0) -> Val:
        row = np.zeros(self.cur)
        local_row = np.asarray(local_row, dtype=float)
        row[start:start + local_row.shape[0]] = local_row
        return Val(row, bias)

    def resolve(self, token) -> Val:
        if token[0] == "pos":
            return self.e(token[1])
        return self.e(token[1]) - self.e(token[2])

    def push(self, spec: LayerSpec):
        if spec.in_dim != self.cur:
            raise ValueError("layer spec built against a stale width")
        w = spec.width
        matrix = np.vstack(spec.rows)
        bias = np.array(spec.biases)
        intra = None
        if spec.intra:
            intra = np.zeros((w, w))
            for r, c, wgt in spec.intra:
                intra[r, c] = wgt
        self.layers.append(Layer(AffineMap(matrix, bias), intra=intra))
        self.cur = w

    def prepend_affine(self, matrix, bias):
        """Unactivated affine applied to the raw input before everything else."""
        if self.layers:
            raise ValueError("prepend before adding layers")
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.layers.append(Layer(AffineMap(m, bias), activated=False))
        # builder functionals now reference the affine's outputs
        if m.shape[1] != self.input_dim:
            raise ValueError("affine does not match input dim")
        self.cur = m.shape[0]

    def finish(self, out_vals) -> ReluNetwork:
        if isinstance(out_vals, Val):
            out_vals = [out_vals]
        matrix = np.vstack([v.row for v in out_vals])
        bias = np.array([v.bias for v in out_vals])
        self.layers.append(Layer(AffineMap(matrix, bias), activated=False))
        return ReluNetwork(self.input_dim, self.layers)


def product_bank(builder: Builder, units, passthrough, N: int):
    """Emit two activated layers computing one scaled product per unit.

    units: iterable of (val_x, val_y, Bx, By); each output functional
    approximates x*y for |x| <= Bx, |y| <= By with error Bx*By*2^(-2N-2)
    and range inside [-Bx*By, Bx*By].  When both factors read exactly-zero
    neurons every block input is a literal zero and the output vanishes
    exactly; a single zero factor only cancels up to summation order, so
    callers that need hard zero suppression wrap the result in a deadzone
    or gate instead of relying on cancellation.
    passthrough: iterable of (val, nonneg) carried across both layers.

    Returns (product_vals, passed_vals).
    """
    units = list(units)
    passthrough = list(passthrough)
    spec_a = LayerSpec(builder.cur)
    blocks = []
    for vx, vy, bx, by in units:
        u = vx * (0.5 / bx) + vy * (0.5 / by)
        v = vx * (0.5 / bx) - vy * (0.5 / by)
        blocks.append([spec_a.sawtooth_block(f, N) for f in (u, -u, v, -v)])
    tok_a = [spec_a.passthrough(val, nonneg) for val, nonneg in passthrough]
    builder.push(spec_a)

    f_row, f_bias = square_readout(N)
    spec_b = LayerSpec(builder.cur)
    quads = [[spec_b.neuron(builder.slice_val(b, f_row, f_bias)) for b in blk]
             for blk in blocks]
    mid = [builder.resolve(t) for t in tok_a]
    tok_b = [spec_b.passthrough(v, nonneg)
             for v, (_, nonneg) in zip(mid, passthrough)]
    builder.push(spec_b)

    outs = []
    for quad, (vx, vy, bx, by) in zip(quads, units):
        c = bx * by
        row = np.zeros(builder.cur)
        row[quad[0]], row[quad[1]] = c, c
        row[quad[2]], row[quad[3]] = -c, -c
        outs.append(Val(row))
    passed = [builder.resolve(t) for t in tok_b]
    return outs, passed


def gate_bank(builder: Builder, units, passthrough):
    """One activated layer of soft-threshold gates.

    Each unit (val_g, val_mask, M) yields sigma(g - M(1-m)) -
    sigma(-g - M(1-m)), which equals g exactly where the mask is 1,
    is exactly zero where the mask is 0 (the pre-activations are then
    below -M plus rounding, or literal zeros when g reads zero neurons),
    and shrinks g toward zero in between, never growing past |g|.
    Requires |g| <= M wherever the mask is below 1.

    Returns (gate_vals, passed_vals).
    """
    units = list(units)
    passthrough = list(passthrough)
    spec = LayerSpec(builder.cur)
    pairs = []
    for g, mask, m_bound in units:
        shift = mask * m_bound - m_bound  # -M(1-m), bias folds exactly at m=1
        pairs.append((spec.neuron(g + shift), spec.neuron(-g + shift)))
    toks = [spec.passthrough(val, nonneg) for val, nonneg in passthrough]
    builder.push(spec)
    outs = [builder.e(p) - builder.e(q) for p, q in pairs]
    passed = [builder.resolve(t) for t in toks]
    return outs, passed


def even_square_bank(builder: Builder, vals, passthrough, N: int):
    """Like product_bank but each unit squares one functional (f_N(|.|))."""
    vals = list(vals)
    passthrough = list(passthrough)
    spec_a = LayerSpec(builder.cur)
    blocks = [[spec_a.sawtooth_block(v, N), spec_a.sawtooth_block(-v, N)]
              for v in vals]
    tok_a = [spec_a.passthrough(val, nonneg) for val, nonneg in passthrough]
    builder.push(spec_a)
    f_row, f_bias = square_readout(N)
    spec_b = LayerSpec(builder.cur)
    pairs = [[spec_b.neuron(builder.slice_val(b, f_row, f_bias)) for b in blk]
             for blk in blocks]
    mid = [builder.resolve(t) for t in tok_a]
    tok_b = [spec_b.passthrough(v, nonneg)
             for v, (_, nonneg) in zip(mid, passthrough)]
    builder.push(spec_b)
    outs = []
    for pair in pairs:
        row = np.zeros(builder.cur)
        row[pair[0]] = row[pair[1]] = 1.0
        outs.append(Val(row))
    passed = [builder.resolve(t) for t in tok_b]
    return outs, passed


def clip_block(spec: LayerSpec, val: Val, delta: float):
    """Four neurons clipping the functional to the unit interval.

    Realizes h(u) = u on [-1+delta, 1-delta], 0 outside [-1, 1], linear
    between, as sigma(min(u, r(1-u))) - sigma(min(-u, r(1+u))) with
    r = (1-delta)/delta; both minima are computed through intra links, so
    outside [-1, 1] the final pre-activations are strictly negative and
    the output is exactly zero.  Returns the block's first neuron index;
    the clipped value reads as y[base+1] - y[base+3].
    """
    r = (1.0 - delta) / delta
    base = len(spec.rows)
    vp = val * (-r) + r          # r (1 - u)
    vm = val * r + r             # r (1 + u)
    spec.neuron(vp - val)                          # sigma(v+ - u)
    spec.neuron(vp, intra=[(base, -1.0)])          # sigma(v+ - y0) = h+
    spec.neuron(vm + val)                          # sigma(v- + u)
    spec.neuron(vm, intra=[(base + 2, -1.0)])      # sigma(v- - y2) = h-
    return base


def plateau_block(spec: LayerSpec, val: Val, delta: float):
    """Three neurons: 1 on [-1+delta, 1-delta], 0 outside [-1, 1], linear between.

    y2 = sigma(1 - (sigma(u - a) + sigma(-u - a)) / delta), a = 1 - delta;
    exactly 1 on the plateau, exactly 0 beyond the unit interval.
    """
    a = 1.0 - delta
    base = len(spec.rows)
    spec.neuron(val - a)
    spec.neuron(-val - a)
    spec.neuron(Val(np.zeros(spec.in_dim), 1.0),
                intra=[(base, -1.0 / delta), (base + 1, -1.0 / delta)])
    return base


# ---------------------------------------------------------------------------
# public gadget constructors

def sawtooth_net(s: int) -> ReluNetwork:
    """Single intra-linked layer of width s+1 realizing g_s on [0, 1]."""
    _, _, g_rows, g_bias = sawtooth_rows(s)
    b = Builder(1)
    spec = LayerSpec(1)
    base = spec.sawtooth_block(b.input_val(0), s)
    b.push(spec)
    return b.finish(b.slice_val(base, g_rows[s - 1], g_bias[s - 1]))


def sawtooth_closed_form(s: int, x):
    """Oracle for g_s: triangle wave with peaks at odd multiples of 2^-s."""
    u = np.asarray(x, dtype=float) * 2.0 ** s
    return 1.0 - np.abs(np.mod(u, 2.0) - 1.0)


def square_net(N: int) -> ReluNetwork:
    """Width N+1 single layer realizing the dyadic interpolant f_N of x^2."""
    b = Builder(1)
    spec = LayerSpec(1)
    base = spec.sawtooth_block(b.input_val(0), N)
    b.push(spec)
    row, bias = square_readout(N)
    return b.finish(b.slice_val(base, row, bias))


def even_square_net(N: int) -> ReluNetwork:
    """f_N(|x|) on [-1, 1]: error at most 2^(-2(N+1)), width 2(N+1), depth 2."""
    b = Builder(1)
    outs, _ = even_square_bank(b, [b.input_val(0)], [], N)
    return b.finish(outs[0])


def _deadzone_product(N: int, Bx: float, By: float) -> ReluNetwork:
    """Two-input product gadget with hard zero suppression near zero.

    Layer one holds the four interpolant blocks on (x/Bx +- y/By)/2.
    Layer two reads each block through a sigma(f) neuron, combines them as
    raw = z0 + z1 - z2 - z3 (the normalized product, accurate to
    2^(-2N-2)), and applies a deadzone of width c = 2^(-2N-1) through
    intra links:

        out+ = min(2 sigma(raw - c/2), sigma(raw)),    out = out+ - out-

    so raw passes through one neuron unchanged when raw > c, the band
    [c/2, c] shrinks by at most c/2, and |raw| <= c/2 leaves every
    deadzone neuron a ReLU of a negative number.  When either input is
    exactly zero the raw combination is pure rounding noise far below
    c/2, so the output assembles from exact zeros and bitwise-equal
    pairs; no floating-point summation order can leak.  The readout
    scales by Bx*By, keeping the total error below Bx*By*2^(-2N).
    """
    b = Builder(2)
    vx, vy = b.input_val(0), b.input_val(1)
    spec_a = LayerSpec(2)
    u = vx * (0.5 / Bx) + vy * (0.5 / By)
    v = vx * (0.5 / Bx) - vy * (0.5 / By)
    blocks = [spec_a.sawtooth_block(fn, N) for fn in (u, -u, v, -v)]
    b.push(spec_a)
    f_row, f_bias = square_readout(N)
    spec_b = LayerSpec(b.cur)
    zs = [spec_b.neuron(b.slice_val(blk, f_row, f_bias)) for blk in blocks]
    # raw = z0 + z1 - z2 - z3 taken through short intra links: at most one
    # of each sign pair is nonzero, so the four-term sums are exact and
    # symmetric under swapping the inputs
    c = 2.0 ** (-2 * N - 1)
    plus = [(zs[0], 1.0), (zs[1], 1.0), (zs[2], -1.0), (zs[3], -1.0)]
    minus = [(zs[0], -1.0), (zs[1], -1.0), (zs[2], 1.0), (zs[3], 1.0)]
    zero = Val(np.zeros(b.cur))
    pa = spec_b.neuron(zero - 0.5 * c, intra=plus)
    pb = spec_b.neuron(zero, intra=plus)
    pq = spec_b.neuron(zero, intra=[(pb, 1.0), (pa, -2.0)])
    ma = spec_b.neuron(zero - 0.5 * c, intra=minus)
    mb = spec_b.neuron(zero, intra=minus)
    mq = spec_b.neuron(zero, intra=[(mb, 1.0), (ma, -2.0)])
    b.push(spec_b)
    s = Bx * By
    out = b.e(pb) * s - b.e(pq) * s - b.e(mb) * s + b.e(mq) * s
    return b.finish(out)


def product_net(N: int) -> ReluNetwork:
    """Approximate product on [-1, 1]^2, exactly zero on the axes.

    Interpolates xy on the dyadic diagonal grid with error at most
    2^(-2N-1) (interpolation plus the zero-suppression deadzone), range
    inside [-1, 1], width 4(N+1), depth 2.
    """
    return _deadzone_product(N, 1.0, 1.0)


def scaled_product_net(N: int, Bx: float, By: float) -> ReluNetwork:
    """Product for |x| <= Bx, |y| <= By with error Bx*By*2^(-2N)."""
    if Bx <= 0 or By <= 0:
        raise ValueError("range bounds must be positive")
    return _deadzone_product(N, Bx, By)


def checked_product_net(N: int, M: float) -> ReluNetwork:
    """Blend product for |g| <= M and masks in [0, 1]; error M*2^(-2N)."""
    if M <= 0:
        raise ValueError("M must be positive")
    return scaled_product_net(N, M, 1.0)


def poly_net(coeffs, N: int, power_mode: str = "chain") -> ReluNetwork:
    """Approximate sum_j a_j x^j on [-1, 1] via chained or treed powers.

    chain: h_j = prod(x, h_{j-1}), depth 2(n-1); tree: h_j =
    prod(h_{floor(j/2)}, h_{ceil(j/2)}), depth 2*ceil(log2 n).  Either way
    the sup error is below max|a_j| * n^2 * 2^(-2N-1).
    """
    coeffs = np.asarray(coeffs, dtype=float).ravel()
    if coeffs.size == 0:
        raise ValueError("empty coefficient vector")
    n = coeffs.size - 1
    b = Builder(1)
    x = b.input_val(0)
    if n == 0:
        return b.finish(Val(np.zeros(1), coeffs[0]))
    if n == 1:
        return b.finish(x * coeffs[1] + coeffs[0])
    if power_mode == "chain":
        h = x
        s = x * coeffs[1] + coeffs[0]
        for j in range(2, n + 1):
            outs, passed = product_bank(
                b, [(x, h, 1.0, 1.0)], [(x, False), (s, False)], N)
            h = outs[0]
            x, s = passed
            s = s + h * coeffs[j]
        return b.finish(s)
    if power_mode == "tree":
        powers = {1: x}
        top = 1
        while top < n:
            new_js = [j for j in range(top + 1, min(2 * top, n) + 1)]
            units = [(powers[j // 2], powers[j - j // 2], 1.0, 1.0) for j in new_js]
            keep = sorted(powers)
            outs, passed = product_bank(
                b, units, [(powers[j], False) for j in keep], N)
            powers = dict(zip(keep, passed))
            powers.update(dict(zip(new_js, outs)))
            top = min(2 * top, n)
        total = Val(np.zeros(b.cur), coeffs[0])
        for j in range(1, n + 1):
            total = total + powers[j] * coeffs[j]
        return b.finish(total)
    raise ValueError(f"unknown power_mode {power_mode!r}")


def clip_net(delta: float) -> ReluNetwork:
    """x on [-1+delta, 1-delta], 0 outside [-1, 1]; one layer, width 4."""
    if not 0.0 < delta < 1.0:
        raise ValueError("clip margin must lie in (0, 1)")
    b = Builder(1)
    spec = LayerSpec(1)
    base = clip_block(spec, b.input_val(0), delta)
    b.push(spec)
    return b.finish(b.e(base + 1) - b.e(base + 3))


def trapezoid_net(delta: float) -> ReluNetwork:
    """1 on [-1+delta, 1-delta], 0 outside [-1, 1]; one layer, width 3."""
    if not 0.0 < delta < 1.0:
        raise ValueError("margin must lie in (0, 1)")
    b = Builder(1)
    spec = LayerSpec(1)
    base = plateau_block(spec, b.input_val(0), delta)
    b.push(spec)
    return b.finish(b.e(base + 2))


def cheb_net(k: int, N: int, delta: float) -> ReluNetwork:
    """Clipped Chebyshev unit: close to T_k on [-1+delta, 1-delta], zero
    outside [-1, 1] exactly.

    Built as the monomial chain of T_k applied to the clipped coordinate.
    Composing with the clip makes the polynomial part land on T_k(0) (its
    constant coefficient) outside the interval, so that constant rides on
    the plateau gadget instead of the bias: the readout is
    sum_{j>=1} a_j h_j + a_0 * plateau, which vanishes identically
    outside.  Sup error on the clipped interval stays below
    k^2 3^k 2^(-2N-1).
    """
    if k < 0:
        raise ValueError("degree must be nonnegative")
    if k == 0:
        return trapezoid_net(delta)
    if k == 1:
        return clip_net(delta)
    from .chebseries import chebyshev_monomial_coeffs
    mono = chebyshev_monomial_coeffs(k)[k]
    b = Builder(1)
    spec = LayerSpec(1)
    cb = clip_block(spec, b.input_val(0), delta)
    pb = plateau_block(spec, b.input_val(0), delta)
    b.push(spec)
    u = b.e(cb + 1) - b.e(cb + 3)
    psi = b.e(pb + 2)
    h = u
    s = u * mono[1]
    for j in range(2, k + 1):
        outs, passed = product_bank(
            b, [(u, h, 1.0, 1.0)], [(u, False), (psi, True), (s, False)], N)
        h = outs[0]
        u, psi, s = passed
        s = s + h * mono[j]
    return b.finish(s + psi * mono[0])
