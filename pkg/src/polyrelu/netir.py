"""Layered ReLU network intermediate representation.

A network is a chain of layers, each an affine map optionally followed by
the ReLU activation.  Activated layers may carry intra-layer links: a
strictly lower-triangular matrix W so that neuron k receives, before its
own activation, a weighted sum of the already-activated outputs of
neurons 0..k-1 of the same layer.  Intra links add expressive power at
the cost of one matrix per layer and no extra activation depth.

Conventions used throughout the package:
  * the final layer of every constructed network is an unactivated
    affine readout; all other layers are activated,
  * `compose` and `stack` never re-multiply affine maps numerically, so
    composed/stacked networks perform bit-identical arithmetic to their
    parts (exactness of zero propagation depends on this),
  * evaluation is batched; a single point is promoted to a batch.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import NetFormatError


def relu(x):
    return np.maximum(x, 0.0)


class AffineMap:
    """Dense affine map y = M x + b with M of shape (out_dim, in_dim)."""

    def __init__(self, matrix, bias):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.bias = np.asarray(bias, dtype=float).ravel()
        if self.matrix.shape[0] != self.bias.shape[0]:
            raise NetFormatError(
                f"bias length {self.bias.shape[0]} != rows {self.matrix.shape[0]}")
        if not (np.all(np.isfinite(self.matrix)) and np.all(np.isfinite(self.bias))):
            raise NetFormatError("non-finite affine entries")

    @property
    def in_dim(self):
        return self.matrix.shape[1]

    @property
    def out_dim(self):
        return self.matrix.shape[0]

    def apply(self, x):
        return x @ self.matrix.T + self.bias

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.apply(x[None, :])[0]
        return self.apply(x)


class Layer:
    """One network layer: affine map, optional intra links, activation flag."""

    def __init__(self, affine: AffineMap, intra=None, activated: bool = True):
        self.affine = affine
        self.activated = bool(activated)
        if intra is not None:
            intra = np.asarray(intra, dtype=float)
            w = affine.out_dim
            if intra.shape != (w, w):
                raise NetFormatError(f"intra shape {intra.shape} != ({w}, {w})")
            if np.any(intra[np.triu_indices(w)] != 0.0):
                raise NetFormatError("intra matrix must be strictly lower triangular")
            if not np.all(np.isfinite(intra)):
                raise NetFormatError("non-finite intra entries")
            if not np.any(intra):
                intra = None
        if intra is not None and not self.activated:
            raise NetFormatError("intra links require an activated layer")
        self.intra = intra
        # row -> (column indices, weights), ascending rows; cached for eval
        self._intra_rows = []
        if intra is not None:
            for k in range(intra.shape[0]):
                cols = np.nonzero(intra[k, :k])[0]
                if cols.size:
                    self._intra_rows.append((k, cols, intra[k, cols].copy()))

    @property
    def width(self):
        return self.affine.out_dim

    def apply(self, x):
        z = self.affine.apply(x)
        if not self.activated:
            return z
        y = relu(z)
        for k, cols, w in self._intra_rows:
            y[:, k] = relu(z[:, k] + y[:, cols] @ w)
        return y


class ReluNetwork:
    """A chain of layers mapping R^input_dim to R^out_dim."""

    def __init__(self, input_dim: int, layers):
        self.input_dim = int(input_dim)
        self.layers = list(layers)
        if not self.layers:
            raise NetFormatError("network needs at least one layer")
        d = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.affine.in_dim != d:
                raise NetFormatError(
                    f"layer {i} expects {layer.affine.in_dim} inputs, got {d}")
            d = layer.affine.out_dim
        self.out_dim = d

    @property
    def depth(self):
        """Number of activated layers."""
        return sum(1 for l in self.layers if l.activated)

    @property
    def width(self):
        return max(l.width for l in self.layers)

    def eval(self, x):
        """Evaluate at a point (1-d array) or a batch (rows are points)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.input_dim:
            raise NetFormatError(
                f"input dim {x.shape[1]} != network input {self.input_dim}")
        # Pad single points to a 2-row batch: keeps every affine application
        # on the gemm path whose k-ordered accumulation the zero-propagation
        # guarantees rely on (gemv may reorder partial sums).
        padded = x.shape[0] == 1
        if padded:
            x = np.vstack([x, x])
        for layer in self.layers:
            x = layer.apply(x)
        if padded:
            x = x[:1]
        return x[0] if single else x

    def __call__(self, x):
        return self.eval(x)


def identity_net(dim: int) -> ReluNetwork:
    """Single unactivated identity layer."""
    return ReluNetwork(dim, [Layer(AffineMap(np.eye(dim), np.zeros(dim)),
                                   activated=False)])


def compose(outer: ReluNetwork, inner: ReluNetwork) -> ReluNetwork:
    """Network computing outer(inner(x)).

    The layer lists are concatenated unchanged; the boundary affine maps
    stay separate so the composite performs exactly the floating-point
    operations of the two parts (numeric fusion would re-round).
    """
    if inner.out_dim != outer.input_dim:
        raise NetFormatError(
            f"cannot compose: inner out {inner.out_dim} != outer in {outer.input_dim}")
    return ReluNetwork(inner.input_dim, inner.layers + outer.layers)


def pad_depth(net: ReluNetwork, target_depth: int) -> ReluNetwork:
    """Append identity passthrough stages until depth == target_depth.

    Each stage replaces the final affine F by the activated pair
    [F; -F] followed by the readout [I, -I], which reproduces F x + b
    exactly for all reals (sigma(t) - sigma(-t) = t).
    """
    if net.depth > target_depth:
        raise NetFormatError("cannot reduce depth")
    layers = list(net.layers)
    for _ in range(target_depth - net.depth):
        last = layers.pop()
        if last.activated:
            # keep the activated layer; duplicate its outputs instead
            layers.append(last)
            m = last.width
            pm = np.vstack([np.eye(m), -np.eye(m)])
            layers.append(Layer(AffineMap(pm, np.zeros(2 * m))))
            layers.append(Layer(AffineMap(np.hstack([np.eye(m), -np.eye(m)]),
                                          np.zeros(m)), activated=False))
        else:
            F, b = last.affine.matrix, last.affine.bias
            m = F.shape[0]
            layers.append(Layer(AffineMap(np.vstack([F, -F]), np.concatenate([b, -b]))))
            layers.append(Layer(AffineMap(np.hstack([np.eye(m), -np.eye(m)]),
                                          np.zeros(m)), activated=False))
    return ReluNetwork(net.input_dim, layers)


def stack(nets) -> ReluNetwork:
    """Parallel combination: output is the concatenation of all outputs.

    All networks must share input_dim.  Depth differences are levelled
    with exact identity passthrough stages; unactivated interior layers
    (from compose) are aligned by giving the other networks an identity
    affine layer at the matching position.
    """
    nets = list(nets)
    if not nets:
        raise NetFormatError("stack of zero networks")
    d = nets[0].input_dim
    if any(n.input_dim != d for n in nets):
        raise NetFormatError("stacked networks must share input_dim")
    if len(nets) == 1:
        return nets[0]
    target = max(n.depth for n in nets)
    nets = [pad_depth(n, target) for n in nets]

    remaining = [list(n.layers) for n in nets]
    # every net currently reads the shared input: column slice = full input
    col = [slice(0, d)] * len(nets)
    in_dim = d
    merged = []
    while any(len(r) > 1 for r in remaining):
        advance_unact = [len(r) > 1 and not r[0].activated for r in remaining]
        if any(advance_unact):
            picked = [r[0] if a else None for r, a in zip(remaining, advance_unact)]
        else:
            picked = [r[0] for r in remaining]
        out_dims = [p.width if p is not None else (col[i].stop - col[i].start)
                    for i, p in enumerate(picked)]
        total = sum(out_dims)
        mat = np.zeros((total, in_dim))
        bias = np.zeros(total)
        intra = np.zeros((total, total))
        has_intra = False
        activated = any(p is not None and p.activated for p in picked)
        row = 0
        new_col = []
        for i, p in enumerate(picked):
            rows = slice(row, row + out_dims[i])
            if p is None:
                mat[rows, col[i]] = np.eye(out_dims[i])
            else:
                mat[rows, col[i]] = p.affine.matrix
                bias[rows] = p.affine.bias
                if p.intra is not None:
                    intra[rows, rows] = p.intra
                    has_intra = True
                remaining[i].pop(0)
            new_col.append(slice(row, row + out_dims[i]))
            row += out_dims[i]
        merged.append(Layer(AffineMap(mat, bias),
                            intra=intra if has_intra else None,
                            activated=activated))
        col, in_dim = new_col, total
    # all nets now sit at their final unactivated affine
    finals = [r[0] for r in remaining]
    total = sum(f.width for f in finals)
    mat = np.zeros((total, in_dim))
    bias = np.zeros(total)
    row = 0
    for i, f in enumerate(finals):
        rows = slice(row, row + f.width)
        mat[rows, col[i]] = f.affine.matrix
        bias[rows] = f.affine.bias
        row += f.width
    merged.append(Layer(AffineMap(mat, bias), activated=False))
    return ReluNetwork(d, merged)


def lower_intra(net: ReluNetwork) -> ReluNetwork:
    """Rewrite every intra-linked layer as a chain of plain layers.

    Neuron k of an intra layer becomes its own activated layer; pending
    pre-activations travel as sigma(z) - sigma(-z) pairs and finished
    outputs travel through single sigmas (they are nonnegative).
    """
    out_layers = []
    for layer in net.layers:
        if layer.intra is None:
            out_layers.append(Layer(layer.affine, activated=layer.activated))
            continue
        w = layer.width
        A, b, W = layer.affine.matrix, layer.affine.bias, layer.intra
        n_in = A.shape[1]
        # stage 0: y_0 plus carried pre-activation pairs for rows 1..w-1
        m0 = np.zeros((2 * w - 1, n_in))
        b0 = np.zeros(2 * w - 1)
        m0[0], b0[0] = A[0], b[0]
        for k in range(1, w):
            m0[2 * k - 1], b0[2 * k - 1] = A[k], b[k]
            m0[2 * k], b0[2 * k] = -A[k], -b[k]
        out_layers.append(Layer(AffineMap(m0, b0)))
        # stage k activates neuron k from its reconstructed pre-activation
        # plus intra links into the already finished outputs
        for k in range(1, w):
            inp = k + 2 * (w - k)  # finished 0..k-1, pairs for k..w-1
            m = np.zeros((inp - 1, inp))
            for j in range(k):
                m[j, j] = 1.0  # pass finished outputs
            m[k, k] = 1.0      # z_k plus
            m[k, k + 1] = -1.0  # minus its pair
            m[k, :k] = W[k, :k]
            for j in range(k + 1, w):  # remaining pairs shift left by one
                src = k + 2 * (j - k)
                m[k + 2 * (j - k) - 1, src] = 1.0
                m[k + 2 * (j - k), src + 1] = 1.0
            out_layers.append(Layer(AffineMap(m, np.zeros(inp - 1))))
    return ReluNetwork(net.input_dim, out_layers)


def size_report(net: ReluNetwork) -> dict:
    """Width, depth, and structural nonzero counts."""
    params = 0
    intra_links = 0
    for layer in net.layers:
        params += int(np.count_nonzero(layer.affine.matrix))
        params += int(np.count_nonzero(layer.affine.bias))
        if layer.intra is not None:
            n = int(np.count_nonzero(layer.intra))
            params += n
            intra_links += n
    return {
        "width": net.width,
        "depth": net.depth,
        "parameter_count": params,
        "intra_link_count": intra_links,
    }


def serialize(net: ReluNetwork) -> str:
    """JSON text; binary64 values as shortest round-trip decimals."""
    payload = {
        "input_dim": net.input_dim,
        "layers": [
            {
                "matrix": layer.affine.matrix.tolist(),
                "bias": layer.affine.bias.tolist(),
                "intra": None if layer.intra is None else layer.intra.tolist(),
                "activated": layer.activated,
            }
            for layer in net.layers
        ],
    }
    return json.dumps(payload)


def deserialize(text) -> ReluNetwork:
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise NetFormatError(f"bad network JSON: {e}") from None
    try:
        layers = [
            Layer(AffineMap(np.array(spec["matrix"], dtype=float),
                            np.array(spec["bias"], dtype=float)),
                  intra=spec.get("intra"),
                  activated=spec["activated"])
            for spec in payload["layers"]
        ]
        return ReluNetwork(payload["input_dim"], layers)
    except (KeyError, TypeError) as e:
        raise NetFormatError(f"bad network payload: {e}") from None
