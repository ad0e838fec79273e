"""Rewrites that turn convolutional and residual networks into plain MLPs.

Both passes only copy existing weights or insert weights in {0, 1}, so a
network with non-negative weights stays non-negative after rewriting.
Biases may change, which does not affect monotonicity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ShapeError, make_rng
from .network import Activation, ConvLayer, DenseLayer, Network, PoolLayer, forward_batch

__all__ = [
    "RewriteError",
    "RewriteReport",
    "conv_to_dense",
    "lower_convolutions",
    "skip_to_mlp",
    "fuzz_equivalence",
    "TOLERANCES",
]

TOLERANCES = {"conv2dense": 1e-12, "skip2mlp": 1e-9}


class RewriteError(ValueError):
    """The network cannot be rewritten exactly."""


@dataclass(frozen=True)
class RewriteReport:
    pass_name: str
    params_before: int
    params_after: int
    max_deviation: float
    tolerance: float | None = None

    @property
    def ok(self):
        return self.tolerance is None or self.max_deviation <= self.tolerance

    def to_json(self):
        return {
            "pass": self.pass_name,
            "params_before": self.params_before,
            "params_after": self.params_after,
            "max_deviation": self.max_deviation,
            "tolerance": self.tolerance,
            "ok": self.ok,
        }


def conv_to_dense(layer):
    """Equivalent dense layer acting on the row-major flattened image.

    Row ``i * No + j`` holds the kernel taps at columns
    ``(i + k) * N + (j + l)``; every other entry is zero, so the matrix is
    doubly-blocked Toeplitz and inherits the kernel's signs.
    """
    if not isinstance(layer, ConvLayer):
        raise TypeError("conv_to_dense expects a ConvLayer")
    M, N = layer.in_shape
    m, n = layer.kernel.shape
    Mo, No = layer.out_shape
    T = np.zeros((Mo * No, M * N))
    for i in range(Mo):
        for j in range(No):
            row = i * No + j
            for k in range(m):
                T[row, (i + k) * N + j : (i + k) * N + j + n] = layer.kernel[k]
    return DenseLayer(T, np.zeros(Mo * No), layer.activation)


def lower_convolutions(net):
    """Replace every convolution in ``net`` by its dense equivalent."""
    if not any(isinstance(layer, ConvLayer) for layer in net.layers):
        return net
    layers = [conv_to_dense(l) if isinstance(l, ConvLayer) else l for l in net.layers]
    return Network(net.input_dim, layers, net.skips)


# Activations a dummy unit may carry values through: "any" value, or only
# values known to be non-negative (possibly after a bias shift).
_PASS_THROUGH = {"identity": "any", "relu": "nonneg", "leaky_relu": "nonneg"}


@dataclass(frozen=True)
class _Block:
    """Units ``offset .. offset + width`` holding ``value + shift``.

    ``lower`` is a known lower bound on the stored values, or ``None``.
    """

    offset: int
    width: int
    lower: np.ndarray | None
    shift: np.ndarray


def _output_lower(act, width):
    if act.kind in ("relu", "sigmoid"):
        return np.zeros(width)
    if act.kind == "tanh":
        return np.full(width, -1.0)
    return None


def skip_to_mlp(net, input_lower=None):
    """Remove skip links by widening the intermediate layers.

    Every layer output is represented as a sum of blocks of units. A skip
    from position ``l'`` to ``l`` is carried by dummy units with a single
    weight 1 through layers ``l'+1 .. l``; the layer consuming the sum
    applies its weight matrix to every block. If the output itself is a sum,
    one identity layer adds the blocks up.

    Dummy units need an activation that is the identity on the values they
    carry. Identity units carry anything. Relu and leaky relu units carry
    values with a known lower bound ``lo``: when ``lo < 0`` the dummy unit
    gets bias ``-lo`` and the consuming layer subtracts the shift again
    through its bias. Known bounds come from relu, sigmoid and tanh outputs
    and from ``input_lower`` for the inputs. Sigmoid and tanh layers cannot
    pass values through and raise :class:`RewriteError`.
    """
    if not net.skips:
        return net
    net = lower_convolutions(net)
    if any(isinstance(layer, PoolLayer) for layer in net.layers):
        raise RewriteError("skip elimination does not support max-pool layers")
    L = len(net.layers)
    n0 = net.input_dim
    in_lower = None
    if input_lower is not None:
        in_lower = np.broadcast_to(np.asarray(input_lower, dtype=np.float64), (n0,)).copy()

    # repr_of[pos]: blocks of new layer ``pos`` that sum to the original output at ``pos``
    repr_of = {0: [_Block(0, n0, in_lower, np.zeros(n0))]}
    carried = {}  # skip -> blocks in the current new layer holding its source value
    prev_width = n0
    new_layers = []

    for pos in range(1, L + 1):
        layer = net.layers[pos - 1]
        act = layer.activation
        active = [s for s in net.skips if s.source < pos <= s.target]
        main = np.zeros((layer.out_dim, prev_width))
        bias = layer.bias.copy()
        for blk in repr_of[pos - 1]:
            main[:, blk.offset : blk.offset + blk.width] = layer.weights
            if np.any(blk.shift):
                bias = bias - layer.weights @ blk.shift
        rows_w, rows_b = [main], [bias]
        new_repr = [_Block(0, layer.out_dim, _output_lower(act, layer.out_dim), np.zeros(layer.out_dim))]
        new_carried = {}
        width = layer.out_dim
        mode = _PASS_THROUGH.get(act.kind)
        for s in active:
            blocks = []
            source = repr_of[pos - 1] if s.source == pos - 1 else carried[s]
            for blk in source:
                add = np.zeros(blk.width)
                if mode is None:
                    raise RewriteError(
                        f"{act.kind} layer {pos - 1} cannot pass skip {s.source}->{s.target} through unchanged"
                    )
                if mode == "nonneg":
                    if blk.lower is None:
                        raise RewriteError(
                            f"skip {s.source}->{s.target}: values carried through {act.kind} layer "
                            f"{pos - 1} have no known lower bound"
                        )
                    add = np.maximum(0.0, -blk.lower)
                copy = np.zeros((blk.width, prev_width))
                copy[:, blk.offset : blk.offset + blk.width] = np.eye(blk.width)
                rows_w.append(copy)
                rows_b.append(add)
                lower = None if blk.lower is None else blk.lower + add
                blocks.append(_Block(width, blk.width, lower, blk.shift + add))
                width += blk.width
            if s.target == pos:
                new_repr.extend(blocks)
            else:
                new_carried[s] = blocks
        new_layers.append(DenseLayer(np.vstack(rows_w), np.concatenate(rows_b), act))
        repr_of[pos] = new_repr
        carried = new_carried
        prev_width = width

    out_blocks = repr_of[L]
    if len(out_blocks) > 1:
        n_out = net.output_dim
        summer = np.zeros((n_out, prev_width))
        shift = np.zeros(n_out)
        for blk in out_blocks:
            summer[:, blk.offset : blk.offset + blk.width] = np.eye(n_out)
            shift += blk.shift
        new_layers.append(DenseLayer(summer, -shift, Activation("identity")))
    return Network(net.input_dim, new_layers)


def fuzz_equivalence(net_a, net_b, domain, trials=200, rng=None, pass_name="fuzz",
                     tolerance=None):
    """Largest absolute output difference over uniform random inputs."""
    if net_a.input_dim != net_b.input_dim or net_a.output_dim != net_b.output_dim:
        raise ShapeError(
            f"networks differ in shape: {net_a.input_dim}->{net_a.output_dim} vs {net_b.input_dim}->{net_b.output_dim}"
        )
    lower, upper = (domain.lower, domain.upper) if hasattr(domain, "lower") else domain
    lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), (net_a.input_dim,))
    upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), (net_a.input_dim,))
    rng = make_rng(rng if rng is not None else 0)
    xs = lower + rng.random((trials, net_a.input_dim)) * (upper - lower)
    dev = float(np.max(np.abs(forward_batch(net_a, xs) - forward_batch(net_b, xs))))
    return RewriteReport(pass_name, net_a.n_params, net_b.n_params, dev, tolerance)
