"""Feedforward networks built from dense, convolution and max-pool layers.

A :class:`Network` is an immutable stack of layers plus optional identity
skip links. Layer *positions* used by skip links are 1-based (position 0 is
the network input); every other API in the package indexes ``net.layers``
from 0.

Forward evaluation goes through :func:`signnet.core.matvec_batch`, whose
summation order does not depend on the data, so a network with non-negative
weights is monotone bit-for-bit and not just in exact arithmetic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ShapeError, as_mat, as_vec, make_rng, matvec_batch

__all__ = [
    "Activation",
    "DenseLayer",
    "ConvLayer",
    "PoolLayer",
    "SkipLink",
    "Network",
    "SignConstraint",
    "ModelFormatError",
    "eval_activation",
    "conv2d",
    "conv2d_batch",
    "maxpool",
    "forward",
    "forward_batch",
    "init_random",
    "random_network",
    "flip_weight",
    "satisfies_constraint",
    "to_dict",
    "from_dict",
    "save",
    "load",
]

ACTIVATION_KINDS = ("relu", "leaky_relu", "sigmoid", "tanh", "identity")


class ModelFormatError(ValueError):
    """A model file or dictionary does not describe a valid network."""


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Activation:
    """Pointwise non-decreasing nonlinearity."""

    kind: str = "relu"
    alpha: float = 0.01

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise ValueError(f"unknown activation {self.kind!r}; expected one of {ACTIVATION_KINDS}")
        if self.kind == "leaky_relu" and not self.alpha > 0:
            raise ValueError("leaky_relu slope must be positive")

    def __call__(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.kind == "relu":
            return np.maximum(u, 0.0)
        if self.kind == "leaky_relu":
            return np.where(u >= 0.0, u, self.alpha * u)
        if self.kind == "sigmoid":
            # exp(-u) overflows to inf for u < -709 and 1/inf is 0: still monotone.
            with np.errstate(over="ignore"):
                return 1.0 / (1.0 + np.exp(-u))
        if self.kind == "tanh":
            return np.tanh(u)
        return u.copy()

    def grad(self, u, out):
        """Derivative at pre-activation ``u`` given ``out = self(u)``.

        relu'(0) is taken as 0.
        """
        if self.kind == "relu":
            return (u > 0.0).astype(np.float64)
        if self.kind == "leaky_relu":
            return np.where(u > 0.0, 1.0, self.alpha)
        if self.kind == "sigmoid":
            return out * (1.0 - out)
        if self.kind == "tanh":
            return 1.0 - out * out
        return np.ones_like(u)

    def to_json(self):
        if self.kind == "leaky_relu" and self.alpha != 0.01:
            return {"kind": "leaky_relu", "alpha": self.alpha}
        return self.kind

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            return cls(obj)
        if isinstance(obj, dict) and "kind" in obj:
            return cls(obj["kind"], float(obj.get("alpha", 0.01)))
        raise ModelFormatError(f"cannot parse activation from {obj!r}")


def _as_activation(a):
    if isinstance(a, Activation):
        return a
    return Activation.from_json(a)


def eval_activation(a, u):
    """Scalar activation value, e.g. ``eval_activation(Activation("relu"), -2.0) == 0.0``."""
    return float(_as_activation(a)(np.float64(u)))


@dataclass(frozen=True, eq=False)
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = field(default_factory=Activation)

    def __post_init__(self):
        w = as_mat(self.weights, "weights")
        b = as_vec(self.bias, "bias")
        if w.shape[0] != b.shape[0]:
            raise ShapeError(f"weights of shape {w.shape} do not match bias of shape {b.shape}")
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "bias", _frozen(b))
        object.__setattr__(self, "activation", _as_activation(self.activation))

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]

    @property
    def n_params(self):
        return self.weights.size + self.bias.size

    def with_weights(self, weights):
        return DenseLayer(weights, self.bias, self.activation)

    def pre_activation(self, xs):
        return matvec_batch(self.weights, xs) + self.bias

    def apply(self, xs):
        return self.activation(self.pre_activation(xs))


@dataclass(frozen=True, eq=False)
class ConvLayer:
    """Single-channel valid-mode 2-D cross-correlation, stride 1, no bias.

    Inputs arrive as row-major flattened ``in_shape`` images and outputs leave
    flattened the same way.
    """

    kernel: np.ndarray
    in_shape: tuple
    activation: Activation = field(default_factory=Activation)

    def __post_init__(self):
        k = as_mat(self.kernel, "kernel")
        M, N = (int(s) for s in self.in_shape)
        if k.shape[0] > M or k.shape[1] > N:
            raise ShapeError(f"kernel of shape {k.shape} does not fit input of shape {(M, N)}")
        object.__setattr__(self, "kernel", _frozen(k))
        object.__setattr__(self, "in_shape", (M, N))
        object.__setattr__(self, "activation", _as_activation(self.activation))

    @property
    def weights(self):
        return self.kernel

    @property
    def out_shape(self):
        M, N = self.in_shape
        m, n = self.kernel.shape
        return (M - m + 1, N - n + 1)

    @property
    def in_dim(self):
        return self.in_shape[0] * self.in_shape[1]

    @property
    def out_dim(self):
        a, b = self.out_shape
        return a * b

    @property
    def n_params(self):
        return self.kernel.size

    def with_weights(self, kernel):
        return ConvLayer(kernel, self.in_shape, self.activation)

    def pre_activation(self, xs):
        images = xs.reshape(xs.shape[0], *self.in_shape)
        return conv2d_batch(images, self.kernel).reshape(xs.shape[0], -1)

    def apply(self, xs):
        return self.activation(self.pre_activation(xs))


@dataclass(frozen=True, eq=False)
class PoolLayer:
    """Max over disjoint groups of incoming indices, one output per group."""

    groups: tuple

    def __post_init__(self):
        groups = tuple(tuple(sorted(int(i) for i in g)) for g in self.groups)
        if not groups:
            raise ShapeError("pool layer needs at least one group")
        seen = set()
        for g in groups:
            if not g:
                raise ShapeError("pool groups must be non-empty")
            if min(g) < 0:
                raise ShapeError(f"negative index in pool group {g}")
            if seen.intersection(g):
                raise ShapeError(f"pool group {g} overlaps an earlier group")
            seen.update(g)
        object.__setattr__(self, "groups", groups)

    activation = None
    weights = None
    n_params = 0

    @property
    def out_dim(self):
        return len(self.groups)

    @property
    def min_in_dim(self):
        return 1 + max(max(g) for g in self.groups)

    def apply(self, xs):
        return np.stack([xs[:, list(g)].max(axis=1) for g in self.groups], axis=1)


@dataclass(frozen=True)
class SkipLink:
    """Identity shortcut adding the output at position ``source`` to position ``target``."""

    source: int
    target: int


@dataclass(frozen=True, eq=False)
class Network:
    input_dim: int
    layers: tuple
    skips: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "skips", tuple(self.skips))
        if self.input_dim < 1:
            raise ShapeError("input_dim must be positive")
        if not self.layers:
            raise ShapeError("a network needs at least one layer")
        widths = [int(self.input_dim)]
        for k, layer in enumerate(self.layers):
            prev = widths[-1]
            if isinstance(layer, PoolLayer):
                if layer.min_in_dim > prev:
                    raise ShapeError(f"layer {k}: pool indices reach {layer.min_in_dim - 1} but input width is {prev}")
            elif isinstance(layer, (DenseLayer, ConvLayer)):
                if layer.in_dim != prev:
                    raise ShapeError(f"layer {k}: expects input width {layer.in_dim}, got {prev}")
            else:
                raise TypeError(f"unsupported layer type {type(layer).__name__}")
            widths.append(layer.out_dim)
        L = len(self.layers)
        for s in self.skips:
            if not (1 <= s.target <= L and 0 <= s.source <= s.target - 2):
                raise ShapeError(f"invalid skip {s}: need 0 <= source <= target-2 and target <= {L}")
            if widths[s.source] != widths[s.target]:
                raise ShapeError(
                    f"skip {s}: width {widths[s.source]} at source differs from width {widths[s.target]} at target"
                )
        object.__setattr__(self, "widths", tuple(widths))

    @property
    def output_dim(self):
        return self.widths[-1]

    @property
    def n_params(self):
        return sum(layer.n_params for layer in self.layers)

    def replace_layer(self, index, layer):
        layers = list(self.layers)
        layers[index] = layer
        return Network(self.input_dim, layers, self.skips)

    def weighted_layers(self):
        return [(k, layer) for k, layer in enumerate(self.layers) if layer.weights is not None]


def conv2d_batch(images, kernel):
    """Valid cross-correlation of a stack of images ``(B, M, N)`` with ``kernel``.

    Kernel taps are accumulated in row-major order, the same order in which
    the lowered Toeplitz matrix visits them.
    """
    B, M, N = images.shape
    m, n = kernel.shape
    if m > M or n > N:
        raise ShapeError(f"kernel of shape {kernel.shape} larger than image of shape {(M, N)}")
    Mo, No = M - m + 1, N - n + 1
    out = np.zeros((B, Mo, No))
    for k in range(m):
        for l in range(n):
            out += images[:, k : k + Mo, l : l + No] * kernel[k, l]
    return out


def conv2d(image, kernel):
    """``O[i, j] = sum_{k,l} I[i+k, j+l] * K[k, l]`` for every valid window."""
    image = as_mat(image, "image")
    kernel = as_mat(kernel, "kernel")
    return conv2d_batch(image[None], kernel)[0]


def maxpool(pool, x):
    x = as_vec(x)
    if not isinstance(pool, PoolLayer):
        pool = PoolLayer(pool)
    if pool.min_in_dim > x.shape[0]:
        raise ShapeError(f"pool indices reach {pool.min_in_dim - 1} but vector has length {x.shape[0]}")
    return pool.apply(x[None])[0]


def _incoming(net):
    incoming = {}
    for s in net.skips:
        incoming.setdefault(s.target, []).append(s.source)
    return incoming


def forward_batch(net, xs):
    """Evaluate ``net`` on each row of ``xs``; returns ``(batch, output_dim)``."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != net.input_dim:
        raise ShapeError(f"expected inputs of shape (batch, {net.input_dim}), got {xs.shape}")
    incoming = _incoming(net)
    outputs = [xs]
    h = xs
    with np.errstate(over="ignore", invalid="ignore"):
        for pos, layer in enumerate(net.layers, start=1):
            h = layer.apply(h)
            for src in incoming.get(pos, ()):
                h = h + outputs[src]
            if not np.all(np.isfinite(h)):
                raise FloatingPointError(f"non-finite values after layer {pos - 1}")
            if incoming:
                outputs.append(h)
    return h


def forward(net, x):
    x = as_vec(x, "input")
    if x.shape[0] != net.input_dim:
        raise ShapeError(f"expected input of length {net.input_dim}, got {x.shape[0]}")
    return forward_batch(net, x[None, :])[0]


class SignConstraint:
    """Per-layer sign pattern on weights (biases are never constrained).

    ``modes`` is either one mode applied to every weighted layer or a list with
    one entry per layer. A mode is ``"free"``, ``"nonneg"``, or a mask array
    shaped like the layer's weights whose entries are +1 (weight >= 0),
    -1 (weight <= 0) or 0 (free). Entries for pool layers are ignored.
    """

    def __init__(self, modes="nonneg"):
        if isinstance(modes, str):
            self._check_mode(modes)
            self.modes = modes
        else:
            parsed = []
            for m in modes:
                if m is None or isinstance(m, str):
                    if m is not None:
                        self._check_mode(m)
                    parsed.append(m)
                else:
                    mask = np.asarray(m, dtype=np.float64)
                    if not np.all(np.isin(mask, (-1.0, 0.0, 1.0))):
                        raise ValueError("sign masks may only contain -1, 0 and +1")
                    mask.setflags(write=False)
                    parsed.append(mask)
            self.modes = parsed

    @staticmethod
    def _check_mode(m):
        if m not in ("free", "nonneg"):
            raise ValueError(f"unknown constraint mode {m!r}")

    def mode(self, index, layer=None):
        if isinstance(self.modes, str):
            return self.modes
        m = self.modes[index] if index < len(self.modes) else None
        if m is None:
            return "free"
        if isinstance(m, np.ndarray) and layer is not None and m.shape != layer.weights.shape:
            raise ShapeError(f"layer {index}: mask shape {m.shape} differs from weight shape {layer.weights.shape}")
        return m

    @classmethod
    def from_signs(cls, net):
        """Mask constraint fixing the current sign of every nonzero weight; zero weights are free."""
        return cls([None if layer.weights is None else np.sign(layer.weights) for layer in net.layers])

    @classmethod
    def single_flip(cls, net, layer, row, col):
        """Non-negative everywhere except weight ``(row, col)`` of ``layer``, which must stay <= 0."""
        masks = [None if l.weights is None else np.ones(l.weights.shape) for l in net.layers]
        if masks[layer] is None:
            raise ValueError(f"layer {layer} has no weights")
        masks[layer][row, col] = -1.0
        return cls(masks)

    def to_json(self):
        if isinstance(self.modes, str):
            return self.modes
        return [m if (m is None or isinstance(m, str)) else m.astype(int).tolist() for m in self.modes]

    @classmethod
    def from_json(cls, obj):
        return cls(obj)

    def __repr__(self):
        return f"SignConstraint({self.to_json()!r})"


def _sign_matched(w, mode):
    """Initialisation projection: keep magnitudes, impose signs."""
    if isinstance(mode, str):
        return np.abs(w) if mode == "nonneg" else w
    return np.where(mode == 0, w, mode * np.abs(w))


def satisfies_constraint(net, constraint):
    """Exact check, no tolerance: a weight of -1e-300 violates ``nonneg``."""
    for k, layer in net.weighted_layers():
        mode = constraint.mode(k, layer)
        w = layer.weights
        if isinstance(mode, str):
            if mode == "nonneg" and not np.all(w >= 0.0):
                return False
        elif not (np.all(w[mode > 0] >= 0.0) and np.all(w[mode < 0] <= 0.0)):
            return False
    return True


def init_random(sizes, activation="relu", constraint=None, rng=None, final_activation=True):
    """Dense network with layer widths ``sizes = (n0, n1, ..., nL)``.

    Weights and biases are drawn from U(-s, s) with ``s = 1/sqrt(fan_in)``;
    weights are then given the signs required by ``constraint``. When
    ``final_activation`` is false the last layer uses the identity.
    """
    sizes = [int(n) for n in sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"invalid architecture {sizes}")
    rng = make_rng(rng if rng is not None else 0)
    constraint = constraint or SignConstraint("free")
    act = _as_activation(activation)
    layers = []
    for k, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        s = 1.0 / np.sqrt(n_in)
        w = rng.uniform(-s, s, size=(n_out, n_in))
        b = rng.uniform(-s, s, size=n_out)
        last = k == len(sizes) - 2
        a = act if (final_activation or not last) else Activation("identity")
        probe = DenseLayer(w, b, a)
        layers.append(probe.with_weights(_sign_matched(w, constraint.mode(k, probe))))
    return Network(sizes[0], layers)


def parse_arch(arch):
    """``"2-8-8-1"`` -> ``[2, 8, 8, 1]``."""
    try:
        sizes = [int(p) for p in str(arch).split("-")]
    except ValueError:
        raise ValueError(f"cannot parse architecture {arch!r}") from None
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"invalid architecture {arch!r}")
    return sizes


def random_network(rng, input_dim=2, depth=None, max_width=16, activation=None,
                   nonneg=True, variant="dense"):
    """Random network used for fuzzing and property tests.

    ``variant`` is one of ``"dense"``, ``"pool"`` (a max-pool layer after the
    first dense layer), ``"skip"`` (three equal-width hidden layers and an
    output layer, with at least one identity shortcut; ``depth`` is ignored)
    or ``"conv"`` (a convolution first; ``input_dim`` must then be a perfect
    square).
    """
    rng = make_rng(rng)
    depth = int(rng.integers(1, 5)) if depth is None else depth
    if activation is None:
        activation = str(rng.choice(["relu", "leaky_relu", "sigmoid", "tanh"]))
    act = _as_activation(activation)
    mode = "nonneg" if nonneg else "free"
    if variant == "pool":
        depth = max(depth, 2)

    def dense(n_in, n_out):
        s = 1.0 / np.sqrt(n_in)
        w = rng.uniform(-s, s, size=(n_out, n_in))
        return DenseLayer(_sign_matched(w, mode), rng.uniform(-1.0, 1.0, size=n_out), act)

    layers, skips = [], []
    width = input_dim
    if variant == "conv":
        side = int(round(np.sqrt(input_dim)))
        if side * side != input_dim:
            raise ValueError("conv variant needs a square input_dim")
        m = int(rng.integers(1, side + 1))
        n = int(rng.integers(1, side + 1))
        kernel = _sign_matched(rng.uniform(-1, 1, size=(m, n)), mode)
        layers.append(ConvLayer(kernel, (side, side), act))
        width = layers[-1].out_dim
    if variant == "skip":
        hidden = int(rng.integers(1, max_width + 1))
        n_hidden = 3  # smallest depth that fits a hidden-to-hidden shortcut
        layers.append(dense(width, hidden))
        for _ in range(n_hidden - 1):
            layers.append(dense(hidden, hidden))
        for target in range(3, n_hidden + 1):
            if rng.random() < 0.7:
                skips.append(SkipLink(int(rng.integers(1, target - 1)), target))
        if not skips:
            skips.append(SkipLink(1, 3))
        if input_dim == hidden:
            skips.append(SkipLink(0, 2))
        layers.append(dense(hidden, 1))
        return Network(input_dim, layers, skips)
    for k in range(depth - 1):
        hidden = int(rng.integers(1, max_width + 1))
        layers.append(dense(width, hidden))
        width = hidden
        if variant == "pool" and k == 0:
            idx = rng.permutation(width)
            n_groups = int(rng.integers(1, width + 1))
            groups = [g.tolist() for g in np.array_split(idx, n_groups) if len(g)]
            layers.append(PoolLayer(groups))
            width = len(groups)
    layers.append(dense(width, 1))
    return Network(input_dim, layers, skips)


def flip_weight(net, layer, row, col):
    """Copy of ``net`` with one weight (or kernel tap) negated."""
    if not 0 <= layer < len(net.layers):
        raise IndexError(f"layer {layer} out of range for a {len(net.layers)}-layer network")
    target = net.layers[layer]
    if target.weights is None:
        raise IndexError(f"layer {layer} has no weights")
    rows, cols = target.weights.shape
    if not (0 <= row < rows and 0 <= col < cols):
        raise IndexError(f"weight ({row}, {col}) out of range for shape {(rows, cols)}")
    w = target.weights.copy()
    w[row, col] = -w[row, col]
    return net.replace_layer(layer, target.with_weights(w))


def _layer_to_dict(layer):
    if isinstance(layer, DenseLayer):
        return {
            "kind": "dense",
            "weights": layer.weights.tolist(),
            "bias": layer.bias.tolist(),
            "activation": layer.activation.to_json(),
        }
    if isinstance(layer, ConvLayer):
        return {
            "kind": "conv2d",
            "kernel": layer.kernel.tolist(),
            "in_shape": list(layer.in_shape),
            "activation": layer.activation.to_json(),
        }
    return {"kind": "maxpool", "groups": [list(g) for g in layer.groups]}


def to_dict(net):
    return {
        "input_dim": net.input_dim,
        "layers": [_layer_to_dict(layer) for layer in net.layers],
        "skips": [{"from": s.source, "to": s.target} for s in net.skips],
    }


def from_dict(obj):
    try:
        layers = []
        for spec in obj["layers"]:
            kind = spec["kind"]
            if kind == "dense":
                layers.append(DenseLayer(spec["weights"], spec["bias"], Activation.from_json(spec.get("activation", "relu"))))
            elif kind == "conv2d":
                layers.append(ConvLayer(spec["kernel"], tuple(spec["in_shape"]), Activation.from_json(spec.get("activation", "relu"))))
            elif kind == "maxpool":
                layers.append(PoolLayer(spec["groups"]))
            else:
                raise ModelFormatError(f"unknown layer kind {kind!r}")
        skips = [SkipLink(int(s["from"]), int(s["to"])) for s in obj.get("skips", [])]
        return Network(int(obj["input_dim"]), layers, skips)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"invalid model: {exc}") from exc


def save(net, path):
    # json writes floats with repr(), the shortest string that round-trips exactly.
    Path(path).write_text(json.dumps(to_dict(net)) + "\n")


def load(path):
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
    return from_dict(obj)
