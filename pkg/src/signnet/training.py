"""Reverse-mode gradients and projected gradient descent under sign constraints.

Training keeps the weights inside the feasible set of a
:class:`~signnet.network.SignConstraint` by clamping after every update. The
forward pass used here performs exactly the same floating-point operations as
:func:`signnet.network.forward_batch`, so anything logged during training
(losses, probe errors) is what the finished network will reproduce.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .core import ShapeError, make_rng, matvec_batch
from .network import (
    ConvLayer,
    DenseLayer,
    PoolLayer,
    SignConstraint,
    conv2d_batch,
    satisfies_constraint,
)

__all__ = [
    "TrainConfig",
    "TrainReport",
    "LayerGrad",
    "DivergenceError",
    "backprop",
    "project",
    "train",
    "loss_value",
]

LOSSES = ("mse", "bce")
_BCE_EPS = 1e-12


class DivergenceError(FloatingPointError):
    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss


@dataclass
class TrainConfig:
    """Settings for :func:`train`.

    ``batch=None`` means full-batch descent. ``bce`` clamps outputs into
    ``[1e-12, 1 - 1e-12]``; use a sigmoid output layer with it.
    """

    learning_rate: float = 0.5
    epochs: int = 1000
    batch: int | None = None
    loss: str = "mse"
    seed: int = 0
    projection: SignConstraint = field(default_factory=lambda: SignConstraint("free"))

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch is not None and self.batch < 1:
            raise ValueError("batch size must be positive")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if not isinstance(self.projection, SignConstraint):
            self.projection = SignConstraint(self.projection)

    def to_json(self):
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch": "full" if self.batch is None else self.batch,
            "loss": self.loss,
            "seed": self.seed,
            "projection": self.projection.to_json(),
        }

    @classmethod
    def from_json(cls, obj):
        obj = dict(obj)
        if obj.get("batch") == "full":
            obj["batch"] = None
        if "projection" in obj:
            obj["projection"] = SignConstraint.from_json(obj["projection"])
        return cls(**obj)


@dataclass
class TrainReport:
    loss_trace: list
    final_max_error: float
    wall_clock: float
    probe_trace: list | None = None

    def to_json(self):
        return {
            "epochs": len(self.loss_trace),
            "final_loss": self.loss_trace[-1] if self.loss_trace else None,
            "final_max_error": self.final_max_error,
            "wall_clock": self.wall_clock,
            "loss_trace": self.loss_trace,
            "probe_trace": self.probe_trace,
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    def write_loss_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss"])
            for epoch, value in enumerate(self.loss_trace):
                writer.writerow([epoch, repr(value)])


@dataclass
class LayerGrad:
    weights: np.ndarray | None
    bias: np.ndarray | None


# Internal parameter lists: one [weights, bias] pair per layer (None for pool,
# bias None for conv). Mutated in place during training.

def _params(net):
    out = []
    for layer in net.layers:
        if isinstance(layer, DenseLayer):
            out.append([layer.weights.copy(), layer.bias.copy()])
        elif isinstance(layer, ConvLayer):
            out.append([layer.kernel.copy(), None])
        else:
            out.append([None, None])
    return out


def _rebuild(net, params):
    layers = []
    for layer, (w, b) in zip(net.layers, params):
        if isinstance(layer, DenseLayer):
            layers.append(DenseLayer(w, b, layer.activation))
        elif isinstance(layer, ConvLayer):
            layers.append(ConvLayer(w, layer.in_shape, layer.activation))
        else:
            layers.append(layer)
    return type(net)(net.input_dim, layers, net.skips)


def _incoming(net):
    incoming = {}
    for s in net.skips:
        incoming.setdefault(s.target, []).append(s.source)
    return incoming


def _forward(net, params, xs, incoming):
    outputs, pres, acts = [xs], [], []
    h = xs
    for pos, (layer, (w, b)) in enumerate(zip(net.layers, params), start=1):
        if isinstance(layer, DenseLayer):
            z = matvec_batch(w, h) + b
            a = layer.activation(z)
        elif isinstance(layer, ConvLayer):
            images = h.reshape(h.shape[0], *layer.in_shape)
            z = conv2d_batch(images, w).reshape(h.shape[0], -1)
            a = layer.activation(z)
        else:
            z = None
            a = layer.apply(h)
        pres.append(z)
        acts.append(a)
        h = a
        for src in incoming.get(pos, ()):
            h = h + outputs[src]
        outputs.append(h)
    return outputs, pres, acts


def _loss_and_seed(out, targets, loss):
    """Batch-mean loss and its gradient with respect to the network output."""
    n = out.shape[0]
    if loss == "mse":
        diff = out - targets
        return 0.5 * float(np.sum(diff * diff)) / n, diff / n
    p = np.clip(out, _BCE_EPS, 1.0 - _BCE_EPS)
    value = -float(np.sum(targets * np.log(p) + (1.0 - targets) * np.log1p(-p))) / n
    return value, (p - targets) / (p * (1.0 - p)) / n


def _backward(net, params, outputs, pres, acts, seed, incoming):
    L = len(net.layers)
    g_pos = [None] * (L + 1)
    g_pos[L] = seed
    grads = [None] * L
    for pos in range(L, 0, -1):
        g = g_pos[pos]
        if g is None:
            continue
        for src in incoming.get(pos, ()):
            g_pos[src] = g if g_pos[src] is None else g_pos[src] + g
        layer = net.layers[pos - 1]
        w, _ = params[pos - 1]
        h = outputs[pos - 1]
        if isinstance(layer, PoolLayer):
            gh = np.zeros_like(h)
            rows = np.arange(h.shape[0])
            for j, group in enumerate(layer.groups):
                members = np.asarray(group)
                # argmax picks the first maximum; groups are sorted, so ties go to the lowest index.
                winner = members[np.argmax(h[:, members], axis=1)]
                np.add.at(gh, (rows, winner), g[:, j])
            grads[pos - 1] = LayerGrad(None, None)
        else:
            gz = g * layer.activation.grad(pres[pos - 1], acts[pos - 1])
            if isinstance(layer, DenseLayer):
                grads[pos - 1] = LayerGrad(gz.T @ h, gz.sum(axis=0))
                gh = gz @ w
            else:
                M, N = layer.in_shape
                m, n = w.shape
                Mo, No = layer.out_shape
                images = h.reshape(h.shape[0], M, N)
                gz_img = gz.reshape(h.shape[0], Mo, No)
                dk = np.empty_like(w)
                gimg = np.zeros_like(images)
                for k in range(m):
                    for l in range(n):
                        dk[k, l] = np.sum(gz_img * images[:, k : k + Mo, l : l + No])
                        gimg[:, k : k + Mo, l : l + No] += gz_img * w[k, l]
                grads[pos - 1] = LayerGrad(dk, None)
                gh = gimg.reshape(h.shape[0], -1)
        g_pos[pos - 1] = gh if g_pos[pos - 1] is None else g_pos[pos - 1] + gh
    return grads


def _as_batch(net, xs, targets):
    xs = np.asarray(xs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs[None, :]
    if targets.ndim <= 1:
        targets = targets.reshape(xs.shape[0], -1)
    if xs.shape[1] != net.input_dim or targets.shape != (xs.shape[0], net.output_dim):
        raise ShapeError(
            f"inputs {xs.shape} / targets {targets.shape} do not fit a {net.input_dim}->{net.output_dim} network"
        )
    return xs, targets


def loss_value(net, xs, targets, loss="mse"):
    xs, targets = _as_batch(net, xs, targets)
    outputs, _, _ = _forward(net, _params(net), xs, _incoming(net))
    return _loss_and_seed(outputs[-1], targets, loss)[0]


def backprop(net, x, target, loss="mse"):
    """Exact gradients of the batch-mean loss.

    ``x`` is one input or a batch of rows. The per-sample losses are
    ``0.5 * ||F(x) - t||^2`` (``mse``) and binary cross-entropy summed over
    outputs (``bce``).

    Returns
    -------
    value : float
        Loss at the current parameters.
    grads : list of LayerGrad
        One entry per layer; pool layers get ``LayerGrad(None, None)`` and
        convolution layers have ``bias=None``.
    """
    xs, targets = _as_batch(net, x, target)
    incoming = _incoming(net)
    params = _params(net)
    with np.errstate(over="ignore", invalid="ignore"):
        outputs, pres, acts = _forward(net, params, xs, incoming)
        value, seed = _loss_and_seed(outputs[-1], targets, loss)
    if not np.isfinite(value):
        raise FloatingPointError(f"non-finite loss {value}")
    return value, _backward(net, params, outputs, pres, acts, seed, incoming)


def _project_inplace(net, params, constraint):
    for k, (layer, pair) in enumerate(zip(net.layers, params)):
        w = pair[0]
        if w is None:
            continue
        mode = constraint.mode(k, layer)
        if isinstance(mode, str):
            if mode == "nonneg":
                np.maximum(w, 0.0, out=w)
        else:
            pos, neg = mode > 0, mode < 0
            w[pos] = np.maximum(w[pos], 0.0)
            w[neg] = np.minimum(w[neg], 0.0)


def project(net, constraint):
    """Euclidean projection of the weights onto the constraint set; biases untouched."""
    params = _params(net)
    _project_inplace(net, params, constraint)
    return _rebuild(net, params)


def train(net, data, cfg, probe=None):
    """Projected gradient descent.

    Parameters
    ----------
    net : Network
        Starting point; must already satisfy ``cfg.projection``.
    data : (inputs, targets)
    cfg : TrainConfig
    probe : (inputs, targets), optional
        Points whose max absolute error is logged after every epoch and
        reported as ``final_max_error``. Defaults to the training data
        (without per-epoch logging).

    Returns
    -------
    (Network, TrainReport)
    """
    xs, targets = _as_batch(net, *data)
    if not satisfies_constraint(net, cfg.projection):
        raise ValueError("initial network violates the training constraint")
    probe_xs = probe_t = None
    if probe is not None:
        probe_xs, probe_t = _as_batch(net, *probe)
    incoming = _incoming(net)
    params = _params(net)
    rng = make_rng(cfg.seed)
    n = xs.shape[0]
    lr = cfg.learning_rate
    loss_trace = []
    probe_trace = [] if probe is not None else None
    start = time.perf_counter()
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            if cfg.batch is None or cfg.batch >= n:
                batches = [slice(None)]
            else:
                order = rng.permutation(n)
                batches = [order[i : i + cfg.batch] for i in range(0, n, cfg.batch)]
            total = 0.0
            for idx in batches:
                bx, bt = xs[idx], targets[idx]
                outputs, pres, acts = _forward(net, params, bx, incoming)
                value, seed = _loss_and_seed(outputs[-1], bt, cfg.loss)
                if not np.isfinite(value):
                    raise DivergenceError(epoch, value)
                total += value * bx.shape[0]
                grads = _backward(net, params, outputs, pres, acts, seed, incoming)
                for pair, g in zip(params, grads):
                    if g.weights is not None:
                        pair[0] -= lr * g.weights
                    if g.bias is not None:
                        pair[1] -= lr * g.bias
                _project_inplace(net, params, cfg.projection)
            loss_trace.append(total / n)
            if probe is not None:
                out = _forward(net, params, probe_xs, incoming)[0][-1]
                err = float(np.max(np.abs(out - probe_t)))
                if not np.isfinite(err):
                    raise DivergenceError(epoch, err)
                probe_trace.append(err)
    trained = _rebuild(net, params)
    final_xs, final_t = (probe_xs, probe_t) if probe is not None else (xs, targets)
    out = _forward(trained, params, final_xs, incoming)[0][-1]
    report = TrainReport(
        loss_trace=loss_trace,
        final_max_error=float(np.max(np.abs(out - final_t))),
        wall_clock=time.perf_counter() - start,
        probe_trace=probe_trace,
    )
    return trained, report
