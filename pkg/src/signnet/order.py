"""Coordinatewise order, monotonicity certificates and falsification."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ShapeError, as_vec, make_rng
from .network import ConvLayer, DenseLayer, PoolLayer, forward_batch

__all__ = [
    "OrderPair",
    "Certificate",
    "leq",
    "certify_structural",
    "sample_order_pairs",
    "falsify_monotone",
    "is_upper_set_violation",
]

CERTIFIED = "certified_monotone"
FALSIFIED = "falsified"
INCONCLUSIVE = "inconclusive"


def leq(x, y):
    """``x ⪯ y``: every coordinate of ``x`` is at most the matching one of ``y``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"cannot compare vectors of shapes {x.shape} and {y.shape}")
    return bool(np.all(x <= y))


@dataclass(frozen=True, eq=False)
class OrderPair:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x, y = as_vec(self.x, "x"), as_vec(self.y, "y")
        if not leq(x, y):
            raise ValueError("OrderPair requires x ⪯ y")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class Certificate:
    verdict: str
    basis: str
    witness: dict | None = None

    @property
    def certified(self):
        return self.verdict == CERTIFIED

    @property
    def falsified(self):
        return self.verdict == FALSIFIED

    def to_json(self):
        out = {"verdict": self.verdict, "basis": self.basis}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def certify_structural(net):
    """Certify monotonicity from the weight signs alone.

    One-sided: every activation kind supported by the library is
    non-decreasing, max-pooling is monotone and skip links are identities, so
    non-negative weights suffice. A negative weight only makes the verdict
    ``inconclusive``; it does not show the function is non-monotone.
    """
    for layer in net.layers:
        if isinstance(layer, (DenseLayer, ConvLayer)):
            if not np.all(layer.weights >= 0.0):
                return Certificate(INCONCLUSIVE, "structural")
        elif not isinstance(layer, PoolLayer):
            return Certificate(INCONCLUSIVE, "structural")
    return Certificate(CERTIFIED, "structural")


def _pair_arrays(lower, upper, count, rng):
    width = upper - lower
    xs = lower + rng.random((count, lower.size)) * width
    deltas = rng.random((count, lower.size)) * (width / 2.0)
    ys = np.minimum(xs + deltas, upper)
    return xs, ys


def _box(domain):
    lower, upper = (domain.lower, domain.upper) if hasattr(domain, "lower") else domain
    lower, upper = as_vec(lower, "lower"), as_vec(upper, "upper")
    if lower.shape != upper.shape:
        raise ShapeError(f"box bounds have shapes {lower.shape} and {upper.shape}")
    if not np.all(lower <= upper) or not np.any(lower < upper):
        raise ValueError("degenerate box: need lower ⪯ upper with positive width somewhere")
    return lower, upper


def sample_order_pairs(domain, count, rng=None):
    """Random pairs ``x ⪯ y`` inside a box.

    ``x`` is uniform in the box and ``y = min(x + delta, upper)`` with
    ``delta_k ~ U(0, width_k / 2)``. ``domain`` is a :class:`BoxDomain` or a
    ``(lower, upper)`` tuple.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    lower, upper = _box(domain)
    xs, ys = _pair_arrays(lower, upper, count, make_rng(rng if rng is not None else 0))
    return [OrderPair(x, y) for x, y in zip(xs, ys)]


def _witness(x, y, fx, fy):
    return {"x": x.tolist(), "y": y.tolist(), "fx": fx.tolist(), "fy": fy.tolist()}


def falsify_monotone(net, domain, trials, rng=None, pairs=None, chunk=50_000):
    """Search for ``x ⪯ y`` with ``F(x) ⋠ F(y)``.

    Returns a ``falsified`` certificate for the first violating trial, else
    ``inconclusive``. Comparisons are exact. Explicit ``pairs`` (a list of
    :class:`OrderPair`) replace random sampling.
    """
    if pairs is not None:
        xs = np.array([p.x for p in pairs])
        ys = np.array([p.y for p in pairs])
        batches = [(xs, ys)]
    else:
        if trials < 1:
            raise ValueError("trials must be at least 1")
        lower, upper = _box(domain)
        rng = make_rng(rng if rng is not None else 0)
        batches = (
            _pair_arrays(lower, upper, min(chunk, trials - start), rng)
            for start in range(0, trials, chunk)
        )
    for xs, ys in batches:
        fx = forward_batch(net, xs)
        fy = forward_batch(net, ys)
        bad = np.flatnonzero(np.any(fx > fy, axis=1))
        if bad.size:
            i = bad[0]
            return Certificate(FALSIFIED, "empirical", _witness(xs[i], ys[i], fx[i], fy[i]))
    return Certificate(INCONCLUSIVE, "empirical")


def is_upper_set_violation(net, threshold, pairs):
    """First pair with ``F(x) >= t > F(y)``, or ``None``.

    Such a pair shows the superlevel set ``{F >= t}`` is not closed upward,
    which no monotone scalar function allows.
    """
    if net.output_dim != 1:
        raise ShapeError(f"upper-set check needs a scalar-output network, got output width {net.output_dim}")
    if not pairs:
        return None
    xs = np.array([p.x for p in pairs])
    ys = np.array([p.y for p in pairs])
    fx = forward_batch(net, xs)[:, 0]
    fy = forward_batch(net, ys)[:, 0]
    bad = np.flatnonzero((fx >= threshold) & (fy < threshold))
    if bad.size == 0:
        return None
    i = bad[0]
    return _witness(xs[i], ys[i], fx[i : i + 1], fy[i : i + 1])
