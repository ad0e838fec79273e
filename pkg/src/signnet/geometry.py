"""Decision boundaries of planar networks.

The level set ``F = t`` is extracted with marching squares: ``F`` is sampled
on a uniform grid, crossings are linearly interpolated along cell edges, and
ambiguous saddle cells are resolved by sampling ``F`` at the cell centre.
Every segment carries a unit normal pointing toward increasing ``F``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import ShapeError
from .network import forward_batch
from .tasks import BoxDomain

__all__ = [
    "BoundarySegment",
    "grid_values",
    "marching_squares",
    "rasterize_boundary",
    "classify_segment_orientations",
    "grid_upper_set_violation",
    "write_grid_csv",
    "write_segments_csv",
    "read_segments_csv",
]

SLOPE_TAU = 1e-9
MIN_RESOLUTION = 16

# Corners of a cell in counter-clockwise order: (di, dj) offsets.
_CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))
# Edge k joins corner k and corner (k + 1) % 4.
_EDGES = ((0, 1), (1, 2), (2, 3), (3, 0))


@dataclass(frozen=True, eq=False)
class BoundarySegment:
    """Segment ``p -> q`` on the line ``normal . x + offset = 0``."""

    p: np.ndarray
    q: np.ndarray
    normal: np.ndarray
    offset: float

    def __post_init__(self):
        p, q, a = (np.asarray(v, dtype=np.float64) for v in (self.p, self.q, self.normal))
        if p.shape != (2,) or q.shape != (2,) or a.shape != (2,):
            raise ShapeError("boundary segments live in the plane")
        if abs(np.hypot(*a) - 1.0) > 1e-9:
            raise ValueError(f"normal {a.tolist()} is not a unit vector")
        for v in (p, q):
            if abs(float(a @ v) + self.offset) > 1e-9:
                raise ValueError("segment endpoint is off its line")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def length(self):
        return float(np.hypot(*(self.q - self.p)))

    def slope_class(self, tau=SLOPE_TAU):
        prod = self.normal[0] * self.normal[1]
        if prod < -tau:
            return "pos_slope"
        if prod > tau:
            return "neg_slope"
        return "axis"


def _check_planar(net):
    if net.input_dim != 2:
        raise ShapeError(f"boundary rasterisation needs a 2-input network, got {net.input_dim}")
    if net.output_dim != 1:
        raise ShapeError(f"boundary rasterisation needs a scalar output, got {net.output_dim}")


def grid_values(net, domain=None, resolution=128):
    """Sample ``net`` on a ``(resolution + 1)^2`` grid.

    Returns ``(gx, gy, values)`` with ``values[i, j] = F(gx[i], gy[j])``.
    """
    _check_planar(net)
    domain = domain or BoxDomain.unit(2)
    gx = np.linspace(domain.lower[0], domain.upper[0], resolution + 1)
    gy = np.linspace(domain.lower[1], domain.upper[1], resolution + 1)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    values = forward_batch(net, np.column_stack([X.ravel(), Y.ravel()]))[:, 0].reshape(X.shape)
    if np.any(np.isnan(values)):
        raise FloatingPointError("network produced NaN on the grid")
    return gx, gy, values


def _segment_edges(case, center_high):
    """Pairs of crossed edges for a cell whose high corners are encoded in ``case``."""
    if case == 5:  # corners 0 and 2 high
        return [(0, 1), (2, 3)] if center_high else [(3, 0), (1, 2)]
    if case == 10:  # corners 1 and 3 high
        return [(3, 0), (1, 2)] if center_high else [(0, 1), (2, 3)]
    crossed = [k for k, (u, v) in enumerate(_EDGES) if ((case >> u) & 1) != ((case >> v) & 1)]
    return [tuple(crossed)]


def marching_squares(gx, gy, values, threshold, center=None):
    """Extract ``values == threshold`` as oriented segments.

    A corner is *high* when its value is ``>= threshold``. ``center(xs, ys)``
    evaluates the function at cell centres and is only called for saddle
    cells; without it saddles join the high corners.
    """
    high = values >= threshold
    case = (high[:-1, :-1].astype(np.int64) | (high[1:, :-1] << 1)
            | (high[1:, 1:] << 2) | (high[:-1, 1:] << 3))
    cells = np.argwhere((case != 0) & (case != 15))
    saddle = {}
    sad = cells[np.isin(case[cells[:, 0], cells[:, 1]], (5, 10))]
    if len(sad):
        cx = 0.5 * (gx[sad[:, 0]] + gx[sad[:, 0] + 1])
        cy = 0.5 * (gy[sad[:, 1]] + gy[sad[:, 1] + 1])
        flags = center(cx, cy) >= threshold if center is not None else np.ones(len(sad), bool)
        saddle = {(int(i), int(j)): bool(f) for (i, j), f in zip(sad, flags)}

    segments = []
    for i, j in cells:
        i, j = int(i), int(j)
        pts = np.array([[gx[i + di], gy[j + dj]] for di, dj in _CORNERS])
        vals = np.array([values[i + di, j + dj] for di, dj in _CORNERS])
        c = int(case[i, j])
        for e1, e2 in _segment_edges(c, saddle.get((i, j), True)):
            ends = []
            for e in (e1, e2):
                u, v = _EDGES[e]
                s = (threshold - vals[u]) / (vals[v] - vals[u])
                ends.append(pts[u] + s * (pts[v] - pts[u]))
            p, q = ends
            d = q - p
            length = np.hypot(*d)
            if not length > 0.0:
                continue
            normal = np.array([-d[1], d[0]]) / length
            u, v = _EDGES[e1]
            low = pts[u] if vals[u] < threshold else pts[v]
            if normal @ (low - p) > 0.0:
                normal = -normal
            offset = -0.5 * float(normal @ p + normal @ q)
            segments.append(BoundarySegment(p, q, normal, offset))
    return segments


def rasterize_boundary(net, domain=None, resolution=128, threshold=0.0):
    """Segments approximating ``{x : F(x) = threshold}`` over a planar box.

    An empty list means the level set does not cross the grid.
    """
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution must be at least {MIN_RESOLUTION}, got {resolution}")
    gx, gy, values = grid_values(net, domain, resolution)

    def center(xs, ys):
        return forward_batch(net, np.column_stack([xs, ys]))[:, 0]

    return marching_squares(gx, gy, values, threshold, center)


def classify_segment_orientations(segments, tau=SLOPE_TAU):
    """Count segments by slope sign.

    Positive slope means ``a1 * a2 < -tau`` for the unit normal ``a``;
    negative slope ``a1 * a2 > tau``; everything else is axis-aligned.
    Zero-length segments are skipped and counted under ``degenerate_count``.
    """
    report = {"neg_slope_count": 0, "pos_slope_count": 0, "axis_count": 0, "degenerate_count": 0}
    for seg in segments:
        if seg.length == 0.0:
            report["degenerate_count"] += 1
            continue
        report[seg.slope_class(tau) + "_count"] += 1
    return report


def grid_upper_set_violation(values, threshold):
    """First grid pair ``p ⪯ q`` with ``F(p) >= t`` and ``F(q) < t``, or ``None``.

    Checking immediate neighbours suffices: the grid order is generated by
    unit steps along each axis.
    """
    high = np.asarray(values) >= threshold
    for axis in range(high.ndim):
        lo = [slice(None)] * high.ndim
        hi = [slice(None)] * high.ndim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        bad = np.argwhere(high[tuple(lo)] & ~high[tuple(hi)])
        if len(bad):
            p = tuple(int(v) for v in bad[0])
            q = list(p)
            q[axis] += 1
            return p, tuple(q)
    return None


def write_grid_csv(gx, gy, values, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "f"])
        for i, x in enumerate(gx):
            for j, y in enumerate(gy):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(values[i, j]))])


def write_segments_csv(segments, path, tau=SLOPE_TAU):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seg_id", "px", "py", "qx", "qy", "ax", "ay", "b", "slope_class"])
        for k, s in enumerate(segments):
            w.writerow([k, *map(repr, map(float, (*s.p, *s.q, *s.normal, s.offset))), s.slope_class(tau)])


def read_segments_csv(path):
    with open(path, newline="") as fh:
        return [
            BoundarySegment(
                [float(r["px"]), float(r["py"])],
                [float(r["qx"]), float(r["qy"])],
                [float(r["ax"]), float(r["ay"])],
                float(r["b"]),
            )
            for r in csv.DictReader(fh)
        ]
