"""Classification targets on boxes and order-chain witnesses.

A witness is three points ``P0 ⪯ P1 ⪯ P2`` whose outer points share a label
that differs from the middle one. Any monotone scalar ``F`` satisfies
``F(P0) <= F(P1) <= F(P2)``, so it misses at least one of the three labels by
half the label gap or more. The constructors below build such chains for
boundaries of positive slope, bounded regions and disconnected classes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import ShapeError, as_vec, make_rng
from .network import forward_batch
from .order import leq

__all__ = [
    "BoxDomain",
    "TaskSpec",
    "Region",
    "WitnessTriple",
    "WitnessCheck",
    "xor_continuous",
    "xor_discontinuous",
    "witness_orientation",
    "witness_closed",
    "witness_disconnected",
    "check_witness",
    "check_partition",
]

HYPERPLANE_TOL = 1e-9
BISECTION_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class BoxDomain:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, hi = as_vec(self.lower, "lower"), as_vec(self.upper, "upper")
        if lo.shape != hi.shape:
            raise ShapeError(f"bounds have shapes {lo.shape} and {hi.shape}")
        if not (np.all(lo <= hi) and np.any(lo < hi)):
            raise ValueError("box needs lower ⪯ upper, strictly in at least one coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dim=2):
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self):
        return self.lower.size

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, x):
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def sample(self, count, rng=None):
        rng = make_rng(rng if rng is not None else 0)
        return self.lower + rng.random((count, self.dim)) * self.width

    def default_eps(self):
        return float(np.max(self.width)) / 64.0

    def to_json(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["lower"], obj["upper"])


def _check_unit_square(x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != 2 or np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError(f"point {x.tolist()} is outside [0, 1]^2")
    return x


def xor_continuous(x):
    """``x1 + x2 - 2 x1 x2`` on the unit square."""
    x = _check_unit_square(x)
    return x[..., 0] + x[..., 1] - 2.0 * x[..., 0] * x[..., 1]


def _check_thresholds(t):
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0.0) or np.any(t >= 1.0):
        raise ValueError(f"thresholds must lie in (0, 1), got {t.tolist()}")
    return t


def xor_discontinuous(x, t1=0.5, t2=0.5):
    """0 when both coordinates sit on the same side of their thresholds, else 1.

    "Upper side" is inclusive: ``x1 == t1`` counts as ``x1 >= t1``.
    """
    x = _check_unit_square(x)
    t = _check_thresholds([t1, t2])
    upper = x >= t
    return (upper[..., 0] != upper[..., 1]).astype(np.int64)


@dataclass(frozen=True)
class Region:
    name: str
    class_id: int
    member: object = field(repr=False)

    def __contains__(self, x):
        return bool(self.member(np.asarray(x, dtype=np.float64)[None, :])[0])


TASK_KINDS = ("xor_continuous", "xor_discontinuous", "closed_shape", "disconnected_quadrants", "halfplane")


@dataclass(frozen=True, eq=False)
class TaskSpec:
    """A target function on a box.

    ``params`` by kind:

    * ``xor_continuous``: none
    * ``xor_discontinuous``: ``thresholds`` (t1, t2)
    * ``closed_shape``: ``center``, ``radius``; label 1 on the closed disk
    * ``disconnected_quadrants``: ``thresholds``; label is the parity of the
      number of coordinates at or above their threshold (n-dimensional XOR)
    * ``halfplane``: ``a``, ``b``; label 1 where ``a.x + b > 0``
    """

    kind: str
    domain: BoxDomain = field(default_factory=BoxDomain.unit)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        p = {k: (np.asarray(v, dtype=np.float64) if isinstance(v, (list, tuple, np.ndarray)) else v)
             for k, v in self.params.items()}
        dim = self.domain.dim
        if self.kind in ("xor_continuous", "xor_discontinuous") and dim != 2:
            raise ValueError("XOR tasks live on the unit square")
        if self.kind == "xor_discontinuous":
            p["thresholds"] = _check_thresholds(p.get("thresholds", (0.5, 0.5)))
        if self.kind == "disconnected_quadrants":
            t = np.asarray(p.get("thresholds", np.full(dim, 0.5)), dtype=np.float64)
            if t.shape != (dim,) or not (np.all(t > self.domain.lower) and np.all(t < self.domain.upper)):
                raise ValueError("thresholds must lie strictly inside the domain")
            p["thresholds"] = t
        if self.kind == "closed_shape":
            p["center"] = as_vec(p["center"], "center")
            p["radius"] = float(p["radius"])
            if p["radius"] <= 0 or p["center"].shape != (dim,):
                raise ValueError("closed_shape needs a positive radius and a center in the domain")
        if self.kind == "halfplane":
            p["a"] = as_vec(p["a"], "a")
            p["b"] = float(p.get("b", 0.0))
            if p["a"].shape != (dim,) or not np.any(p["a"] != 0):
                raise ValueError("halfplane needs a nonzero normal of the domain's dimension")
        object.__setattr__(self, "params", p)

    @classmethod
    def xor(cls, continuous=True, thresholds=(0.5, 0.5)):
        if continuous:
            return cls("xor_continuous")
        return cls("xor_discontinuous", params={"thresholds": thresholds})

    @classmethod
    def disk(cls, center=(0.5, 0.5), radius=0.2, domain=None):
        return cls("closed_shape", domain or BoxDomain.unit(len(center)), {"center": center, "radius": radius})

    @classmethod
    def quadrants(cls, thresholds=(0.5, 0.5), domain=None):
        return cls("disconnected_quadrants", domain or BoxDomain.unit(len(thresholds)), {"thresholds": thresholds})

    @classmethod
    def halfplane(cls, a, b=0.0, domain=None):
        return cls("halfplane", domain or BoxDomain.unit(len(a)), {"a": a, "b": b})

    def labels(self, xs):
        """Vectorised labeler over rows of ``xs``."""
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        if xs.shape[1] != self.domain.dim:
            raise ShapeError(f"points of width {xs.shape[1]} for a {self.domain.dim}-D task")
        p = self.params
        if self.kind == "xor_continuous":
            return xor_continuous(xs)
        if self.kind == "xor_discontinuous":
            return xor_discontinuous(xs, *p["thresholds"])
        if self.kind == "closed_shape":
            return (np.linalg.norm(xs - p["center"], axis=1) <= p["radius"]).astype(np.int64)
        if self.kind == "disconnected_quadrants":
            return ((xs >= p["thresholds"]).sum(axis=1) % 2).astype(np.int64)
        return (xs @ p["a"] + p["b"] > 0.0).astype(np.int64)

    def label(self, x):
        return self.labels(np.asarray(x, dtype=np.float64)[None, :])[0]

    def regions(self):
        """The partition of the domain into constant-label regions."""
        p = self.params
        if self.kind == "xor_continuous":
            raise ValueError("a continuous target has no region partition")
        if self.kind == "closed_shape":
            inside = lambda xs: np.linalg.norm(xs - p["center"], axis=1) <= p["radius"]
            return [Region("disk", 1, inside), Region("outside", 0, lambda xs: ~inside(xs))]
        if self.kind == "halfplane":
            pos = lambda xs: xs @ p["a"] + p["b"] > 0.0
            return [Region("positive", 1, pos), Region("non-positive", 0, lambda xs: ~pos(xs))]
        t = p["thresholds"]
        out = []
        for code in range(2 ** t.size):
            sides = np.array([(code >> k) & 1 for k in range(t.size)], dtype=bool)
            name = "orthant-" + "".join("+" if s else "-" for s in sides)
            out.append(Region(name, int(sides.sum() % 2),
                              lambda xs, sides=sides: np.all((xs >= t) == sides, axis=1)))
        return out

    def to_json(self):
        return {
            "kind": self.kind,
            "domain": self.domain.to_json(),
            **{k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.params.items()},
        }

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        obj = dict(obj)
        kind = obj.pop("kind")
        domain = BoxDomain.from_json(obj.pop("domain")) if "domain" in obj else None
        if domain is None:
            dim = len(obj.get("center", obj.get("a", obj.get("thresholds", (0, 0)))))
            domain = BoxDomain.unit(dim)
        return cls(kind, domain, obj)


def check_partition(task, resolution=64):
    """Check the region properties of ``task`` on a grid over its 2-D domain.

    Nonempty regions, coverage, disjointness, constant labels within regions,
    and 4-neighbouring grid points in different regions carrying different
    labels. Returns a dict of booleans, one per property.
    """
    if task.domain.dim != 2:
        raise ValueError("grid partition checks are 2-D only")
    lo, hi = task.domain.lower, task.domain.upper
    gx = np.linspace(lo[0], hi[0], resolution + 1)
    gy = np.linspace(lo[1], hi[1], resolution + 1)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    regions = task.regions()
    member = np.array([r.member(pts) for r in regions])
    labels = task.labels(pts)
    owner = np.argmax(member, axis=0).reshape(X.shape)
    cls = np.array([r.class_id for r in regions])
    adjacent_ok = True
    for a, b in ((owner[1:, :], owner[:-1, :]), (owner[:, 1:], owner[:, :-1])):
        differ = a != b
        adjacent_ok &= bool(np.all(cls[a[differ]] != cls[b[differ]]))
    return {
        "nonempty": bool(np.all(member.any(axis=1))),
        "covers": bool(np.all(member.any(axis=0))),
        "disjoint": bool(np.all(member.sum(axis=0) <= 1)),
        "constant_label": bool(np.all(cls[owner.ravel()] == labels)),
        "adjacent_differ": adjacent_ok,
    }


@dataclass(frozen=True, eq=False)
class WitnessTriple:
    """Chain ``points[0] ⪯ points[1] ⪯ points[2]`` with labels ``(c, c', c)``, ``c != c'``.

    Validated on construction.
    """

    points: np.ndarray
    labels: tuple
    names: tuple = ("A", "B", "C")
    construction: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] != 3:
            raise ShapeError(f"a witness needs three points, got array of shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("witness points must be finite")
        if not (leq(pts[0], pts[1]) and leq(pts[1], pts[2])):
            raise ValueError(f"witness points do not form a chain: {pts.tolist()}")
        labels = tuple(int(v) for v in self.labels)
        if not (labels[0] == labels[2] != labels[1]):
            raise ValueError(f"ill-formed witness: labels {labels} need the pattern (c, c', c)")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def xor(cls):
        return cls(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]), (0, 1, 0), ("(0,0)", "(1,0)", "(1,1)"), "xor")

    def to_json(self):
        return {
            "construction": self.construction,
            "points": {n: p.tolist() for n, p in zip(self.names, self.points)},
            "chain": " ⪯ ".join(self.names),
            "labels": dict(zip(self.names, self.labels)),
        }


def _side_label(a, b, x):
    return int(float(a @ x) + b > 0.0)


def witness_orientation(a, b, d, eps=None, i=0, j=1, domain=None):
    """Three points around a boundary point ``d`` of the line ``a.x + b = 0``.

    Requires ``a[i] * a[j] < 0``. With ``e_k`` the unit vectors::

        A = d - eps e_i
        B = d + eps e_i
        C = B - 2 (a_i / a_j) eps e_j

    so ``A ⪯ B ⪯ C`` while ``a.A + b = a.C + b = -a_i eps`` and
    ``a.B + b = +a_i eps``: A and C lie on one side, B on the other.
    Indices are 0-based.
    """
    a = as_vec(a, "normal")
    d = as_vec(d, "point")
    b = float(b)
    if a.shape != d.shape:
        raise ShapeError(f"normal {a.shape} and point {d.shape} differ in dimension")
    if i == j or not (0 <= i < a.size and 0 <= j < a.size):
        raise ValueError(f"invalid coordinate pair ({i}, {j})")
    if not a[i] * a[j] < 0:
        raise ValueError(f"need a_i * a_j < 0, got a_{i}={a[i]}, a_{j}={a[j]}")
    if abs(float(a @ d) + b) > HYPERPLANE_TOL:
        raise ValueError(f"point {d.tolist()} is not on the line (residual {float(a @ d) + b})")
    eps = (domain or BoxDomain.unit(a.size)).default_eps() if eps is None else float(eps)
    if not eps > 0:
        raise ValueError("eps must be positive")
    A = d.copy()
    A[i] -= eps
    B = d.copy()
    B[i] += eps
    C = B.copy()
    C[j] -= 2.0 * (a[i] / a[j]) * eps
    pts = np.array([A, B, C])
    if domain is not None and not all(domain.contains(p) for p in pts):
        raise ValueError("witness points leave the domain; use a smaller eps")
    return WitnessTriple(pts, tuple(_side_label(a, b, p) for p in pts), ("A", "B", "C"), "orientation")


def _member_fn(region):
    if isinstance(region, TaskSpec):
        if region.kind != "closed_shape":
            raise ValueError("witness_closed needs a closed_shape task")
        return lambda x: bool(region.labels(x[None, :])[0] == 1), region.domain
    if isinstance(region, Region):
        return (lambda x: x in region), None
    return (lambda x: bool(region(x))), None


def _exit_point(member, inside, outside, tol):
    """Bisect the segment between an inside and an outside point; returns the last inside point."""
    while np.max(np.abs(outside - inside)) > tol:
        mid = 0.5 * (inside + outside)
        if member(mid):
            inside = mid
        else:
            outside = mid
    return inside


def witness_closed(region, B, eps=None, domain=None, tol=BISECTION_TOL):
    """Points on the first-axis line through ``B``, just outside a bounded region.

    ``region`` is a ``closed_shape`` task, a :class:`Region` or a predicate on
    points. The region's extent along the line is located by bisection and A,
    C are placed ``eps`` beyond it, giving ``A ⪯ B ⪯ C`` with B inside and A,
    C outside.
    """
    member, task_domain = _member_fn(region)
    domain = domain or task_domain or BoxDomain.unit(len(B))
    B = as_vec(B, "B")
    if B.size != domain.dim:
        raise ShapeError(f"B has dimension {B.size}, domain has {domain.dim}")
    if not member(B):
        raise ValueError(f"B={B.tolist()} is not in the region")
    eps = domain.default_eps() if eps is None else float(eps)
    ends = []
    for bound in (domain.lower[0], domain.upper[0]):
        edge = B.copy()
        edge[0] = bound
        if member(edge):
            raise ValueError("the line through B never leaves the region inside the domain")
        ends.append(_exit_point(member, B.copy(), edge, tol))
    A = ends[0].copy()
    A[0] -= eps
    C = ends[1].copy()
    C[0] += eps
    pts = np.array([A, B, C])
    if not (domain.contains(A) and domain.contains(C)):
        raise ValueError("eps steps outside the domain")
    labels = tuple(int(member(p)) for p in pts)
    return WitnessTriple(pts, labels, ("A", "B", "C"), "closed")


def _first_off_class_run(task, path, samples=257):
    """Midpoint of the first stretch along ``path`` whose label differs from ``start``'s."""
    ts = np.linspace(0.0, 1.0, samples)
    pts = np.array([path(t) for t in ts])
    labels = task.labels(pts)
    off = np.flatnonzero(labels != labels[0])
    if off.size == 0:
        return None
    k = off[0]
    end = k
    while end + 1 < samples and labels[end + 1] == labels[k]:
        end += 1
    target = labels[k]

    def edge(t_in, t_out):
        for _ in range(60):
            mid = 0.5 * (t_in + t_out)
            if task.labels(path(mid)[None, :])[0] == target:
                t_in = mid
            else:
                t_out = mid
        return t_in

    t_lo = edge(ts[k], ts[k - 1])
    t_hi = edge(ts[end], ts[end + 1]) if end + 1 < samples else ts[end]
    return path(0.5 * (t_lo + t_hi))


def witness_disconnected(task, A, B, eps=None):
    """Witness for a class split over two disconnected regions.

    ``A`` and ``B`` must carry the same label but lie in different orthants of
    a ``disconnected_quadrants`` task.

    * Comparable pair (``A ⪯ B`` or ``B ⪯ A``): a point C of the other class
      between them, first searched on the segment AB and otherwise on the
      axis-parallel staircase path from A to B; every point of that path lies
      in the order interval, so ``A ⪯ C ⪯ B``.
    * Incomparable pair: pick coordinates ``i`` (``A_i < t_i <= B_i``) and
      ``j`` (``A_j >= t_j > B_j``), set ``G = A``, ``D = G`` with coordinate
      ``j`` moved to ``t_j - eps`` and ``E = G`` with coordinate ``i`` moved
      to ``t_i + eps``. Then ``D ⪯ G ⪯ E`` and D, E fall in the other class.
    """
    if task.kind != "disconnected_quadrants":
        raise ValueError("witness_disconnected needs a disconnected_quadrants task")
    A, B = as_vec(A, "A"), as_vec(B, "B")
    dom, t = task.domain, task.params["thresholds"]
    if A.shape != B.shape or A.size != dom.dim:
        raise ShapeError("A and B must be points of the task domain")
    if not (dom.contains(A) and dom.contains(B)):
        raise ValueError("A and B must lie in the domain")
    if np.array_equal(A, B):
        raise ValueError("A and B must be distinct points")
    la, lb = task.label(A), task.label(B)
    if la != lb:
        raise ValueError(f"A and B belong to different classes ({la} vs {lb})")
    side_a, side_b = A >= t, B >= t
    if np.array_equal(side_a, side_b):
        raise ValueError("A and B lie in the same region; nothing is disconnected")
    eps = dom.default_eps() if eps is None else float(eps)

    if leq(A, B) or leq(B, A):
        lo, hi = (A, B) if leq(A, B) else (B, A)
        C = _first_off_class_run(task, lambda s: lo + s * (hi - lo))
        construction = "disconnected/segment"
        if C is None:
            corners = [lo.copy()]
            for k in range(lo.size):
                nxt = corners[-1].copy()
                nxt[k] = hi[k]
                corners.append(nxt)
            legs = len(corners) - 1

            def stair(s):
                pos = min(s * legs, legs - 1e-12)
                k = int(pos)
                return corners[k] + (pos - k) * (corners[k + 1] - corners[k])

            C = _first_off_class_run(task, stair)
            construction = "disconnected/staircase"
        pts = np.array([lo, C, hi])
        return WitnessTriple(pts, tuple(task.labels(pts)), ("A", "C", "B"), construction)

    i = int(np.flatnonzero(~side_a & side_b)[0])
    j = int(np.flatnonzero(side_a & ~side_b)[0])
    G = A.copy()
    D = G.copy()
    D[j] = t[j] - eps
    E = G.copy()
    E[i] = t[i] + eps
    pts = np.array([D, G, E])
    if not (dom.contains(D) and dom.contains(E)):
        raise ValueError("eps steps outside the domain")
    return WitnessTriple(pts, tuple(task.labels(pts)), ("D", "G", "E"), "disconnected/incomparable")


@dataclass(frozen=True)
class WitnessCheck:
    verdict: str
    outputs: tuple
    labels: tuple
    max_error: float

    def to_json(self):
        return {"verdict": self.verdict, "outputs": list(self.outputs),
                "labels": list(self.labels), "max_error": self.max_error}


def check_witness(net, w, task=None):
    """Evaluate a scalar network on a witness chain.

    ``contradiction_demonstrated``: the outputs respect the chain order, so at
    least one of the three points is missed by half the label gap or more
    (``max_error`` reports the worst miss). ``escaped``: the outputs break
    the order, which only a network with negative weights can do.
    """
    if net.input_dim != w.points.shape[1]:
        raise ShapeError(f"network takes {net.input_dim} inputs, witness points have {w.points.shape[1]}")
    if net.output_dim != 1:
        raise ShapeError("check_witness needs a scalar-output network")
    labels = w.labels
    if task is not None:
        labels = tuple(int(v) for v in task.labels(w.points))
        if not (labels[0] == labels[2] != labels[1]):
            raise ValueError(f"ill-formed witness for this task: labels {labels}")
    f = forward_batch(net, w.points)[:, 0]
    ordered = bool(f[0] <= f[1] <= f[2])
    err = float(np.max(np.abs(f - np.asarray(labels, dtype=np.float64))))
    return WitnessCheck("contradiction_demonstrated" if ordered else "escaped",
                        tuple(float(v) for v in f), labels, err)
