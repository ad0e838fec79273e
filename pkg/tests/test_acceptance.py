"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
terminal summary. ``python3 tests/test_acceptance.py`` runs the gate
without pytest.
"""
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from gradcheck import FD_RTOL, fd_mismatch, smooth_sample  # noqa: E402
from signnet.core import make_rng  # noqa: E402
from signnet.fixtures import load_fixture  # noqa: E402
from signnet.geometry import (  # noqa: E402
    classify_segment_orientations,
    grid_upper_set_violation,
    grid_values,
    rasterize_boundary,
)
from signnet.network import (  # noqa: E402
    ConvLayer,
    Network,
    PoolLayer,
    SignConstraint,
    forward_batch,
    init_random,
    random_network,
    satisfies_constraint,
)
from signnet.order import certify_structural, falsify_monotone, leq  # noqa: E402
from signnet.rewrite import TOLERANCES, conv_to_dense, fuzz_equivalence, skip_to_mlp  # noqa: E402
from signnet.tasks import (  # noqa: E402
    BoxDomain,
    TaskSpec,
    check_witness,
    witness_closed,
    witness_disconnected,
    witness_orientation,
)
from signnet.training import TrainConfig, project, train  # noqa: E402

RESULTS = []

ACTIVATIONS = ("relu", "leaky_relu", "sigmoid", "tanh")
XOR_X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
XOR_T = np.array([[0.0], [1.0], [1.0], [0.0]])
TRIPLE = (XOR_X[[0, 1, 3]], XOR_T[[0, 1, 3]])
FLOOR = 0.5 - 1e-9


def report(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({detail})"
    RESULTS.append(line)
    print(line)
    return ok


def triple_error(net):
    return float(np.max(np.abs(forward_batch(net, TRIPLE[0]) - TRIPLE[1])))


def certified_planar_nets(count, seed):
    r = make_rng(seed)
    nets = []
    while len(nets) < count:
        net = random_network(r, depth=int(r.integers(2, 5)), activation=str(r.choice(["relu", "sigmoid"])))
        if certify_structural(net).certified:
            nets.append(net)
    return nets


def test_criterion_1_order_preservation():
    r = make_rng(1)
    variants = ("dense", "pool", "skip", "conv")
    start = time.perf_counter()
    falsified = uncertified = 0
    for k in range(100):
        variant = variants[k % 4]
        dim = 4 if variant == "conv" else int(r.integers(1, 5))
        net = random_network(r, input_dim=dim, variant=variant, activation=ACTIVATIONS[(k // 4) % 4])
        uncertified += not certify_structural(net).certified
        cert = falsify_monotone(net, (np.full(dim, -5.0), np.full(dim, 5.0)), 100_000, rng=r)
        falsified += cert.falsified
    elapsed = time.perf_counter() - start
    ok = falsified == 0 and uncertified == 0 and elapsed <= 60.0
    assert report(1, "order preservation", ok,
                  f"100 nets x 1e5 pairs, {falsified} falsified, {uncertified} uncertified, {elapsed:.1f}s")


def test_criterion_2_xor_gap():
    c = SignConstraint("nonneg")
    worst = np.inf
    for seed in range(10):
        net = init_random([2, 32, 32, 1], "sigmoid", c, rng=seed, final_activation=False)
        worst = min(worst, triple_error(net))
        _, rep = train(net, (XOR_X, XOR_T), TrainConfig(0.5, 20_000, seed=seed, projection=c), probe=TRIPLE)
        worst = min(worst, min(rep.probe_trace))
    best_free = np.inf
    for seed in range(10):
        net = init_random([2, 3, 1], "sigmoid", rng=seed, final_activation=False)
        _, rep = train(net, (XOR_X, XOR_T), TrainConfig(0.5, 20_000, seed=seed))
        best_free = min(best_free, rep.final_max_error)
    ok = worst >= FLOOR and best_free < 0.1
    assert report(2, "XOR gap", ok, f"nonneg min triple error {worst:.6f}, free best corner error {best_free:.2e}")


def test_criterion_3_single_flip_repair():
    net = load_fixture("xor_fig1c")
    negatives = [(k, idx) for k, l in enumerate(net.layers) if l.weights is not None
                 for idx in zip(*np.nonzero(l.weights < 0))]
    corner = float(np.max(np.abs(forward_batch(net, XOR_X) - XOR_T)))
    (k, (row, col)), = negatives
    w = np.array(net.layers[k].weights)
    w[row, col] = abs(w[row, col])
    repaired = project(net.replace_layer(k, net.layers[k].with_weights(w)), SignConstraint("nonneg"))
    c = SignConstraint("nonneg")
    floor = triple_error(repaired)
    _, rep = train(repaired, (XOR_X, XOR_T), TrainConfig(0.1, 2000, projection=c), probe=TRIPLE)
    floor = min(floor, min(rep.probe_trace))
    ok = len(negatives) == 1 and corner < 0.1 and floor >= FLOOR
    assert report(3, "single-flip repair", ok,
                  f"{len(negatives)} negative weight, corner error {corner:.2e}, floor after sign fix {floor:.6f}")


def test_criterion_4_boundary_orientation():
    pos = segments = 0
    for net in certified_planar_nets(50, 4):
        _, _, values = grid_values(net, resolution=128)
        lo, hi = float(values.min()), float(values.max())
        for t in lo + (hi - lo) * np.arange(1, 6) / 6:
            segs = rasterize_boundary(net, resolution=128, threshold=t)
            segments += len(segs)
            pos += classify_segment_orientations(segs, tau=1e-9)["pos_slope_count"]
    flipped = load_fixture("fig1a_flipped")
    flipped_pos = classify_segment_orientations(rasterize_boundary(flipped, resolution=128, threshold=1.5))[
        "pos_slope_count"]
    ok = pos == 0 and segments > 0 and flipped_pos >= 1
    assert report(4, "boundary orientation", ok,
                  f"{segments} segments on certified nets, {pos} positive-slope; flipped fixture {flipped_pos}")


def _orientation_params(r):
    a = np.array([r.uniform(0.2, 5.0), -r.uniform(0.2, 5.0)])
    i, j = (0, 1) if r.random() < 0.5 else (1, 0)
    if r.random() < 0.5:
        a = -a
    d = r.uniform(0.1, 0.9, size=2)
    b = -float(a @ d)
    eps = r.uniform(0.001, 0.05) * min(1.0, abs(a[j] / a[i]))
    w = witness_orientation(a, b, d, eps=eps, i=i, j=j, domain=BoxDomain([-1.0, -1.0], [2.0, 2.0]))
    return w, TaskSpec.halfplane(a, b, BoxDomain([-1.0, -1.0], [2.0, 2.0]))


def _closed_params(r):
    radius = r.uniform(0.05, 0.3)
    center = r.uniform(radius + 0.05, 1 - radius - 0.05, size=2)
    ang, rho = r.uniform(0, 2 * np.pi), radius * np.sqrt(r.random()) * 0.95
    B = center + rho * np.array([np.cos(ang), np.sin(ang)])
    task = TaskSpec.disk(center, radius)
    return witness_closed(task, B, eps=r.uniform(0.001, 0.04)), task


def _disconnected_params(r):
    t = r.uniform(0.2, 0.8, size=2)
    s = r.choice([-1.0, 1.0], size=2)
    room_a = np.where(s > 0, 1 - t, t)
    room_b = np.where(s > 0, t, 1 - t)
    A = t + s * r.uniform(0.05, 0.95, size=2) * room_a
    B = t - s * r.uniform(0.05, 0.95, size=2) * room_b
    task = TaskSpec.quadrants(t)
    eps = r.uniform(0.1, 0.9) * float(min(t.min(), (1 - t).min()))
    return witness_disconnected(task, A, B, eps=eps), task


def test_criterion_5_upper_sets_and_witnesses():
    nets = certified_planar_nets(50, 5)
    grid_violations = 0
    for net in nets:
        _, _, values = grid_values(net, resolution=128)
        lo, hi = float(values.min()), float(values.max())
        for t in lo + (hi - lo) * np.arange(1, 6) / 6:
            grid_violations += grid_upper_set_violation(values, t) is not None
    r = make_rng(55)
    invalid = escaped = 0
    kinds = {}
    for name, make in (("orientation", _orientation_params), ("closed", _closed_params),
                       ("disconnected", _disconnected_params)):
        for k in range(100):
            w, task = make(r)
            kinds[w.construction] = kinds.get(w.construction, 0) + 1
            labels = task.labels(w.points)
            chain = leq(w.points[0], w.points[1]) and leq(w.points[1], w.points[2])
            invalid += not (chain and labels[0] == labels[2] != labels[1])
            net = nets[k % len(nets)]
            escaped += check_witness(net, w, task).verdict != "contradiction_demonstrated"
    ok = grid_violations == 0 and invalid == 0 and escaped == 0
    assert report(5, "upper sets and witnesses", ok,
                  f"{grid_violations} grid inversions, {invalid} invalid triples, {escaped} escapes; {kinds}")


def test_criterion_6_rewrite_equivalence():
    r = make_rng(6)
    conv_dev, sign_fail = 0.0, 0
    for k in range(200):
        kernel = r.uniform(-1, 1, size=(3, 3))
        if k % 2 == 0:
            kernel = np.abs(kernel)
        act = ACTIVATIONS[k % 4]
        net = Network(36, [ConvLayer(kernel, (6, 6), act)])
        dense = Network(36, [conv_to_dense(net.layers[0])])
        rep = fuzz_equivalence(net, dense, (np.full(36, -5.0), np.full(36, 5.0)), 50, rng=r)
        conv_dev = max(conv_dev, rep.max_deviation)
        sign_fail += certify_structural(net).certified and not certify_structural(dense).certified
    skip_dev = 0.0
    for k in range(200):
        net = random_network(r, activation="relu", variant="skip", nonneg=k % 4 != 3)
        lower = np.full(2, -5.0)
        mlp = skip_to_mlp(net, input_lower=lower)
        rep = fuzz_equivalence(net, mlp, (lower, np.full(2, 5.0)), 200, rng=r)
        skip_dev = max(skip_dev, rep.max_deviation)
        sign_fail += certify_structural(net).certified and not certify_structural(mlp).certified
    ok = conv_dev <= TOLERANCES["conv2dense"] and skip_dev <= TOLERANCES["skip2mlp"] and sign_fail == 0
    assert report(6, "rewrite equivalence", ok,
                  f"conv max dev {conv_dev:.1e}, skip max dev {skip_dev:.1e}, {sign_fail} sign failures")


def test_criterion_7_gradients_and_projection():
    r = make_rng(7)
    worst = 0.0
    for kind in ACTIVATIONS + ("identity",):
        for _ in range(10):
            sizes = [2, int(r.integers(1, 6)), int(r.integers(1, 5)), 1]
            net = init_random(sizes, kind, rng=r)
            worst = max(worst, fd_mismatch(net, smooth_sample(net, r), r.uniform(-1, 1, size=(4, 1))))
    not_idempotent = broken = 0
    for k in range(12):
        kind = ACTIVATIONS[k % 4]
        free = init_random([2, 8, 8, 1], kind, rng=r, final_activation=False)
        masks = [r.integers(-1, 2, size=l.weights.shape) for l in free.layers]
        c = SignConstraint("nonneg") if k % 2 else SignConstraint(masks)
        once = project(free, c)
        twice = project(once, c)
        not_idempotent += any(not np.array_equal(a.weights, b.weights) for a, b in zip(once.layers, twice.layers))
        net = once
        for epoch in range(100):
            net, _ = train(net, (XOR_X, XOR_T), TrainConfig(0.2, 1, batch=2, seed=epoch, projection=c))
            broken += not satisfies_constraint(net, c)
        after = project(net, c)
        not_idempotent += any(not np.array_equal(a.weights, b.weights) for a, b in zip(net.layers, after.layers))
    ok = worst <= FD_RTOL and not_idempotent == 0 and broken == 0
    assert report(7, "gradients and projection", ok,
                  f"worst FD gap {worst:.1e}, {not_idempotent} non-idempotent, {broken} constraint breaks")


def test_criterion_8_maxpool_monotone():
    r = make_rng(8)
    configs = [
        (6, [[0, 1, 2], [3, 4, 5]]),
        (5, [[0], [1], [2], [3], [4]]),
        (7, [[0, 1, 2, 3, 4, 5, 6]]),
        (8, [[0, 5], [2, 3, 7]]),
        (9, [[4, 0, 8], [1], [2, 6], [3, 7]]),
    ]
    violations = 0
    for dim, groups in configs:
        pool = PoolLayer(groups)
        xs = r.uniform(-5, 5, size=(100_000, dim))
        ys = xs + r.random((100_000, dim)) * (r.random((100_000, dim)) < 0.7)
        violations += int(np.sum(np.any(pool.apply(xs) > pool.apply(ys), axis=1)))
    ok = violations == 0
    assert report(8, "max-pool monotonicity", ok, f"{len(configs)} configurations x 1e5 pairs, {violations} violations")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
