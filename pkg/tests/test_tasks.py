import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from signnet.core import make_rng
from signnet.fixtures import xor_fig1c, xor_fig1c_base
from signnet.network import random_network
from signnet.order import leq
from signnet.tasks import (
    BoxDomain,
    TaskSpec,
    WitnessTriple,
    check_partition,
    check_witness,
    witness_closed,
    witness_disconnected,
    witness_orientation,
    xor_continuous,
    xor_discontinuous,
)

CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
unit = st.floats(0.05, 0.95)


def test_xor_values():
    np.testing.assert_array_equal(xor_continuous(CORNERS), [0, 1, 1, 0])
    assert xor_continuous([0.5, 0.5]) == 0.5
    np.testing.assert_array_equal(xor_discontinuous(CORNERS), xor_continuous(CORNERS))
    assert xor_discontinuous([0.9, 0.9]) == 0
    assert xor_discontinuous([0.9, 0.1]) == 1
    assert xor_discontinuous([0.5, 0.2]) == 1
    with pytest.raises(ValueError):
        xor_continuous([1.5, 0.0])
    with pytest.raises(ValueError):
        xor_discontinuous([0.2, 0.2], 0.0, 0.5)


@pytest.mark.parametrize("task", [
    TaskSpec.xor(continuous=False, thresholds=(0.3, 0.6)),
    TaskSpec.disk(),
    TaskSpec.quadrants((0.4, 0.7)),
    TaskSpec.halfplane([1.0, -2.0], 0.3),
])
def test_partitions_are_valid(task):
    assert all(check_partition(task, 64).values())


def test_task_json_round_trip():
    for task in (TaskSpec.disk((0.4, 0.6), 0.1), TaskSpec.quadrants(), TaskSpec.halfplane([1, 1], -1)):
        back = TaskSpec.from_json(task.to_json())
        xs = make_rng(0).random((50, 2))
        np.testing.assert_array_equal(back.labels(xs), task.labels(xs))


def test_orientation_hand_example():
    w = witness_orientation([1.0, -1.0], 0.0, [0.5, 0.5], eps=0.1)
    np.testing.assert_allclose(w.points, [[0.4, 0.5], [0.6, 0.5], [0.6, 0.7]], atol=1e-15)
    np.testing.assert_allclose(w.points @ np.array([1.0, -1.0]), [-0.1, 0.1, -0.1], atol=1e-15)
    assert w.labels == (0, 1, 0)


def test_orientation_swapped_axes():
    w = witness_orientation([-1.0, 1.0], 0.0, [0.5, 0.5], eps=0.1, i=1, j=0)
    np.testing.assert_allclose(w.points, [[0.5, 0.4], [0.5, 0.6], [0.7, 0.6]], atol=1e-15)
    np.testing.assert_allclose(w.points @ np.array([-1.0, 1.0]), [-0.1, 0.1, -0.1], atol=1e-15)


def test_orientation_guards():
    with pytest.raises(ValueError):
        witness_orientation([1.0, 1.0], -1.0, [0.5, 0.5])
    with pytest.raises(ValueError):
        witness_orientation([1.0, -1.0], 0.0, [0.5, 0.6])
    with pytest.raises(ValueError):
        witness_orientation([1.0, -1.0], 0.0, [0.5, 0.5], eps=0.0)


def test_closed_disk_example():
    task = TaskSpec.disk((0.5, 0.5), 0.2)
    w = witness_closed(task, [0.5, 0.5], eps=0.05)
    np.testing.assert_allclose(w.points[[0, 2]], [[0.25, 0.5], [0.75, 0.5]], atol=2e-6)
    off = witness_closed(task, [0.6, 0.5], eps=0.05)
    np.testing.assert_allclose(off.points[[0, 2]], w.points[[0, 2]], atol=2e-6)
    assert w.labels == (0, 1, 0)


def test_closed_guards():
    with pytest.raises(ValueError):
        witness_closed(TaskSpec.disk((0.5, 0.5), 0.6), [0.5, 0.5])
    with pytest.raises(ValueError):
        witness_closed(TaskSpec.disk((0.5, 0.5), 0.2), [0.1, 0.1])


def test_disconnected_comparable():
    task = TaskSpec.quadrants()
    w = witness_disconnected(task, [0.25, 0.25], [0.75, 0.75])
    A, C, B = w.points
    assert leq(A, C) and leq(C, B)
    assert task.label(C) == 1 and w.labels == (0, 1, 0)


def test_disconnected_incomparable():
    task = TaskSpec.quadrants()
    w = witness_disconnected(task, [0.25, 0.75], [0.75, 0.25], eps=0.01)
    np.testing.assert_allclose(w.points, [[0.25, 0.49], [0.25, 0.75], [0.51, 0.75]])
    assert w.names == ("D", "G", "E") and w.labels == (0, 1, 0)


def test_disconnected_guards():
    task = TaskSpec.quadrants()
    with pytest.raises(ValueError):
        witness_disconnected(task, [0.25, 0.75], [0.25, 0.75])
    with pytest.raises(ValueError):
        witness_disconnected(task, [0.25, 0.25], [0.75, 0.25])
    with pytest.raises(ValueError):
        witness_disconnected(task, [0.1, 0.1], [0.2, 0.3])


def test_witness_triple_validation():
    with pytest.raises(ValueError):
        WitnessTriple(CORNERS[[0, 1, 3]], (1, 1, 1))
    with pytest.raises(ValueError):
        WitnessTriple(CORNERS[[1, 2, 3]], (0, 1, 0))


def test_check_witness_xor():
    xor = WitnessTriple.xor()
    r = make_rng(3)
    for _ in range(20):
        res = check_witness(random_network(r), xor)
        assert res.verdict == "contradiction_demonstrated" and res.max_error >= 0.5
    assert check_witness(xor_fig1c(), xor).verdict == "escaped"
    assert check_witness(xor_fig1c_base(), xor).verdict == "contradiction_demonstrated"


@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0), unit, st.floats(0.001, 0.04))
def test_orientation_property(a1, a2, d1, eps):
    a = np.array([a1, -a2])
    d2 = a1 * d1 / a2
    assume(0.05 < d2 < 0.95)
    d = np.array([d1, d2])
    w = witness_orientation(a, 0.0, d, eps=eps)
    assert leq(w.points[0], w.points[1]) and leq(w.points[1], w.points[2])
    assert w.labels[0] == w.labels[2] != w.labels[1]


@given(unit, unit, st.floats(0.05, 0.3))
def test_closed_property(cx, cy, r):
    assume(r < min(cx, 1 - cx, cy, 1 - cy) - 0.02)
    w = witness_closed(TaskSpec.disk((cx, cy), r), [cx, cy], eps=0.01)
    assert w.labels == (0, 1, 0)


frac = st.floats(0.05, 0.95)


@given(st.floats(0.2, 0.8), st.floats(0.2, 0.8), st.sampled_from([(1, 1), (1, -1), (-1, 1), (-1, -1)]),
       frac, frac, frac, frac)
def test_disconnected_property(t1, t2, sides, fa1, fa2, fb1, fb2):
    # A in one quadrant, B in the opposite one: same parity, different regions
    t = np.array([t1, t2])
    s = np.array(sides)
    room = np.where(s > 0, 1.0 - t, t)
    A = t + s * np.array([fa1, fa2]) * room
    B = t - s * np.array([fb1, fb2]) * np.where(s > 0, t, 1.0 - t)
    A = np.where(s > 0, np.maximum(A, t), np.minimum(A, np.nextafter(t, 0)))
    task = TaskSpec.quadrants((t1, t2))
    eps = 0.5 * min(t1, t2, 1 - t1, 1 - t2)
    w = witness_disconnected(task, A, B, eps=eps)
    assert w.labels[0] == w.labels[2] != w.labels[1]
    assert leq(w.points[0], w.points[1]) and leq(w.points[1], w.points[2])
