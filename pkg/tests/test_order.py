import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from signnet.core import make_rng
from signnet.fixtures import xor_fig1c
from signnet.network import (
    ConvLayer,
    DenseLayer,
    Network,
    PoolLayer,
    SignConstraint,
    SkipLink,
    flip_weight,
    forward_batch,
    init_random,
    random_network,
)
from signnet.order import (
    CERTIFIED,
    FALSIFIED,
    INCONCLUSIVE,
    OrderPair,
    certify_structural,
    falsify_monotone,
    is_upper_set_violation,
    leq,
    sample_order_pairs,
)
from signnet.tasks import BoxDomain

small = st.integers(-3, 3).map(float)
vec3 = arrays(np.float64, 3, elements=small)


def test_leq_examples():
    assert leq([0.0, 0.0], [1.0, 0.0])
    assert not leq([1.0, 0.0], [0.0, 1.0])
    assert not leq([0.0, 1.0], [1.0, 0.0])
    x = np.array([0.3, -0.2])
    assert leq(x, x)


@given(vec3, vec3, vec3)
def test_leq_partial_order(x, y, z):
    assert leq(x, x)
    if leq(x, y) and leq(y, x):
        np.testing.assert_array_equal(x, y)
    if leq(x, y) and leq(y, z):
        assert leq(x, z)


def test_order_pair_validates():
    OrderPair([0.0, 0.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        OrderPair([1.0, 0.0], [0.0, 1.0])


def test_structural_certificates():
    assert certify_structural(init_random([2, 4, 1], "relu", SignConstraint("nonneg"), rng=0)).verdict == CERTIFIED
    net = Network(2, [DenseLayer([[1.0, -0.5]], [0.0], "relu")])
    assert certify_structural(net).verdict == INCONCLUSIVE
    conv = ConvLayer(np.full((2, 2), 0.5), (3, 3), "relu")
    mixed = Network(
        9,
        [conv, PoolLayer([[0, 1], [2, 3]]), DenseLayer(np.ones((2, 2)), [0.0, 1.0], "tanh"),
         DenseLayer(np.ones((2, 2)), [0.0, 0.0], "sigmoid")],
        [SkipLink(2, 4)],
    )
    assert certify_structural(mixed).certified


def test_sample_pairs():
    pairs = sample_order_pairs(([-1.0, 0.0], [1.0, 2.0]), 500, rng=3)
    assert all(leq(p.x, p.y) for p in pairs)
    again = sample_order_pairs(BoxDomain([-1.0, 0.0], [1.0, 2.0]), 500, rng=3)
    assert all(np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y) for a, b in zip(pairs, again))
    # a pair clipped at the corner collapses to (x, x)
    assert OrderPair([1.0, 2.0], [1.0, 2.0]).x.tolist() == [1.0, 2.0]


def test_falsify_hand_example():
    net = Network(1, [DenseLayer([[-1.0]], [0.0], "identity")])
    cert = falsify_monotone(net, None, 0, pairs=[OrderPair([0.0], [1.0])])
    assert cert.verdict == FALSIFIED
    assert cert.witness["fx"] == [0.0] and cert.witness["fy"] == [-1.0]


def test_falsify_finds_xor_violation():
    cert = falsify_monotone(xor_fig1c(), BoxDomain.unit(2), 10_000, rng=0)
    assert cert.falsified
    w = cert.witness
    assert leq(w["x"], w["y"]) and w["fx"][0] > w["fy"][0]


@pytest.mark.parametrize("variant", ["dense", "pool", "skip"])
def test_certified_nets_never_falsified(variant):
    r = make_rng(8)
    for _ in range(10):
        net = random_network(r, variant=variant)
        assert certify_structural(net).certified
        assert falsify_monotone(net, ([-5.0, -5.0], [5.0, 5.0]), 10_000, rng=r).verdict == INCONCLUSIVE


def test_upper_set_hand_example():
    net = Network(2, [DenseLayer([[-1.0, 0.0]], [0.0], "identity")])
    hit = is_upper_set_violation(net, -0.5, [OrderPair([0.0, 0.0], [1.0, 0.0])])
    assert hit is not None
    assert hit["fx"] == [0.0] and hit["fy"] == [-1.0]


def test_upper_set_threshold_below_range():
    net = Network(2, [DenseLayer([[-1.0, 0.0]], [0.0], "identity")])
    pairs = sample_order_pairs(BoxDomain.unit(2), 1000, rng=1)
    assert is_upper_set_violation(net, -2.0, pairs) is None


def test_certified_nets_have_upper_superlevel_sets():
    r = make_rng(13)
    pairs = sample_order_pairs(([-5.0, -5.0], [5.0, 5.0]), 10_000, rng=r)
    for _ in range(5):
        net = random_network(r)
        xs = np.array([p.x for p in pairs[:200]])
        vals = forward_batch(net, xs)[:, 0]
        for t in r.uniform(vals.min(), vals.max(), 20):
            assert is_upper_set_violation(net, t, pairs) is None


def test_flipped_network_can_lose_certificate():
    net = init_random([2, 3, 1], "relu", SignConstraint("nonneg"), rng=2)
    assert certify_structural(flip_weight(net, 0, 0, 0)).verdict == INCONCLUSIVE
