"""Convolutions and shortcuts reduce to plain dense layers.

A valid convolution is a dense layer whose matrix repeats the kernel along
its rows. A shortcut is carried forward by extra units with weight 1. Neither
rewrite introduces a negative weight, so certificates survive.
"""
import numpy as np

from signnet import certify_structural, fuzz_equivalence, random_network, skip_to_mlp
from signnet.rewrite import conv_to_dense, lower_convolutions

rng = np.random.Generator(np.random.Philox(0))

conv_net = random_network(rng, input_dim=36, variant="conv", activation="relu")
conv = conv_net.layers[0]
dense = conv_to_dense(conv)
print(f"kernel {conv.kernel.shape} on {conv.in_shape} -> dense {dense.weights.shape}, "
      f"{np.count_nonzero(dense.weights)} nonzero entries")
low = lower_convolutions(conv_net)
rep = fuzz_equivalence(conv_net, low, (np.full(36, -1.0), np.full(36, 1.0)), 200, rng=rng)
print(f"conv -> dense: max deviation {rep.max_deviation:.1e}, "
      f"certified {certify_structural(conv_net).certified} -> {certify_structural(low).certified}")

skip_net = random_network(rng, variant="skip", activation="relu")
mlp = skip_to_mlp(skip_net, input_lower=[-5.0, -5.0])
rep = fuzz_equivalence(skip_net, mlp, ([-5.0, -5.0], [5.0, 5.0]), 200, rng=rng)
print(f"skips {[(s.source, s.target) for s in skip_net.skips]}: widths {skip_net.widths} -> {mlp.widths}")
print(f"skip -> mlp: max deviation {rep.max_deviation:.1e}, params {rep.params_before} -> {rep.params_after}")
