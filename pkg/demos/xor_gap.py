"""Why non-negative weights cannot learn XOR, and how one flipped weight fixes it.

The corners (0,0) ⪯ (1,0) ⪯ (1,1) carry targets 0, 1, 0. A network with
non-negative weights is order-preserving, so its outputs on that chain are
non-decreasing and one of the three must be off by at least 0.5. Training
cannot get around this: we log the triple error after every update.
"""
import numpy as np

from signnet import SignConstraint, TrainConfig, flip_weight, forward_batch, init_random, train

X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
T = np.array([[0.0], [1.0], [1.0], [0.0]])
TRIPLE = (X[[0, 1, 3]], T[[0, 1, 3]])

# Unconstrained: a 2-3-1 sigmoid net learns XOR.
net = init_random([2, 3, 1], "sigmoid", rng=0, final_activation=False)
free, rep = train(net, (X, T), TrainConfig(0.5, 20_000))
print(f"free 2-3-1: max corner error {rep.final_max_error:.2e}")
print("  outputs", np.round(forward_batch(free, X)[:, 0], 4))

# Non-negative: the triple error never drops below 0.5.
nonneg = SignConstraint("nonneg")
net = init_random([2, 32, 32, 1], "sigmoid", nonneg, rng=0, final_activation=False)
plus, rep = train(net, (X, T), TrainConfig(0.5, 5_000, projection=nonneg), probe=TRIPLE)
print(f"nonneg 2-32-32-1: min triple error over {len(rep.probe_trace)} epochs = {min(rep.probe_trace):.6f}")
print("  outputs", np.round(forward_batch(plus, X)[:, 0], 4))

# Flip the largest output weight and keep only that one non-positive.
last = len(plus.layers) - 1
col = int(np.argmax(plus.layers[last].weights[0]))
flipped = flip_weight(plus, last, 0, col)
mask = SignConstraint.single_flip(flipped, last, 0, col)
repaired, rep = train(flipped, (X, T), TrainConfig(0.5, 5_000, projection=mask))
print(f"after flipping output weight {col}: max corner error {rep.final_max_error:.2e}")
