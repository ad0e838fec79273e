"""Three-point chains that no order-preserving classifier can label.

Each constructor returns points P0 ⪯ P1 ⪯ P2 whose labels read (c, c', c).
Evaluated on a random non-negative network, the outputs come out
non-decreasing along the chain, so at least one label is missed.
"""
import numpy as np

from signnet import TaskSpec, check_witness, random_network, witness_closed, witness_disconnected, witness_orientation

net = random_network(np.random.Generator(np.random.Philox(3)), nonneg=True, activation="sigmoid")

cases = [
    ("boundary of positive slope", witness_orientation([1.0, -1.0], 0.0, [0.5, 0.5], eps=0.1), None),
]
disk = TaskSpec.disk((0.5, 0.5), 0.2)
cases.append(("disk inside the square", witness_closed(disk, [0.5, 0.55], eps=0.05), disk))
quads = TaskSpec.quadrants((0.5, 0.5))
cases.append(("opposite quadrants, comparable", witness_disconnected(quads, [0.25, 0.25], [0.75, 0.75]), quads))
cases.append(("opposite quadrants, incomparable", witness_disconnected(quads, [0.25, 0.75], [0.75, 0.25]), quads))

for title, w, task in cases:
    res = check_witness(net, w, task)
    pts = ", ".join(f"{n}=({p[0]:.3f}, {p[1]:.3f})" for n, p in zip(w.names, w.points))
    print(f"{title}: {pts}")
    print(f"  labels {w.labels}, outputs {np.round(res.outputs, 4)}, {res.verdict}, worst miss {res.max_error:.3f}")
