"""Hand-built networks for the sign-flip demonstrations.

Each demonstration comes as a ``*_base`` network with non-negative weights and a
``*_flipped`` network obtained from it by negating specific weights with
:func:`~signnet.network.flip_weight`:

* ``fig1a``: two sigmoid hidden units. Flipping one input weight turns a
  boundary that depends only on ``x1 + x2`` into a wedge with one edge of
  positive slope (threshold 1.5).
* ``fig1b``: four relu units measuring how far a point lies outside each
  edge of a diamond around (0.5, 0.5). With one flipped input weight in each
  of the two middle units and both flipped in the last, the sublevel set
  ``F < 0.05`` is the closed diamond.
* ``fig1c`` (``xor_fig1c``): three relu units ``x1``, ``x2`` and
  ``x1 + x2 - 1``. Output weights ``(1, 1, -2)`` compute XOR exactly on the
  corners; with ``+2`` instead the network is non-negative.

Run ``python -m signnet.fixtures DIR`` to regenerate the bundled JSON files.
"""
from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .network import DenseLayer, Network, flip_weight, init_random, load, save, SignConstraint

__all__ = ["FIXTURES", "THRESHOLDS", "build", "load_fixture", "write_fixtures", "FIG1C_FLIP"]

# (layer, row, col) of the single negative output weight in the XOR network.
FIG1C_FLIP = (1, 0, 2)

FIG1A_GAIN = 16.0
FIG1B_RADIUS = 0.3


def fig1a_base():
    g = FIG1A_GAIN
    hidden = DenseLayer([[g, g], [g, g]], [0.0, -g], "sigmoid")
    out = DenseLayer([[1.0, 1.0]], [0.0], "identity")
    return Network(2, [hidden, out])


def fig1a_flipped():
    return flip_weight(fig1a_base(), 0, 0, 1)


def fig1b_base():
    r = FIG1B_RADIUS
    hidden = DenseLayer(
        [[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]],
        [-1.0 - r, -r, -r, 1.0 - r],
        "relu",
    )
    out = DenseLayer([[1.0, 1.0, 1.0, 1.0]], [0.0], "relu")
    return Network(2, [hidden, out])


def fig1b_flipped():
    net = fig1b_base()
    for row, col in [(1, 1), (2, 0), (3, 0), (3, 1)]:
        net = flip_weight(net, 0, row, col)
    return net


def xor_fig1c():
    hidden = DenseLayer([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], [0.0, 0.0, -1.0], "relu")
    out = DenseLayer([[1.0, 1.0, -2.0]], [0.0], "relu")
    return Network(2, [hidden, out])


def xor_fig1c_base():
    return flip_weight(xor_fig1c(), *FIG1C_FLIP)


def linear_antidiagonal():
    return Network(2, [DenseLayer([[1.0, 1.0]], [-1.0], "identity")])


def dnnplus_example():
    return init_random([2, 8, 8, 1], "relu", SignConstraint("nonneg"), rng=0)


FIXTURES = {
    "fig1a_base": fig1a_base,
    "fig1a_flipped": fig1a_flipped,
    "fig1b_base": fig1b_base,
    "fig1b_flipped": fig1b_flipped,
    "xor_fig1c": xor_fig1c,
    "xor_fig1c_base": xor_fig1c_base,
    "linear_antidiagonal": linear_antidiagonal,
    "dnnplus_example": dnnplus_example,
}

# Decision thresholds at which each fixture's boundary is meant to be read.
THRESHOLDS = {
    "fig1a_base": 1.5,
    "fig1a_flipped": 1.5,
    "fig1b_base": 0.05,
    "fig1b_flipped": 0.05,
    "xor_fig1c": 0.5,
    "xor_fig1c_base": 0.5,
    "linear_antidiagonal": 0.0,
}


def build(name):
    return FIXTURES[name]()


def load_fixture(name):
    """Load the bundled JSON copy of a fixture."""
    ref = resources.files("signnet") / "data" / f"{name}.json"
    with resources.as_file(ref) as path:
        return load(path)


def write_fixtures(directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, builder in FIXTURES.items():
        save(builder(), directory / f"{name}.json")
    return sorted(FIXTURES)


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else str(Path(__file__).parent / "data")
    for name in write_fixtures(target):
        print(name)
