"""Sign-constrained feedforward networks.

Networks with non-negative weights are order-preserving. This package builds
such networks, certifies and falsifies monotonicity, trains under sign
constraints, extracts planar decision boundaries, constructs the point
triples that no monotone classifier can label correctly, and rewrites
convolutional and residual networks into plain MLPs.
"""

__version__ = "0.1.0"

from .core import ShapeError, make_rng, matvec, matvec_batch, split_rng
from .network import (
    Activation,
    ConvLayer,
    DenseLayer,
    ModelFormatError,
    Network,
    PoolLayer,
    SignConstraint,
    SkipLink,
    conv2d,
    flip_weight,
    forward,
    forward_batch,
    init_random,
    load,
    maxpool,
    parse_arch,
    random_network,
    satisfies_constraint,
    save,
)
from .order import (
    Certificate,
    OrderPair,
    certify_structural,
    falsify_monotone,
    is_upper_set_violation,
    leq,
    sample_order_pairs,
)
from .training import DivergenceError, TrainConfig, TrainReport, backprop, project, train
from .tasks import (
    BoxDomain,
    TaskSpec,
    WitnessTriple,
    check_witness,
    witness_closed,
    witness_disconnected,
    witness_orientation,
)
from .geometry import BoundarySegment, classify_segment_orientations, rasterize_boundary
from .rewrite import RewriteError, RewriteReport, conv_to_dense, fuzz_equivalence, skip_to_mlp
