"""Decision boundaries of the bundled two-input networks.

For an order-preserving network every boundary segment has a normal with
two non-negative components (it runs from upper-left to lower-right). A
single negative input weight can produce segments of positive slope, or a
bounded region. Segment files are written to ``boundaries_out/`` for any
plotting tool.
"""
from pathlib import Path

from signnet.fixtures import THRESHOLDS, load_fixture
from signnet.geometry import classify_segment_orientations, rasterize_boundary, write_segments_csv
from signnet.order import certify_structural

out = Path("boundaries_out")
out.mkdir(exist_ok=True)
for name, t in sorted(THRESHOLDS.items()):
    net = load_fixture(name)
    segs = rasterize_boundary(net, resolution=128, threshold=t)
    counts = classify_segment_orientations(segs)
    write_segments_csv(segs, out / f"{name}.csv")
    cert = "certified" if certify_structural(net).certified else "has negative weights"
    print(f"{name:20s} t={t:<5} {cert:22s} segments={len(segs):4d} "
          f"neg={counts['neg_slope_count']:4d} pos={counts['pos_slope_count']:4d} axis={counts['axis_count']}")
