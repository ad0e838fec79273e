"""Command-line driver: ``signnet <subcommand> [options]``.

Every run writes ``manifest.json`` into ``--out-dir`` with the fully resolved
configuration. Exit codes: 0 ok or certified, 1 usage or parse error,
2 falsified or a failed check, 3 inconclusive.

``--json-config FILE`` supplies option defaults for the chosen subcommand
(keys are option names with ``-`` or ``_``); explicit flags still win.
``SIGNNET_WORKERS`` sets the number of threads used for seed sweeps.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .core import ShapeError, make_rng
from .fixtures import FIXTURES, THRESHOLDS, load_fixture
from .geometry import (
    classify_segment_orientations,
    grid_upper_set_violation,
    grid_values,
    rasterize_boundary,
    write_grid_csv,
    write_segments_csv,
)
from .network import (
    ModelFormatError,
    SignConstraint,
    flip_weight,
    forward_batch,
    init_random,
    load,
    parse_arch,
    random_network,
    save,
)
from .order import certify_structural, falsify_monotone
from .rewrite import TOLERANCES, RewriteError, fuzz_equivalence, lower_convolutions, skip_to_mlp
from .tasks import BoxDomain, TaskSpec, check_witness, witness_closed, witness_disconnected, witness_orientation
from .training import DivergenceError, TrainConfig, train

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_USAGE", "EXIT_FAILED", "EXIT_INCONCLUSIVE"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2
EXIT_INCONCLUSIVE = 3

XOR_FLOOR = 0.5
FLOOR_SLACK = 1e-9
WORKERS_ENV = "SIGNNET_WORKERS"

XOR_X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
XOR_T = np.array([[0.0], [1.0], [1.0], [0.0]])
# (0,0) ⪯ (1,0) ⪯ (1,1) with targets 0, 1, 0
TRIPLE_X = XOR_X[[0, 1, 3]]
TRIPLE_T = XOR_T[[0, 1, 3]]


class UsageError(Exception):
    """Bad arguments or unreadable input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise UsageError(f"{WORKERS_ENV} must be an integer") from None


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def _load_model(spec):
    """A model file path, or the name of a bundled fixture."""
    path = Path(spec)
    if path.exists():
        try:
            return load(path)
        except (ModelFormatError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot read model {spec}: {exc}") from None
    name = path.name.removesuffix(".json")
    if name in FIXTURES and path.parent == Path("."):
        return load_fixture(name)
    raise UsageError(f"no such model file or fixture: {spec}")


def _domain(args, dim):
    lo, hi = args.domain
    if not lo < hi:
        raise UsageError(f"empty domain [{lo}, {hi}]")
    return BoxDomain(np.full(dim, lo), np.full(dim, hi))


# --- subcommands -----------------------------------------------------------


def cmd_certify(args, out):
    net = _load_model(args.model)
    domain = _domain(args, net.input_dim)
    structural = certify_structural(net)
    empirical = falsify_monotone(net, domain, args.trials, rng=args.seed)
    result = {
        "model": args.model,
        "structural": structural.to_json(),
        "empirical": empirical.to_json(),
        "trials": args.trials,
    }
    if empirical.falsified:
        result["verdict"], code = empirical.verdict, EXIT_FAILED
    elif structural.certified:
        result["verdict"], code = structural.verdict, EXIT_OK
    else:
        result["verdict"], code = empirical.verdict, EXIT_INCONCLUSIVE
    _write_json(out / "certificate.json", result)
    print(json.dumps(result))
    return code


def _xor_seed(args, seed, constraint):
    sizes = parse_arch(args.arch)
    if sizes[0] != 2 or sizes[-1] != 1:
        raise UsageError(f"xor-gap needs a 2-...-1 architecture, got {args.arch}")
    net = init_random(sizes, args.activation, constraint, rng=seed, final_activation=False)
    cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs, seed=seed, projection=constraint)
    try:
        trained, report = train(net, (XOR_X, XOR_T), cfg, probe=(TRIPLE_X, TRIPLE_T))
    except DivergenceError as exc:
        return {"seed": seed, "diverged": str(exc)}, None
    corner = float(np.max(np.abs(forward_batch(trained, XOR_X) - XOR_T)))
    triple = report.probe_trace
    row = {
        "seed": seed,
        "final_corner_error": corner,
        "final_triple_error": triple[-1] if triple else None,
        "min_triple_error": min(triple) if triple else None,
        "final_loss": report.loss_trace[-1] if report.loss_trace else None,
        "wall_clock": report.wall_clock,
    }
    return row, (trained, report)


def _flip_repair(args, net, seed):
    """Negate one output weight of a non-negative net and retrain under a single-flip mask."""
    last = len(net.layers) - 1
    w = net.layers[last].weights[0]
    attempts = []
    for col in np.argsort(-w, kind="stable")[: args.flip_candidates]:
        col = int(col)
        if w[col] <= 0.0:
            break
        flipped = flip_weight(net, last, 0, col)
        cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs, seed=seed,
                          projection=SignConstraint.single_flip(flipped, last, 0, col))
        try:
            repaired, report = train(flipped, (XOR_X, XOR_T), cfg)
        except DivergenceError as exc:
            attempts.append({"weight": [last, 0, col], "diverged": str(exc)})
            continue
        attempts.append({"weight": [last, 0, col], "corner_error": report.final_max_error})
        if report.final_max_error < args.repair_target:
            return attempts, repaired
    return attempts, None


def cmd_xor_gap(args, out):
    try:
        parse_arch(args.arch)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    constraint = SignConstraint(args.constraint)
    seeds = [args.seed + k for k in range(args.seeds)]
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        runs = list(pool.map(lambda s: _xor_seed(args, s, constraint), seeds))
    rows = []
    floor_ok = True
    for (row, result), seed in zip(runs, seeds):
        if result is not None:
            trained, report = result
            save(trained, out / f"seed_{seed}_model.json")
            with open(out / f"seed_{seed}_triple.csv", "w") as fh:
                fh.write("epoch,triple_error\n")
                fh.writelines(f"{e},{v!r}\n" for e, v in enumerate(report.probe_trace))
            if args.constraint == "nonneg":
                row["floor_holds"] = bool(min(report.probe_trace, default=XOR_FLOOR) >= XOR_FLOOR - FLOOR_SLACK)
                floor_ok &= row["floor_holds"]
        rows.append(row)
    done = [r for r in rows if "final_corner_error" in r]
    summary = {
        "constraint": args.constraint,
        "arch": args.arch,
        "activation": args.activation,
        "seeds": rows,
        "best_corner_error": min((r["final_corner_error"] for r in done), default=None),
        "diverged": sum("diverged" in r for r in rows),
    }
    if args.constraint == "nonneg":
        summary["floor"] = XOR_FLOOR
        summary["floor_holds"] = floor_ok
    if args.flip_repair:
        if args.constraint != "nonneg" or not done:
            raise UsageError("--flip-repair needs --constraint nonneg and at least one finished seed")
        best = min(done, key=lambda r: r["final_corner_error"])["seed"]
        net = load(out / f"seed_{best}_model.json")
        attempts, repaired = _flip_repair(args, net, best)
        summary["flip_repair"] = {"seed": best, "attempts": attempts, "solved": repaired is not None}
        if repaired is not None:
            save(repaired, out / "flip_repaired_model.json")
    _write_json(out / "xor_gap.json", summary)
    print(json.dumps({k: v for k, v in summary.items() if k != "seeds"}))
    failed = (args.constraint == "nonneg" and not floor_ok) or (
        args.flip_repair and not summary["flip_repair"]["solved"])
    return EXIT_FAILED if failed else EXIT_OK


def cmd_boundary(args, out):
    net = _load_model(args.model)
    if net.input_dim != 2 or net.output_dim != 1:
        raise UsageError(f"boundary needs a 2-input scalar model, got {net.input_dim} -> {net.output_dim}")
    if args.resolution < 16:
        raise UsageError(f"resolution must be at least 16, got {args.resolution}")
    domain = _domain(args, 2)
    thresholds = args.thresholds
    if thresholds is None:
        thresholds = [THRESHOLDS.get(Path(args.model).name.removesuffix(".json"), 0.5)]
    gx, gy, values = grid_values(net, domain, args.resolution)
    write_grid_csv(gx, gy, values, out / "grid.csv")
    report = []
    for k, t in enumerate(thresholds):
        segs = rasterize_boundary(net, domain, args.resolution, t)
        write_segments_csv(segs, out / f"segments_{k}.csv")
        counts = classify_segment_orientations(segs)
        violation = grid_upper_set_violation(values, t)
        report.append({"threshold": t, "segments_file": f"segments_{k}.csv", "segment_count": len(segs),
                       **counts, "grid_upper_set_violation": violation})
    result = {"model": args.model, "resolution": args.resolution,
              "certified": certify_structural(net).certified, "thresholds": report}
    _write_json(out / "orientation.json", result)
    print(json.dumps(result))
    return EXIT_OK


def _witness_triple(args):
    if args.corollary == "orientation":
        a = np.array(args.normal, dtype=float)
        return witness_orientation(a, args.offset, args.point or [0.5, 0.5], eps=args.eps,
                                   i=args.i, j=args.j), None
    if args.corollary == "closed":
        task = TaskSpec.disk(tuple(args.center), args.radius)
        return witness_closed(task, args.point or args.center, eps=args.eps), task
    task = TaskSpec.quadrants(tuple(args.thresholds))
    return witness_disconnected(task, args.a, args.b, eps=args.eps), task


def cmd_witness(args, out):
    try:
        triple, task = _witness_triple(args)
    except (ValueError, ShapeError) as exc:
        raise UsageError(str(exc)) from None
    if args.model:
        net = _load_model(args.model)
    else:
        net = random_network(make_rng(args.seed), input_dim=2, nonneg=True)
    cert = certify_structural(net)
    check = check_witness(net, triple, task)
    result = {"corollary": args.corollary, "witness": triple.to_json(),
              "certified": cert.certified, "check": check.to_json()}
    _write_json(out / "witness.json", result)
    print(json.dumps(result))
    # a certified network that escapes would contradict order preservation
    return EXIT_FAILED if cert.certified and check.verdict != "contradiction_demonstrated" else EXIT_OK


def cmd_rewrite(args, out):
    net = _load_model(args.input)
    domain = _domain(args, net.input_dim)
    try:
        if args.pass_name == "conv2dense":
            new = lower_convolutions(net)
        else:
            new = skip_to_mlp(net, input_lower=domain.lower)
    except RewriteError as exc:
        raise UsageError(str(exc)) from None
    report = fuzz_equivalence(net, new, domain, args.fuzz, rng=args.seed, pass_name=args.pass_name,
                              tolerance=TOLERANCES[args.pass_name])
    save(new, args.output)
    result = report.to_json()
    result["certified_before"] = certify_structural(net).certified
    result["certified_after"] = certify_structural(new).certified
    _write_json(out / "rewrite_report.json", result)
    print(json.dumps(result))
    signs_ok = result["certified_after"] or not result["certified_before"]
    return EXIT_OK if report.ok and signs_ok else EXIT_FAILED


def _task_data(args, rng):
    if args.task == "xor":
        return XOR_X, XOR_T
    if args.task == "disk":
        task = TaskSpec.disk()
    elif args.task == "quadrants":
        task = TaskSpec.quadrants()
    else:
        task = TaskSpec.halfplane([1.0, 1.0], -1.0)
    xs = task.domain.sample(args.samples, rng)
    return xs, task.labels(xs).astype(np.float64)[:, None]


def cmd_train(args, out):
    constraint = SignConstraint(args.constraint)
    if args.model:
        net = _load_model(args.model)
    else:
        try:
            sizes = parse_arch(args.arch)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        net = init_random(sizes, args.activation, constraint, rng=args.seed, final_activation=False)
    data_rng, _ = make_rng(args.seed).spawn(2)
    xs, ts = _task_data(args, data_rng)
    if net.input_dim != xs.shape[1] or net.output_dim != 1:
        raise UsageError(f"model shape {net.input_dim} -> {net.output_dim} does not fit the {args.task} task")
    cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch=args.batch, loss=args.loss,
                      seed=args.seed, projection=constraint)
    try:
        trained, report = train(net, (xs, ts), cfg)
    except DivergenceError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAILED
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save(trained, out / "model.json")
    report.write_json(out / "train_report.json")
    report.write_loss_csv(out / "loss.csv")
    print(json.dumps({"final_loss": report.loss_trace[-1] if report.loss_trace else None,
                      "final_max_error": report.final_max_error}))
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser():
    def global_flags(p, suppress):
        # Repeated on each subcommand so they may follow it; there they must not
        # overwrite values given before the subcommand.
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        p.add_argument("--seed", type=int, default=d(0))
        p.add_argument("--out-dir", default=d("signnet_out"))
        p.add_argument("--json-config", default=d(None), help="JSON file of option defaults")
        return p

    common = global_flags(_Parser(add_help=False), suppress=True)
    parser = global_flags(
        _Parser(prog="signnet", description="Sign-constrained networks: certification, training, geometry."),
        suppress=False,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, parents=[common])
        p.set_defaults(func=func)
        return p

    p = add("certify", cmd_certify, "structural and sampled monotonicity check")
    p.add_argument("--model", required=True, help="model JSON path or bundled fixture name")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--domain", type=float, nargs=2, default=[0.0, 1.0], metavar=("LO", "HI"))

    p = add("xor-gap", cmd_xor_gap, "train on XOR and measure the corner-triple error")
    p.add_argument("--constraint", choices=["free", "nonneg"], default="nonneg")
    p.add_argument("--arch", default="2-32-32-1")
    p.add_argument("--activation", default="sigmoid",
                   choices=["relu", "leaky_relu", "sigmoid", "tanh"])
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--epochs", type=int, default=20_000)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--flip-repair", action="store_true",
                   help="flip one output weight of the best net and retrain under that sign pattern")
    p.add_argument("--flip-candidates", type=int, default=4)
    p.add_argument("--repair-target", type=float, default=0.1)

    p = add("boundary", cmd_boundary, "rasterize decision boundaries and classify their orientation")
    p.add_argument("--model", required=True)
    p.add_argument("--resolution", type=int, default=128)
    p.add_argument("--thresholds", type=float, nargs="+", default=None)
    p.add_argument("--domain", type=float, nargs=2, default=[0.0, 1.0], metavar=("LO", "HI"))

    p = add("witness", cmd_witness, "build a witness triple and evaluate a network on it")
    p.add_argument("--corollary", choices=["orientation", "closed", "disconnected"], required=True)
    p.add_argument("--model", default=None, help="defaults to a random non-negative network")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--normal", type=float, nargs=2, default=[1.0, -1.0])
    p.add_argument("--offset", type=float, default=0.0)
    p.add_argument("--point", type=float, nargs=2, default=None)
    p.add_argument("--i", type=int, default=0)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--center", type=float, nargs=2, default=[0.5, 0.5])
    p.add_argument("--radius", type=float, default=0.2)
    p.add_argument("--thresholds", type=float, nargs=2, default=[0.5, 0.5])
    p.add_argument("--a", type=float, nargs=2, default=[0.25, 0.75])
    p.add_argument("--b", type=float, nargs=2, default=[0.75, 0.25])

    p = add("rewrite", cmd_rewrite, "lower convolutions or skip links and fuzz the result")
    p.add_argument("--pass", dest="pass_name", choices=sorted(TOLERANCES), required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--fuzz", type=int, default=200)
    p.add_argument("--domain", type=float, nargs=2, default=[0.0, 1.0], metavar=("LO", "HI"))

    p = add("train", cmd_train, "projected gradient descent on a planar task")
    p.add_argument("--model", default=None)
    p.add_argument("--arch", default="2-8-8-1")
    p.add_argument("--activation", default="sigmoid", choices=["relu", "leaky_relu", "sigmoid", "tanh"])
    p.add_argument("--task", choices=["xor", "disk", "quadrants", "halfplane"], default="xor")
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--constraint", choices=["free", "nonneg"], default="free")
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--loss", choices=["mse", "bce"], default="mse")
    return parser


def _apply_json_config(parser, argv):
    args = parser.parse_args(argv)
    if not args.json_config:
        return args
    try:
        with open(args.json_config) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.json_config}: {exc}") from None
    if not isinstance(config, dict):
        raise UsageError("config file must hold a JSON object")
    config = {k.replace("-", "_"): v for k, v in config.items()}
    config.pop("command", None)
    known = vars(args)
    unknown = sorted(set(config) - set(known))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    subparser.set_defaults(**config)
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _apply_json_config(parser, argv)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        config = {k: v for k, v in vars(args).items() if k != "func"}
        start = time.perf_counter()
        code = args.func(args, out)
        _write_json(out / "manifest.json", {
            "signnet_version": __version__,
            "argv": argv,
            "config": config,
            "exit_code": code,
            "wall_clock": time.perf_counter() - start,
        })
        return code
    except UsageError as exc:
        print(f"signnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
