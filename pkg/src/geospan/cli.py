"""Command-line entry point.

Subcommands: sample, graph, embed, verify, sweep, witness, oracle-check.
Every command is deterministic given explicit flags; timing columns are
zeroed unless --timings is passed, so identical invocations produce
byte-identical files and stdout.

Exit codes: 0 success/pass, 1 algorithmic failure (embed failed, verification
failed, witness inconclusive under --require-certificate, oracle
contradiction), 2 usage or file-format error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from . import __version__
from .embedder import (
    PreconditionError, build_params, embed, load_embedding, save_embedding,
    threshold_radius, verify_embedding,
)
from .experiments import (
    SweepConfig, diameter_witness, micro_soundness, run_sweep,
    write_summary_json, write_sweep_csv,
)
from .pointcloud import build_graph, load_points, sample_uniform, save_points
from .trees import DegreeSequence, FormatError, build_tree, load_degree_sequence


def _parse_p(value: str) -> float:
    if value.lower() in ("inf", "infinity"):
        return math.inf
    try:
        p = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad metric exponent {value!r}") from None
    if p < 1:
        raise argparse.ArgumentTypeError("metric exponent must be >= 1")
    return p


def _parse_mults(value: str) -> tuple[float, ...]:
    try:
        mults = tuple(float(x) for x in value.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad multiplier list {value!r}") from None
    if not mults or any(m <= 0 for m in mults):
        raise argparse.ArgumentTypeError("multipliers must be positive")
    return tuple(sorted(mults))


def _add_tree_flags(cmd: argparse.ArgumentParser) -> None:
    cmd.add_argument("--sary", type=int, help="uniform child count per layer")
    cmd.add_argument("--height", type=int, help="tree height (with --sary)")
    cmd.add_argument("--seq", help="degree-sequence file ('h M' header, one entry per line)")


def _resolve_seq(args: argparse.Namespace) -> DegreeSequence:
    if args.seq is not None:
        if args.sary is not None:
            raise SystemExit2("use either --seq or --sary, not both")
        return load_degree_sequence(args.seq)
    if args.sary is None or args.height is None:
        raise SystemExit2("need --sary with --height, or --seq FILE")
    return DegreeSequence.uniform(args.sary, args.height)


class SystemExit2(Exception):
    """Usage error detected after argparse."""


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="geospan",
        description="Balanced spanning trees in unit-cube radius graphs: "
                    "embedding, certificates, threshold sweeps.",
        epilog="Practical mode relaxes the cube-diameter constant by --relax "
               "and downgrades the asymptotic budget inequalities to warnings; "
               "produced embeddings are always re-certified by the verifier.",
    )
    top.add_argument("--version", action="version", version=f"geospan {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    cmd = sub.add_parser("sample", help="write a seeded uniform point set")
    cmd.add_argument("--n", type=int, required=True)
    cmd.add_argument("--d", type=int, required=True)
    cmd.add_argument("--seed", type=int, required=True)
    cmd.add_argument("--out", required=True)

    cmd = sub.add_parser("graph", help="edge count and degree stats of a radius graph")
    cmd.add_argument("--points", required=True)
    cmd.add_argument("--r", type=float, required=True)
    cmd.add_argument("--p", type=_parse_p, default=2.0)

    cmd = sub.add_parser("embed", help="embed a balanced tree into a radius graph")
    cmd.add_argument("--d", type=int, required=True)
    _add_tree_flags(cmd)
    cmd.add_argument("--eps", type=float, help="radius slack; r = (1+eps) * r_threshold")
    cmd.add_argument("--r-mult", type=float, dest="r_mult",
                     help="override r = r_mult * r_threshold (eps defaults to r_mult - 1)")
    cmd.add_argument("--p", type=_parse_p, default=2.0)
    cmd.add_argument("--mode", choices=("strict", "practical"), default="practical")
    cmd.add_argument("--relax", type=float, default=4.0,
                     help="practical-mode cube-diameter relaxation (default 4)")
    cmd.add_argument("--seed", type=int, help="sample |T| points from this seed")
    cmd.add_argument("--points", help="use points from a file instead of sampling")
    cmd.add_argument("--out", default="embedding.txt")

    cmd = sub.add_parser("verify", help="independently re-check an embedding file")
    cmd.add_argument("--points", required=True)
    cmd.add_argument("--embedding", required=True)
    _add_tree_flags(cmd)
    cmd.add_argument("--p", type=_parse_p, default=2.0)

    cmd = sub.add_parser("witness", help="below-threshold non-containment certificate")
    cmd.add_argument("--d", type=int, required=True)
    _add_tree_flags(cmd)
    cmd.add_argument("--r-mult", type=float, dest="r_mult", required=True)
    cmd.add_argument("--p", type=_parse_p, default=2.0)
    cmd.add_argument("--seed", type=int, required=True)
    cmd.add_argument("--require-certificate", action="store_true",
                     help="exit 1 when the witness is inconclusive")

    cmd = sub.add_parser("sweep", help="Monte Carlo radius sweep around the threshold")
    cmd.add_argument("--d", type=int, required=True)
    _add_tree_flags(cmd)
    cmd.add_argument("--r-mults", type=_parse_mults, dest="r_mults", required=True,
                     help="comma-separated radius multipliers")
    cmd.add_argument("--trials", type=int, required=True)
    cmd.add_argument("--seed", type=int, required=True)
    cmd.add_argument("--p", type=_parse_p, default=2.0)
    cmd.add_argument("--mode", choices=("strict", "practical"), default="practical")
    cmd.add_argument("--relax", type=float, default=4.0)
    cmd.add_argument("--out", required=True, help="output prefix: writes PREFIX.csv and PREFIX.json")
    cmd.add_argument("--workers", type=int, default=None,
                     help="worker processes (default: env GEOSPAN_WORKERS or 1)")
    cmd.add_argument("--timings", action="store_true",
                     help="record real runtimes in the CSV (breaks byte-determinism)")

    cmd = sub.add_parser("oracle-check", help="cross-check embed and witness against the exact oracle")
    cmd.add_argument("--trials", type=int, default=100)
    cmd.add_argument("--seed", type=int, default=0)

    return top


def _cmd_sample(args: argparse.Namespace) -> int:
    ps = sample_uniform(args.n, args.d, args.seed)
    save_points(ps, args.out)
    print(f"wrote {ps.n} points in dimension {ps.dim} to {args.out}")
    return 0


def _cmd_graph(args: argparse.Namespace) -> int:
    ps = load_points(args.points)
    g = build_graph(ps, args.r, args.p)
    degs = g.degrees()
    edges = int(degs.sum() // 2)
    print(f"n: {ps.n}")
    print(f"edges: {edges}")
    print(f"degree_min: {int(degs.min())}")
    print(f"degree_mean: {2 * edges / ps.n:.17g}")
    print(f"degree_max: {int(degs.max())}")
    return 0


def _cmd_embed(args: argparse.Namespace) -> int:
    seq = _resolve_seq(args)
    tree = build_tree(seq)
    if args.eps is None and args.r_mult is None:
        raise SystemExit2("need --eps or --r-mult")
    eps = args.eps if args.eps is not None else args.r_mult - 1.0
    try:
        r_thr = threshold_radius(args.d, seq.height, args.p)
        params = build_params(
            seq, args.d, eps=eps, p=args.p, mode=args.mode, relax=args.relax,
            r=None if args.r_mult is None else args.r_mult * r_thr,
        )
    except ValueError as exc:
        raise SystemExit2(str(exc)) from None
    if args.points is not None:
        ps = load_points(args.points)
        if ps.n != tree.size or ps.dim != args.d:
            raise SystemExit2(
                f"point file has {ps.n} points in dimension {ps.dim}; "
                f"tree needs {tree.size} in dimension {args.d}")
    elif args.seed is not None:
        ps = sample_uniform(tree.size, args.d, args.seed)
    else:
        raise SystemExit2("need --seed or --points")
    try:
        embedding, report = embed(tree, ps, params)
    except PreconditionError as exc:
        print(f"strict-mode preconditions failed: {exc}", file=sys.stderr)
        return 1
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"n: {report.n}")
    print(f"mode: {report.mode}")
    print(f"prefix_layers: {report.prefix_layers}")
    print(f"depth: {report.depth}")
    print(f"m_steps: {report.m_steps}")
    if not report.success:
        where = "" if report.failure_cube is None else f" cube {report.failure_cube}:"
        print(f"embed failed at {report.failure_stage}:{where} {report.failure_detail}")
        return 1
    save_embedding(tree, embedding, params.r, args.out)
    print(f"max_edge: {report.max_edge:.17g}")
    print(f"verified: {'true' if report.verified else 'false'}")
    print(f"wrote: {args.out}")
    return 0 if report.verified else 1


def _cmd_verify(args: argparse.Namespace) -> int:
    seq = _resolve_seq(args)
    tree = build_tree(seq)
    ps = load_points(args.points)
    r, emb = load_embedding(args.embedding, tree)
    result = verify_embedding(tree, ps, emb, r, args.p)
    if math.isnan(result.max_edge):
        print(f"verified: false ({result.reason})")
        return 1
    print(f"max_edge: {result.max_edge:.17g}")
    print(f"verified: {'true' if result.ok else 'false'}")
    return 0 if result.ok else 1


def _cmd_witness(args: argparse.Namespace) -> int:
    seq = _resolve_seq(args)
    tree = build_tree(seq)
    r_thr = threshold_radius(args.d, seq.height, args.p)
    ps = sample_uniform(tree.size, args.d, args.seed)
    g = build_graph(ps, args.r_mult * r_thr, args.p)
    wit = diameter_witness(g, seq.height)
    print(f"certified_absent: {'true' if wit.certified else 'false'}")
    print(f"corner_pair: {wit.u} {wit.v}")
    print(f"corner_distance: {wit.corner_distance:.17g}")
    hops = "unreachable" if wit.required_hops is None and wit.method == "bfs" else wit.required_hops
    print(f"required_hops: {hops} (diameter bound {2 * seq.height})")
    print(f"method: {wit.method}")
    if not wit.certified and args.require_certificate:
        return 1
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    seq = _resolve_seq(args)
    workers = args.workers
    if workers is None:
        workers = int(os.environ.get("GEOSPAN_WORKERS", "1"))
    cfg = SweepConfig(
        d=args.d, seq=seq, p=args.p, multipliers=args.r_mults, trials=args.trials,
        base_seed=args.seed, mode=args.mode, relax=args.relax,
        workers=max(1, workers), record_timings=args.timings,
    )
    result = run_sweep(cfg)
    csv_path = f"{args.out}.csv"
    json_path = f"{args.out}.json"
    write_sweep_csv(result, csv_path, timings=args.timings)
    write_summary_json(result, json_path)
    for mult, freq in result.frequencies():
        print(f"r_mult {mult:g}: success frequency {freq:.17g}")
    print(f"wrote: {csv_path} {json_path}")
    return 0


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    res = micro_soundness(args.trials, args.seed)
    print(f"trials: {res.trials}")
    print(f"embed_successes: {res.embed_successes}")
    print(f"witness_certificates: {res.witness_certificates}")
    print(f"contradictions: {len(res.contradictions)}")
    for c in res.contradictions:
        print(f"  {c}")
    return 0 if not res.contradictions else 1


_COMMANDS = {
    "sample": _cmd_sample,
    "graph": _cmd_graph,
    "embed": _cmd_embed,
    "verify": _cmd_verify,
    "witness": _cmd_witness,
    "sweep": _cmd_sweep,
    "oracle-check": _cmd_oracle_check,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help/--version
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
