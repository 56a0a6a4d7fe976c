"""``calibgraph`` command-line tool.

Subcommands: handeye, jackknife, optimize, validate, synth, report.
Options may also come from ``--config file.json`` (keys are option names,
dashes or underscores); explicit flags win over the file.

Exit codes: 0 success, 1 invalid synth spec, 2 parse/config error,
3 degenerate motion, 4 I/O error, 5 disconnected graph, 6 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import warnings

import numpy as np

from . import fileio, graph as graphmod, handeye, resample, synth, validate
from .errors import (
    BranchError,
    ConnectivityError,
    DegenerateMotionError,
    EstimatorError,
    InvalidArgumentError,
    NumericalError,
    ParseError,
)
from .lie import Pose
from .report import RunReport

logger = logging.getLogger("calibgraph")

EXIT_OK = 0
EXIT_INVALID_SPEC = 1
EXIT_PARSE = 2
EXIT_DEGENERATE = 3
EXIT_IO = 4
EXIT_DISCONNECTED = 5
EXIT_SOLVER = 6


class CommandError(Exception):
    def __init__(self, status, message):
        self.status = status
        super().__init__(message)


# ---------------------------------------------------------------- parsing

def _common(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="JSON", default=default, help="JSON file of option defaults")
    parser.add_argument("--seed", type=int, default=default, help="random seed (u64)")
    parser.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS if suppress else False)
    parser.add_argument("--json", action="store_true", default=argparse.SUPPRESS if suppress else False,
                        help="print the run report as JSON on stdout")
    parser.add_argument("--report", metavar="PATH", default=default, help="also write the run report here")


def _solver_flags(p):
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--lambda0", type=float, default=1e-4)
    p.add_argument("--relative-cost-tolerance", type=float, default=1e-10)
    p.add_argument("--step-tolerance", type=float, default=1e-12)
    p.add_argument("--jacobian", choices=("analytic", "approx", "numeric"), default="analytic")


def _edge_flags(p, kind):
    p.add_argument("--from-id", type=int, default=0, help="node id of the eye / reference frame")
    p.add_argument("--to-id", type=int, default=1, help="node id of the hand / measured frame")
    p.add_argument("--kind", choices=graphmod.EDGE_KINDS, default=kind)
    p.add_argument("--variance-floor", type=float, default=resample.DEFAULT_VARIANCE_FLOOR)


def build_parser():
    parser = argparse.ArgumentParser(prog="calibgraph", description=__doc__.splitlines()[0])
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("handeye", help="solve AX = XB from motion pairs")
    _common(p, suppress=True)
    p.add_argument("motions", nargs="?", help="motion-pair file ('A: ... B: ...' per line)")
    p.add_argument("--eye-poses", help="absolute pose list of the eye frame")
    p.add_argument("--hand-poses", help="absolute pose list of the hand frame")
    p.add_argument("--out-edge", help="write the result as an EDGE_SE3:QUAT record")
    p.add_argument("--jackknife", action="store_true", help="weight the edge by Jackknife variance")
    _edge_flags(p, "handeye")

    p = sub.add_parser("jackknife", help="Jackknife variance of a pairwise estimate")
    _common(p, suppress=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--motions", help="motion-pair file (hand-eye estimator)")
    src.add_argument("--poses", help="absolute pose list of repeated direct measurements (mean estimator)")
    p.add_argument("--out-edge", help="write an EDGE_SE3:QUAT record")
    _edge_flags(p, None)

    p = sub.add_parser("optimize", help="globally refine a calibration graph")
    _common(p, suppress=True)
    p.add_argument("graph_file")
    p.add_argument("out_graph_file")
    p.add_argument("--root", type=int, help="gauge anchor / spanning-tree root (default: lowest id)")
    p.add_argument("--init", choices=("auto", "file", "tree"), default="auto",
                   help="initial poses: from VERTEX records, from a spanning tree, "
                        "or auto (tree when any vertex is undeclared)")
    _solver_flags(p)

    p = sub.add_parser("validate", help="calibration quality metrics")
    _common(p, suppress=True)
    p.add_argument("--graph", help="graph file: report E_global")
    p.add_argument("--normals1", help="plane normals seen by sensor 1, one per line")
    p.add_argument("--normals2", help="matching plane normals seen by sensor 2")
    p.add_argument("--source", help="source points (sensor 2 frame)")
    p.add_argument("--target", help="target points (sensor 1 frame)")
    p.add_argument("--transform", help="calibration under test, 'tx ty tz qx qy qz qw' (default identity)")

    p = sub.add_parser("synth", help="Monte-Carlo noise study on synthetic rigs")
    _common(p, suppress=True)
    p.add_argument("--nodes", type=int, default=4)
    p.add_argument("--topology", default="complete",
                   help="complete, chain, ring, or explicit edges like '0-1,1-2,0-2'")
    p.add_argument("--sigma-trans", type=float, default=0.05)
    p.add_argument("--sigma-rot", type=float, default=0.05)
    p.add_argument("--trials", type=int, default=300)
    p.add_argument("--out", help="per-trial CSV")
    p.add_argument("--summary", help="summary JSON")
    p.add_argument("--graphs-dir", help="dump every optimized graph here")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("report", help="check a run report against the schema and summarize it")
    _common(p, suppress=True)
    p.add_argument("report_file")
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def parse_args(argv):
    """Parse flags, merging ``--config`` values underneath explicit flags."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        raise CommandError(EXIT_IO, f"cannot read config {args.config}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CommandError(EXIT_PARSE, f"{args.config}: line {exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(config, dict):
        raise CommandError(EXIT_PARSE, f"{args.config}: top level must be an object")
    sub = _subparser(parser, args.command)
    known = {a.dest for a in sub._actions if a.dest not in ("help", "config")}
    normalized = {}
    for key, value in config.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise CommandError(EXIT_PARSE, f"{args.config}: unknown option {key!r} for '{args.command}'")
        normalized[dest] = value
    globals_ = ("seed", "quiet", "json", "report")
    sub.set_defaults(**{k: v for k, v in normalized.items() if k not in globals_})
    args = parser.parse_args(argv)
    for dest in globals_:
        if dest in normalized and getattr(args, dest) in (None, False):
            setattr(args, dest, normalized[dest])
    return args


# ---------------------------------------------------------------- helpers

def _require_readable(*paths):
    for path in paths:
        if path is not None and not os.access(path, os.R_OK):
            raise CommandError(EXIT_IO, f"cannot read {path}")


def _require_writable(*paths):
    for path in paths:
        if path is None:
            continue
        parent = os.path.dirname(os.path.abspath(path)) or "."
        if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
            raise CommandError(EXIT_IO, f"cannot write {path}: directory {parent} is not writable")


def _config_echo(args):
    skip = {"command", "config", "quiet", "json", "report"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _solver_options(args):
    try:
        return graphmod.SolverOptions(
            max_iterations=args.max_iterations,
            lambda0=args.lambda0,
            relative_cost_tolerance=args.relative_cost_tolerance,
            step_tolerance=args.step_tolerance,
            jacobian=args.jacobian,
        )
    except InvalidArgumentError as exc:
        raise CommandError(EXIT_PARSE, str(exc)) from None


def _load_pairs(args):
    if args.motions:
        _require_readable(args.motions)
        return fileio.read_motion_pairs(args.motions), {"motions": args.motions}
    if args.eye_poses and args.hand_poses:
        _require_readable(args.eye_poses, args.hand_poses)
        _, eye = fileio.read_pose_list(args.eye_poses)
        _, hand = fileio.read_pose_list(args.hand_poses)
        try:
            pairs = handeye.pair_motions(eye, hand)
        except InvalidArgumentError as exc:
            raise CommandError(EXIT_PARSE, str(exc)) from None
        return pairs, {"eye_poses": args.eye_poses, "hand_poses": args.hand_poses}
    raise CommandError(EXIT_PARSE, "give a motion-pair file or both --eye-poses and --hand-poses")


def _edge_record(args, pose, information):
    return fileio.format_edge(args.from_id, args.to_id, pose, information, args.kind)


def _write(path, text):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CommandError(EXIT_IO, f"cannot write {path}: {exc}") from None


# ---------------------------------------------------------------- commands

def cmd_handeye(args, report):
    _require_writable(args.out_edge)
    pairs, report.inputs = _load_pairs(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = handeye.solve(pairs)
    report.messages.extend(str(w.message) for w in caught)
    report.metrics.update(
        pairs=len(pairs),
        x=[float(v) for v in result.x.to_vector7()],
        rotation_residual_rms=result.rotation_residual_rms,
        translation_residual_rms=result.translation_residual_rms,
        condition_indicator=result.condition_indicator,
    )
    information = np.eye(6)
    if args.jackknife:
        est = _jackknife(resample.handeye_estimator, pairs)
        information = resample.information_from_variance(est, args.variance_floor)
        report.metrics["variance_estimate"] = est.as_dict()
    else:
        report.messages.append("edge information set to identity (use --jackknife to estimate it)")
    record = _edge_record(args, result.x, information)
    report.metrics["edge_record"] = record
    if args.out_edge:
        _write(args.out_edge, record + "\n")
    return [
        f"X = {fileio.format_pose(result.x)}",
        f"rotation residual RMS    {result.rotation_residual_rms:.3e} rad",
        f"translation residual RMS {result.translation_residual_rms:.3e} m",
    ]


def _jackknife(estimator, samples):
    try:
        return resample.jackknife(estimator, samples)
    except EstimatorError as exc:
        if isinstance(exc.cause, DegenerateMotionError):
            raise DegenerateMotionError(str(exc)) from exc
        raise
    except InvalidArgumentError as exc:
        raise DegenerateMotionError(str(exc)) from exc


def cmd_jackknife(args, report):
    _require_writable(args.out_edge)
    if args.motions:
        _require_readable(args.motions)
        samples = fileio.read_motion_pairs(args.motions)
        estimator = resample.handeye_estimator
        report.inputs = {"motions": args.motions}
        kind = args.kind or "handeye"
    elif args.poses:
        _require_readable(args.poses)
        _, samples = fileio.read_pose_list(args.poses)
        estimator = resample.mean_pose_estimator
        report.inputs = {"poses": args.poses}
        kind = args.kind
    else:
        raise CommandError(EXIT_PARSE, "give --motions or --poses")
    est = _jackknife(estimator, samples)
    information = resample.information_from_variance(est, args.variance_floor)
    record = fileio.format_edge(args.from_id, args.to_id, est.reference, information, kind)
    report.metrics["variance_estimate"] = est.as_dict()
    report.metrics["edge_record"] = record
    if args.out_edge:
        _write(args.out_edge, record + "\n")
    return [
        "variance  " + " ".join(f"{v:.3e}" for v in est.variance),
        record,
    ]


def cmd_optimize(args, report):
    _require_readable(args.graph_file)
    _require_writable(args.out_graph_file)
    opts = _solver_options(args)
    report.inputs = {"graph_file": args.graph_file, "out_graph_file": args.out_graph_file}
    with open(args.graph_file, encoding="utf-8") as fh:
        g, undeclared = fileio.parse_graph(fh.read(), path=args.graph_file)
    if not g.edges:
        raise CommandError(EXIT_PARSE, f"{args.graph_file}: graph has no edges")
    g.check_connected()
    root = args.root if args.root is not None else (g.fixed_ids[0] if g.fixed_ids else min(g.nodes))
    if root not in g.nodes:
        raise CommandError(EXIT_PARSE, f"root node {root} is not in the graph")
    use_tree = args.init == "tree" or (args.init == "auto" and undeclared)
    if use_tree:
        fixed = g.fixed_ids
        g = graphmod.spanning_tree_init(g, root)
        if fixed and fixed != [root]:
            report.messages.append("spanning-tree init: only the root is kept fixed")
            g = g.with_fixed([root])
    if not g.fixed_ids:
        msg = f"no FIX record; fixing node {root} as gauge anchor"
        logger.warning(msg)
        report.messages.append(msg)
        g = g.with_fixed([root])

    before = {
        "cost": graphmod.total_cost(g),
        "e_global": validate.global_error(g),
        "by_kind": validate.residual_rms_by_kind(g),
    }
    try:
        opt, rep = graphmod.optimize(g, opts)
    except NumericalError as exc:
        raise CommandError(EXIT_SOLVER, f"solver failure: {exc}") from None
    e_after = validate.global_error(opt)
    report.metrics.update(
        initialization="spanning_tree" if use_tree else "file",
        initial_cost=rep.initial_cost,
        final_cost=rep.final_cost,
        e_global_before=before["e_global"],
        e_global_after=e_after,
        iterations=rep.iterations,
        converged=rep.converged,
        stop_reason=rep.stop_reason,
        cost_trace=[float(c) for c in rep.cost_trace],
        residual_rms_by_kind_before=before["by_kind"],
        residual_rms_by_kind_after=validate.residual_rms_by_kind(opt),
    )
    fileio.write_graph(args.out_graph_file, opt)
    return [
        f"cost      {rep.initial_cost:.6e} -> {rep.final_cost:.6e}",
        f"E_global  {before['e_global']:.6e} -> {e_after:.6e}",
        f"iterations {rep.iterations} ({rep.stop_reason})",
    ]


def cmd_validate(args, report):
    t = fileio.parse_pose_string(args.transform) if args.transform else Pose.identity()
    lines = []
    did = False
    if args.graph:
        _require_readable(args.graph)
        g = fileio.read_graph(args.graph)
        report.inputs["graph"] = args.graph
        report.metrics["e_global"] = validate.global_error(g)
        report.metrics["total_cost"] = graphmod.total_cost(g)
        report.metrics["residual_rms_by_kind"] = validate.residual_rms_by_kind(g)
        lines.append(f"E_global {report.metrics['e_global']:.6e}")
        did = True
    if args.normals1 or args.normals2:
        if not (args.normals1 and args.normals2):
            raise CommandError(EXIT_PARSE, "--normals1 and --normals2 go together")
        _require_readable(args.normals1, args.normals2)
        n1 = fileio.read_vectors(args.normals1)
        n2 = fileio.read_vectors(args.normals2)
        if len(n1) != len(n2) or len(n1) == 0:
            raise CommandError(EXIT_PARSE, f"normal files hold {len(n1)} and {len(n2)} vectors")
        try:
            d = [validate.normal_alignment(a, b, t) for a, b in zip(n1, n2)]
        except InvalidArgumentError as exc:
            raise CommandError(EXIT_PARSE, str(exc)) from None
        report.inputs.update(normals1=args.normals1, normals2=args.normals2)
        report.metrics["normal_alignment"] = d
        report.metrics["normal_alignment_min"] = min(d)
        lines.append("D " + " ".join(f"{v:.12f}" for v in d))
        did = True
    if args.source or args.target:
        if not (args.source and args.target):
            raise CommandError(EXIT_PARSE, "--source and --target go together")
        _require_readable(args.source, args.target)
        try:
            corr = validate.PointCorrespondences(fileio.read_vectors(args.source), fileio.read_vectors(args.target))
        except InvalidArgumentError as exc:
            raise CommandError(EXIT_PARSE, str(exc)) from None
        report.inputs.update(source=args.source, target=args.target)
        report.metrics["point_residual"] = validate.point_residual(corr, t)
        lines.append(f"E_l {report.metrics['point_residual']:.12g}")
        did = True
    if not did:
        raise CommandError(EXIT_PARSE, "nothing to validate: give --graph, --normals1/2 or --source/--target")
    return lines


def _parse_topology(text):
    if text in ("complete", "chain", "ring"):
        return text
    edges = []
    for item in text.split(","):
        a, sep, b = item.strip().partition("-")
        if not sep:
            raise InvalidArgumentError(f"bad topology edge {item!r}; expected 'i-j'")
        edges.append((int(a), int(b)))
    return edges


def cmd_synth(args, report):
    _require_writable(args.out, args.summary)
    if args.graphs_dir and not os.path.isdir(args.graphs_dir):
        try:
            os.makedirs(args.graphs_dir)
        except OSError as exc:
            raise CommandError(EXIT_IO, f"cannot create {args.graphs_dir}: {exc}") from None
    try:
        spec = synth.RigSpec(
            node_count=args.nodes,
            topology=_parse_topology(args.topology),
            noise_sigma=(args.sigma_trans,) * 3 + (args.sigma_rot,) * 3,
            trials=args.trials,
            seed=7 if args.seed is None else args.seed,
        )
    except (InvalidArgumentError, ValueError) as exc:
        raise CommandError(EXIT_INVALID_SPEC, f"invalid spec: {exc}") from None
    results, graphs = synth.run_trials(spec, workers=args.workers, keep_graphs=True)
    summary = synth.summarize(results)
    report.metrics["summary"] = summary
    report.config["seed"] = spec.seed
    if args.out:
        _write(args.out, synth.results_to_csv(results))
    if args.summary:
        _write(args.summary, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if args.graphs_dir:
        for k, g in enumerate(graphs):
            if g is not None:
                fileio.write_graph(os.path.join(args.graphs_dir, f"trial_{k:04d}.g2o"), g)
    lines = [f"trials {summary['trials']} (failed {summary['failed']})"]
    for name in synth.RESULT_FIELDS:
        s = summary.get(name)
        if s:
            lines.append(f"{name:32s} mean {s['mean']:.6e}  var {s['variance']:.6e}")
    return lines


def cmd_report(args, report):
    _require_readable(args.report_file)
    with open(args.report_file, encoding="utf-8") as fh:
        loaded = RunReport.from_json(fh.read())
    report.inputs = {"report_file": args.report_file}
    lines = [f"{loaded.command}: exit {loaded.exit_status}, {loaded.timing['seconds']:.3f} s"]
    for key, value in sorted(loaded.metrics.items()):
        if isinstance(value, (int, float)):
            lines.append(f"  {key:28s} {value}")
    lines.extend(f"  note: {m}" for m in loaded.messages)
    return lines


COMMANDS = {
    "handeye": cmd_handeye,
    "jackknife": cmd_jackknife,
    "optimize": cmd_optimize,
    "validate": cmd_validate,
    "synth": cmd_synth,
    "report": cmd_report,
}


def _status_for(exc):
    if isinstance(exc, CommandError):
        return exc.status
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, DegenerateMotionError):
        return EXIT_DEGENERATE
    if isinstance(exc, ConnectivityError):
        return EXIT_DISCONNECTED
    if isinstance(exc, (NumericalError, BranchError)):
        return EXIT_SOLVER
    if isinstance(exc, OSError):
        return EXIT_IO
    return None


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except CommandError as exc:
        print(f"calibgraph: error: {exc}", file=sys.stderr)
        return exc.status
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="calibgraph: %(levelname)s: %(message)s")
    report = RunReport(command=args.command, config=_config_echo(args))
    start = time.perf_counter()
    try:
        lines = COMMANDS[args.command](args, report)
    except Exception as exc:
        status = _status_for(exc)
        if status is None:
            raise
        print(f"calibgraph: error: {exc}", file=sys.stderr)
        report.exit_status = status
        report.messages.append(str(exc))
        lines = []
    report.timing = {"seconds": time.perf_counter() - start}
    text = report.to_json()
    if args.report:
        try:
            _write(args.report, text + "\n")
        except CommandError as exc:
            print(f"calibgraph: error: {exc}", file=sys.stderr)
            return exc.status
    if args.json:
        print(text)
    elif not args.quiet:
        for line in lines:
            print(line)
    return report.exit_status


if __name__ == "__main__":
    sys.exit(main())
