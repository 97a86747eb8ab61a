"""Command-line front end.

Every command prints '#'-prefixed header lines (tool version, command,
seed, config hash) followed by CSV rows, or a single JSON object with the
same header under "header". Random streams are derived from ``--seed``:
graph replica r uses stream r and tree Monte Carlo uses stream 1000 + j,
so output is identical for any CORE_MANTLE_THREADS setting.

Exit codes: 0 success, 1 subcritical or analysis error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys

import numpy as np

from . import __version__
from .canon import CYCLIC, forest_codes
from .empirics import TreeLaw, empirical_neighborhoods, mc_tree_law, merge_all, tv_distance
from .fixedpoint import CoreParams, SubcriticalError, density_trajectory, mark_density, solve_p_star, threshold_d_k
from .graph import sample_gnp
from .kcore import peel_core
from .parallel import ordered_map, substream
from .trees import BranchingSpec, five_type_violations
from .wp import TRACE_COLUMNS, wp_density_trace

MAX_N = 2_000_000
MAX_SAMPLES = 2_000_000
MAX_REPLICAS = 100
MAX_DEPTH = 4
MAX_ROUNDS = 1000
TREE_STREAM = 1000

TREE_VARIANTS = ("plain_gw", "two_type_star", "five_type", "top_down", "boundary", "bottom_up")


class AnalysisError(RuntimeError):
    pass


# --------------------------------------------------------------- output


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def render(command: str, config: dict, columns: list[str], rows: list[dict], fmt: str) -> str:
    header = {
        "tool": "core-mantle",
        "version": __version__,
        "command": command,
        "seed": config.get("seed"),
        "config_hash": config_hash(config),
        "config": config,
    }
    if fmt == "json":
        return json.dumps({"header": header, "columns": columns, "rows": rows}, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# core-mantle {__version__}\n")
    buf.write(f"# command: {command}\n")
    buf.write(f"# seed: {header['seed']}\n")
    buf.write(f"# config_hash: {header['config_hash']}\n")
    buf.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def parse_output(text: str) -> tuple[dict, list[dict]]:
    """Read back what :func:`render` wrote (either format).

    CSV cells come back as strings.
    """
    stripped = text.lstrip()
    if stripped.startswith("{"):
        obj = json.loads(stripped)
        return obj["header"], obj["rows"]
    header: dict = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(": ")
            if key == "config":
                header["config"] = json.loads(value)
            elif value:
                header[key] = value
            else:
                header["tool"], _, header["version"] = key.partition(" ")
        elif line.strip():
            body.append(line)
    rows = list(csv.DictReader(body))
    return header, rows


# ------------------------------------------------------------- commands


def cmd_fixed_point(args):
    res = solve_p_star(CoreParams(args.d, args.k), tol=args.tol)
    row = {
        "d": args.d,
        "k": args.k,
        "p_star": res.p_star,
        "q": res.q,
        "q_bar": res.q_bar,
        "psi": res.psi,
        "lambda_k": res.lambda_k,
        "iterations": res.iterations,
        "residual": res.residual,
    }
    return list(row), [row]


def cmd_threshold(args):
    d_k = threshold_d_k(args.k, tol=args.tol)
    row = {"k": args.k, "d_k": d_k}
    return list(row), [row]


def _graph(args, replica):
    return sample_gnp(args.n, args.d / args.n, substream(args.seed, replica))


def cmd_core_stats(args):
    params = CoreParams(args.d, args.k)
    try:
        psi = solve_p_star(params).psi
    except SubcriticalError:
        psi = 0.0

    def one(r):
        g = _graph(args, r)
        core = peel_core(g, args.k)
        return {"replica": r, "n": g.n, "m": g.m, "core_size": core.core_size, "core_fraction": core.fraction()}

    rows = ordered_map(one, range(args.replicas))
    fracs = [r["core_fraction"] for r in rows]
    mean = float(np.mean(fracs))
    for r in rows:
        r["mean_core_fraction"] = mean
        r["psi"] = psi
    rows.append(
        {
            "replica": "mean",
            "n": args.n,
            "m": float(np.mean([r["m"] for r in rows])),
            "core_size": float(np.mean([r["core_size"] for r in rows])),
            "core_fraction": mean,
            "mean_core_fraction": mean,
            "psi": psi,
        }
    )
    cols = ["replica", "n", "m", "core_size", "core_fraction", "mean_core_fraction", "psi"]
    return cols, rows


def cmd_wp_trace(args):
    params = CoreParams(args.d, args.k)
    g = _graph(args, 0)
    core = peel_core(g, args.k).membership
    trace = wp_density_trace(g, args.k, args.t, core)
    traj = density_trajectory(params, args.t)
    rows = []
    for r in trace:
        rows.append(
            {
                "t": r.t,
                "message_density": r.message_density,
                "mark_fraction": r.mark_fraction,
                "excess_fraction": r.excess_fraction,
                "p_t": traj[r.t],
                "mark_density_theory": mark_density(params, traj[r.t]),
            }
        )
    return [*TRACE_COLUMNS, "p_t", "mark_density_theory"], rows


def cmd_compare(args):
    params = CoreParams(args.d, args.k)
    fp = solve_p_star(params)
    depths = sorted(set(args.s))

    def one(r):
        g = _graph(args, r)
        core = peel_core(g, args.k)
        return [empirical_neighborhoods(g, core, s, {"replica": r}) for s in depths]

    per_graph = ordered_map(one, range(args.replicas))
    spec = BranchingSpec(args.d, args.k, fp.p_star, "five_type")
    rows = []
    for j, s in enumerate(depths):
        graphs = [pg[j] for pg in per_graph]
        tree = mc_tree_law(spec, s, args.samples, substream(args.seed, TREE_STREAM + j))
        rep = tv_distance(merge_all(graphs), tree)
        spread = [tv_distance(gd, tree).tv for gd in graphs]
        cyclic = sum(gd.counts.get(CYCLIC, 0) for gd in graphs) / sum(gd.total for gd in graphs)
        rows.append(
            {
                "s": s,
                "tv": rep.tv,
                "mc_error_bound": rep.mc_error_bound,
                "support": len(rep.rows),
                "cyclic_fraction": cyclic,
                "per_graph_tv_min": min(spread),
                "per_graph_tv_max": max(spread),
            }
        )
    return list(rows[0]), rows


def _tree_sampler(args):
    if args.variant in ("top_down", "boundary", "bottom_up"):
        return TreeLaw(args.variant, args.d, args.k, t=args.t)
    if args.variant == "plain_gw":
        return BranchingSpec(args.d, args.k, 0.0, "plain_gw")
    fp = solve_p_star(CoreParams(args.d, args.k))
    return BranchingSpec(args.d, args.k, fp.p_star, args.variant)


def cmd_tree_sample(args):
    sampler = _tree_sampler(args)
    rng = substream(args.seed, TREE_STREAM)
    if isinstance(sampler, BranchingSpec):
        forest = sampler.sample(args.s, rng, args.samples)
    else:
        forest = sampler.sample(args.s, args.samples, rng)
    codes = forest_codes(forest, args.s)
    rows = []
    for i, code in enumerate(codes):
        if forest.alphabet == "triple":
            bad = sum(five_type_violations(forest.tree(i), args.k).values())
            valid = bad == 0
        else:
            valid = True
        rows.append({"index": i, "valid": int(valid), "tree": code})
    if not all(r["valid"] for r in rows):
        raise AnalysisError("sampled 5-type tree failed structural validation")
    return ["index", "valid", "tree"], rows


def cmd_bottomup_vs_topdown(args):
    fp = solve_p_star(CoreParams(args.d, args.k))
    s, M = args.s, args.samples
    boundary = mc_tree_law(TreeLaw("boundary", args.d, args.k), s, M, substream(args.seed, TREE_STREAM))
    star = mc_tree_law(
        BranchingSpec(args.d, args.k, fp.p_star, "two_type_star"), s, M, substream(args.seed, TREE_STREAM + 1)
    )
    top_down = mc_tree_law(
        TreeLaw("top_down", args.d, args.k), s, M, substream(args.seed, TREE_STREAM + 2), project=False
    )
    five = mc_tree_law(
        BranchingSpec(args.d, args.k, fp.p_star, "five_type"), s, M, substream(args.seed, TREE_STREAM + 3),
        project=False,
    )
    rows = []

    def add(name, t, a, b):
        rep = tv_distance(a, b)
        rows.append({"comparison": name, "t": t, "tv": rep.tv, "mc_error_bound": rep.mc_error_bound})

    add("boundary_vs_two_type", "", boundary, star)
    add("top_down_vs_five_type", "", top_down, five)
    # same stream for every t: common random numbers make the t-trend visible
    for t in args.t:
        bu = mc_tree_law(TreeLaw("bottom_up", args.d, args.k, t=t), s, M, substream(args.seed, TREE_STREAM + 4))
        add("bottom_up_vs_boundary", t, bu, boundary)
    return ["comparison", "t", "tv", "mc_error_bound"], rows


COMMANDS = {
    "fixed-point": cmd_fixed_point,
    "threshold": cmd_threshold,
    "core-stats": cmd_core_stats,
    "wp-trace": cmd_wp_trace,
    "compare": cmd_compare,
    "tree-sample": cmd_tree_sample,
    "bottomup-vs-topdown": cmd_bottomup_vs_topdown,
}


# --------------------------------------------------------------- parser


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="core-mantle", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--output", "-o", help="write here instead of stdout")
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    def dk(sp):
        sp.add_argument("--d", type=float, required=True, help="average degree")
        sp.add_argument("--k", type=int, required=True, help="core order (>= 3)")

    sp = sub.add_parser("fixed-point", help="p*, q, q_bar and core density psi",
                        description="Columns: d,k,p_star,q,q_bar,psi,lambda_k,iterations,residual.")
    dk(sp)
    sp.add_argument("--tol", type=float, default=1e-12)
    common(sp, seed=False)

    sp = sub.add_parser("threshold", help="core emergence threshold d_k", description="Columns: k,d_k.")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--tol", type=float, default=1e-10)
    common(sp, seed=False)

    sp = sub.add_parser("core-stats", help="k-core size on random graphs",
                        description="Columns: replica,n,m,core_size,core_fraction,mean_core_fraction,psi; "
                                    "the last row (replica=mean) averages over replicas.")
    dk(sp)
    sp.add_argument("--n", type=int, default=100_000)
    sp.add_argument("--replicas", type=int, default=5)
    common(sp)

    sp = sub.add_parser("wp-trace", help="Warning Propagation densities per round",
                        description="Columns: t,message_density,mark_fraction,excess_fraction,p_t,"
                                    "mark_density_theory.")
    dk(sp)
    sp.add_argument("--n", type=int, default=100_000)
    sp.add_argument("--t", type=int, default=30, help="last round")
    common(sp)

    sp = sub.add_parser("compare", help="graph neighbourhoods vs the tree law",
                        description="Columns: s,tv,mc_error_bound,support,cyclic_fraction,"
                                    "per_graph_tv_min,per_graph_tv_max.")
    dk(sp)
    sp.add_argument("--n", type=int, default=100_000)
    sp.add_argument("--s", type=_int_list, default=[1, 2], help="depths, e.g. 1,2")
    sp.add_argument("--samples", type=int, default=100_000, help="tree samples M")
    sp.add_argument("--replicas", type=int, default=5, help="graphs R")
    common(sp)

    sp = sub.add_parser("tree-sample", help="serialized random trees",
                        description="Columns: index,valid,tree. Trees use the '(mark child ...)' form.")
    sp.add_argument("--variant", choices=TREE_VARIANTS, required=True)
    dk(sp)
    sp.add_argument("--s", type=int, default=2, help="depth")
    sp.add_argument("--samples", type=int, default=10)
    sp.add_argument("--t", type=int, default=0, help="round (bottom_up only)")
    common(sp)

    sp = sub.add_parser("bottomup-vs-topdown", help="TV between the tree constructions",
                        description="Columns: comparison,t,tv,mc_error_bound.")
    dk(sp)
    sp.add_argument("--s", type=int, default=2)
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--t", type=_int_list, default=[0, 2, 4, 8, 12], help="rounds, e.g. 0,4,12")
    common(sp)
    return p


def _check(parser, args):
    def need(cond, msg):
        if not cond:
            parser.error(msg)

    if hasattr(args, "k"):
        need(args.k >= 3, "--k must be >= 3")
    if hasattr(args, "d"):
        need(args.d > 0 or (args.command == "tree-sample" and args.variant == "plain_gw" and args.d == 0),
             "--d must be positive")
    if hasattr(args, "tol"):
        need(args.tol > 0, "--tol must be positive")
    if hasattr(args, "n"):
        need(2 <= args.n <= MAX_N, f"--n must lie in [2, {MAX_N}]")
    if hasattr(args, "replicas"):
        need(1 <= args.replicas <= MAX_REPLICAS, f"--replicas must lie in [1, {MAX_REPLICAS}]")
    if hasattr(args, "samples"):
        need(1 <= args.samples <= MAX_SAMPLES, f"--samples must lie in [1, {MAX_SAMPLES}]")
    if hasattr(args, "s"):
        depths = args.s if isinstance(args.s, list) else [args.s]
        need(all(0 <= s <= MAX_DEPTH for s in depths), f"--s must lie in [0, {MAX_DEPTH}]")
    if hasattr(args, "t"):
        rounds = args.t if isinstance(args.t, list) else [args.t]
        need(all(0 <= t <= MAX_ROUNDS for t in rounds), f"--t must lie in [0, {MAX_ROUNDS}]")
    if args.command == "tree-sample" and args.t and args.variant != "bottom_up":
        parser.error("--t only applies to --variant bottom_up")
    if args.command == "threshold":
        need(args.k <= 50, "--k must be <= 50")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _check(parser, args)
    config = {k: v for k, v in vars(args).items() if k not in ("output", "format")}
    try:
        columns, rows = COMMANDS[args.command](args)
    except SubcriticalError as exc:
        print(f"core-mantle: {exc}", file=sys.stderr)
        return 1
    except (AnalysisError, ValueError) as exc:
        print(f"core-mantle: {exc}", file=sys.stderr)
        return 1
    text = render(args.command, config, columns, rows, args.format)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
