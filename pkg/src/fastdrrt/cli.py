"""Command line front end.

    fastdrrt gen-roadmap <scenario> -o <dir>
    fastdrrt voxelize <dir> [--d-voxel F] [--delta F]
    fastdrrt plan <dir> --segment K --mode fast|drrt [--seed N] [--ptc ...]
    fastdrrt bench <dir> --runs N [--budget-ms M] [--perturb-sigma S]
    fastdrrt oracle <dir> --segment K

Exit status: 0 success, 1 planning failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .bench.pipeline import MissingArtifactError, gen_roadmap_dir, load_workspace, voxelize_dir
from .bench.report import emit_results
from .bench.runner import WORKERS_ENV, run_segment_experiment, worker_count
from .bench.scenario import PerturbationFailed, ScenarioError
from .bench.suite import SUITE, bundled_path
from .oracle import ProductGraphTooLarge, build_explicit, optimal_cost
from .planner import (CostConvergence, CostThreshold, FirstSolution, MaxIterations, PlannerConfig, TimeLimit,
                      goal_satisfied, plan)
from .roadmap import PlanningFailed, RoadmapConstructionError
from .sweptvol import GridMismatchError, OutOfGridError

log = logging.getLogger("fastdrrt")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
DEFAULT_PERTURB_SIGMA = 0.05


class ConfigError(Exception):
    pass


def parse_ptc(text: str) -> tuple:
    """``iters=N,time=S,first,converge=W:E,threshold=C``; the run stops when any term fires."""
    terms = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, _, val = part.partition("=")
        try:
            if key == "iters":
                terms.append(MaxIterations(int(val)))
            elif key == "time":
                terms.append(TimeLimit(float(val)))
            elif key == "first" and not val:
                terms.append(FirstSolution())
            elif key == "converge":
                w, e = val.split(":")
                terms.append(CostConvergence(int(w), float(e)))
            elif key == "threshold":
                terms.append(CostThreshold(float(val)))
            else:
                raise ConfigError(f"unknown termination term {part!r}")
        except ValueError as exc:
            raise ConfigError(f"bad termination term {part!r}: {exc}") from None
    if not terms:
        raise ConfigError("--ptc needs at least one term")
    return tuple(terms)


def _scenario_path(arg: str) -> Path:
    p = Path(arg)
    if p.exists():
        return p
    if arg in SUITE:
        return bundled_path(arg)
    raise ConfigError(f"{arg}: no such scenario file (bundled: {', '.join(SUITE)})")


def cmd_gen_roadmap(args) -> int:
    roadmaps = gen_roadmap_dir(_scenario_path(args.scenario), args.output)
    log.info("roadmaps written to %s", args.output)
    for i, rm in enumerate(roadmaps):
        print(f"robot {i}: {rm.n_nodes} nodes, {rm.n_edges} edges")
    return EXIT_OK


def cmd_voxelize(args) -> int:
    anns = voxelize_dir(args.dir, args.d_voxel, args.delta)
    g = anns[0].grid
    print(f"grid origin={tuple(g.origin)} d_voxel={g.d_voxel} dims={tuple(g.dims)}")
    for i, a in enumerate(anns):
        n = sum(len(v) for v in a.node_volumes) + sum(len(v) for v in a.edge_volumes)
        print(f"robot {i}: delta={a.delta:.5f}, {n} voxel entries")
    return EXIT_OK


def cmd_plan(args) -> int:
    prepared = load_workspace(args.dir)
    problem = prepared.problem(args.segment)
    ptc = parse_ptc(args.ptc) if args.ptc else (MaxIterations(prepared.scenario.planner_defaults.max_iterations),)
    cfg = PlannerConfig(ptc=ptc, mode=args.mode, seed=args.seed, expansion_rule=args.expansion_rule,
                        freeze_any_goal=args.freeze_any_goal)
    res = plan(prepared.graph, problem, cfg)
    st = res.stats
    out = {
        "solved": res.solved,
        "cost": res.best_cost if res.solved else None,
        "iterations": st.iterations,
        "time_to_first_ms": st.time_to_first_ns / 1e6 if st.time_to_first_ns is not None else None,
        "cost_first": st.cost_first,
        "tree_size": st.tree_size,
        "path": [list(map(int, v)) for v in res.best_path],
    }
    print(json.dumps(out))
    return EXIT_OK if res.solved else EXIT_FAILED


def cmd_bench(args) -> int:
    prepared = load_workspace(args.dir)
    sc = prepared.scenario
    segments = [args.segment] if args.segment is not None else list(range(len(sc.segments)))
    if args.clock == "wall":
        budget = args.budget_ms / 1000.0
    else:
        budget = args.budget_iters
    records = []
    for seg in segments:
        records += run_segment_experiment(prepared, seg, args.modes, args.runs, budget, args.master_seed,
                                          args.clock, args.max_iterations, worker_count(),
                                          perturb_sigma=args.perturb_sigma)
    out = Path(args.output) if args.output else Path(args.dir) / "results"
    log.info("%d records, writing to %s", len(records), out)
    paths = emit_results(records, out, figures=not args.no_figures)
    solved = sum(r.solved for r in records)
    bad = [r for r in records if r.checked not in ("", "ok")]
    print(f"{solved}/{len(records)} runs solved; results in {paths['runs'].parent}")
    for r in bad:
        print(f"revalidation failed: {r.mode} seed {r.seed}: {r.checked}", file=sys.stderr)
    return EXIT_OK if solved == len(records) and not bad else EXIT_FAILED


def cmd_oracle(args) -> int:
    prepared = load_workspace(args.dir)
    problem = prepared.problem(args.segment)
    explicit = build_explicit(prepared.graph, args.cap)
    cost, path = optimal_cost(explicit, problem.start, lambda v: goal_satisfied(problem, v))
    print(json.dumps({
        "vertices": explicit.n_vertices,
        "edges": explicit.n_edges,
        "cost": cost if math.isfinite(cost) else None,
        "path": [list(map(int, v)) for v in path],
    }))
    return EXIT_OK if math.isfinite(cost) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fastdrrt", description="multi-robot planning over composite roadmaps")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-roadmap", help="build per-robot roadmaps for a scenario")
    g.add_argument("scenario", help=f"scenario JSON file or bundled name ({', '.join(SUITE)})")
    g.add_argument("-o", "--output", required=True, help="workspace directory")
    g.set_defaults(func=cmd_gen_roadmap)

    v = sub.add_parser("voxelize", help="precompute swept volumes for a workspace")
    v.add_argument("dir")
    v.add_argument("--d-voxel", type=float, default=None, help="voxel edge length [m]")
    v.add_argument("--delta", type=float, default=None, help="edge sampling step [rad]")
    v.set_defaults(func=cmd_voxelize)

    pl = sub.add_parser("plan", help="run one planner instance")
    pl.add_argument("dir")
    pl.add_argument("--segment", type=int, required=True)
    pl.add_argument("--mode", choices=("fast", "drrt"), default="fast")
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--ptc", default=None, help="e.g. iters=100000,time=2.5,first,converge=200:1e-6")
    pl.add_argument("--expansion-rule", choices=("random_neighbor", "direction_oracle"), default="random_neighbor")
    pl.add_argument("--freeze-any-goal", action="store_true", help="keep goal-less robots in place")
    pl.set_defaults(func=cmd_plan)

    b = sub.add_parser("bench", help="repeated seeded runs of both planners")
    b.add_argument("dir")
    b.add_argument("--runs", type=int, default=100)
    b.add_argument("--segment", type=int, default=None, help="default: every segment")
    b.add_argument("--modes", nargs="+", choices=("fast", "drrt"), default=["fast", "drrt"])
    b.add_argument("--clock", choices=("wall", "iter"), default="wall",
                   help="'iter' measures in iterations and gives reproducible files")
    b.add_argument("--budget-ms", type=float, default=100.0, help="cost-at-budget point (wall clock)")
    b.add_argument("--budget-iters", type=int, default=1000, help="cost-at-budget point (iteration clock)")
    b.add_argument("--max-iterations", type=int, default=100_000)
    b.add_argument("--perturb-sigma", type=float, nargs="?", default=0.0, const=DEFAULT_PERTURB_SIGMA,
                   help=f"target noise per run [rad]; the bare flag means {DEFAULT_PERTURB_SIGMA}")
    b.add_argument("--master-seed", type=int, default=0)
    b.add_argument("-o", "--output", default=None, help="default: <dir>/results")
    b.add_argument("--no-figures", action="store_true")
    b.set_defaults(func=cmd_bench)

    o = sub.add_parser("oracle", help="exact optimum on the explicit product graph")
    o.add_argument("dir")
    o.add_argument("--segment", type=int, required=True)
    o.add_argument("--cap", type=int, default=10**6)
    o.set_defaults(func=cmd_oracle)
    p.epilog = f"{WORKERS_ENV} sets the number of bench worker processes."
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "perturb_sigma", 0.0) < 0:
        print("error: --perturb-sigma must be >= 0", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "runs", 1) < 1:
        print("error: --runs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (PlanningFailed, RoadmapConstructionError, PerturbationFailed) as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (ConfigError, ScenarioError, MissingArtifactError, GridMismatchError, OutOfGridError,
            ProductGraphTooLarge, IndexError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
