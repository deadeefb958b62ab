"""Command line: generate instances, report decompositions, solve, sweep."""

import argparse
import json
import sys

from .bench import BandedSpec, ExperimentConfig, generate_to_file, run_experiment, sweep
from .decompose import decompose_problem
from .errors import PfbSdpError
from .model import aggregate_pattern, load_problem, validate
from .solver_base import SolveConfig


def _shared_parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=0, help="RNG seed (splitmix64)")
    shared.add_argument("--tol", type=float, default=1e-6,
                        help="relative residual tolerance")
    shared.add_argument("--theta", type=float, default=0.99,
                        help="step-size safety factor in (0,1)")
    shared.add_argument("--max-iter", type=int, default=200_000)
    shared.add_argument("--record-every", type=int, default=10,
                        help="trace decimation stride")
    mode = shared.add_mutually_exclusive_group()
    mode.add_argument("--sequential", dest="parallel", action="store_false",
                      default=False, help="single-threaded agents (default; reproducible)")
    mode.add_argument("--parallel", dest="parallel", action="store_true",
                      help="run agent updates on a thread pool")
    return shared


def build_parser():
    shared = _shared_parser()
    parser = argparse.ArgumentParser(
        prog="pfbsdp",
        description="Chordal SDP decomposition with preconditioned "
                    "forward-backward solvers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[shared],
                       help="generate a banded instance file")
    g.add_argument("--N", type=int, required=True, help="number of blocks (agents)")
    g.add_argument("--n", type=int, required=True, help="block dimension")
    g.add_argument("--rho", type=int, required=True, help="block overlap")
    g.add_argument("--m", type=int, required=True, help="equality constraints")
    g.add_argument("-o", "--output", required=True, help="problem file to write")

    dec = sub.add_parser("decompose", parents=[shared],
                         help="print the clique decomposition of a problem file")
    dec.add_argument("problem")
    dec.add_argument("--json", action="store_true", dest="as_json",
                     help="machine-readable output")

    sol = sub.add_parser("solve", parents=[shared],
                         help="solve a problem file and write traces")
    sol.add_argument("problem")
    sol.add_argument("--solver", choices=["semi", "distributed", "both"],
                     default="both")
    sol.add_argument("--out-dir", default=".")
    sol.add_argument("--name", default=None,
                     help="output file prefix (default: problem file stem)")
    sol.add_argument("--no-plots", dest="plots", action="store_false", default=True)
    sol.add_argument("--no-timings", dest="timings", action="store_false",
                     default=True)

    sw = sub.add_parser("sweep", parents=[shared],
                        help="per-iteration timing table over N, n, or m")
    sw.add_argument("--param", choices=["N", "n", "m"], required=True)
    sw.add_argument("--values", required=True,
                    help="comma-separated parameter values")
    sw.add_argument("--N", type=int, default=10)
    sw.add_argument("--n", type=int, default=8)
    sw.add_argument("--rho", type=int, default=3)
    sw.add_argument("--m", type=int, default=5)
    sw.add_argument("--iters", type=int, default=200,
                    help="timed iterations per point")
    sw.add_argument("--solver", choices=["semi", "distributed", "both"],
                    default="both")
    sw.add_argument("--out-dir", default=".")
    sw.add_argument("--no-plots", dest="plots", action="store_false", default=True)
    return parser


def _solve_config(args):
    return SolveConfig(
        theta=args.theta,
        tol=args.tol,
        max_iter=args.max_iter,
        record_every=args.record_every,
        parallel=args.parallel,
    )


def _cmd_gen(args):
    spec = BandedSpec(N=args.N, n=args.n, rho=args.rho, m=args.m, seed=args.seed)
    generate_to_file(spec, args.output)
    print(f"wrote {args.output} (cone dimension {spec.ambient_n}, m={spec.m})")
    return 0


def _cmd_decompose(args):
    problem = load_problem(args.problem)
    pattern = aggregate_pattern(problem)
    report = validate(problem, pattern)
    d = decompose_problem(problem)
    overlaps = sorted(
        (i, j, len(ov)) for (i, j), ov in d.cg.overlaps.items()
    )
    doc = {
        "n": problem.n,
        "m": problem.m,
        "n_cliques": d.n_agents,
        "clique_sizes": [c.size for c in d.cliques],
        "cliques": [list(c.vertices) for c in d.cliques],
        "overlap_sizes": [[i, j, s] for i, j, s in overlaps],
        "p": d.p,
        "n_hat": d.n_hat,
        "violations": report.violations,
    }
    if args.as_json:
        print(json.dumps(doc, indent=2, sort_keys=True))
        return 0
    print(f"problem: n={doc['n']}, m={doc['m']}")
    print(f"cliques: {doc['n_cliques']} with sizes {doc['clique_sizes']}")
    for c in d.cliques:
        print(f"  clique {c.index}: {list(c.vertices)}")
    print(f"overlaps (i, j, size): {doc['overlap_sizes']}")
    print(f"consistency rows p={doc['p']}, stacked width n_hat={doc['n_hat']}")
    if report.violations:
        print("assumption violations:")
        for v in report.violations:
            print(f"  - {v}")
    return 0


def _cmd_solve(args):
    from pathlib import Path

    problem = load_problem(args.problem)
    report = validate(problem, aggregate_pattern(problem))
    for v in report.violations:
        print(f"warning: {v}", file=sys.stderr)
    name = args.name if args.name else Path(args.problem).stem
    cfg = ExperimentConfig(
        solver=args.solver,
        solve=_solve_config(args),
        out_dir=args.out_dir,
        name=name,
        plots=args.plots,
        timings=args.timings,
    )
    reports, files = run_experiment(cfg, problem)
    failed = False
    for sname, rep in reports.items():
        r_stat, r_eq, r_cons = rep.final_kkt
        print(
            f"{sname}: {rep.termination} after {rep.iterations} iterations, "
            f"objective {rep.final_objective:.10g}, "
            f"residuals (stat {r_stat:.3e}, eq {r_eq:.3e}, cons {r_cons:.3e})"
        )
        if rep.termination != "converged":
            failed = True
    for f in files:
        print(f"wrote {f}")
    return 1 if failed else 0


def _cmd_sweep(args):
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise PfbSdpError(f"could not parse --values {args.values!r}")
    if not values:
        raise PfbSdpError("--values must list at least one integer")
    base = BandedSpec(N=args.N, n=args.n, rho=args.rho, m=args.m, seed=args.seed)
    solvers = ("semi", "distributed") if args.solver == "both" else (args.solver,)
    rows, files = sweep(
        args.param,
        values,
        base,
        solve_cfg=_solve_config(args),
        iters=args.iters,
        out_dir=args.out_dir,
        solvers=solvers,
        plots=args.plots,
    )
    for r in rows:
        print(
            f"{r['param']}={r['value']} {r['solver']}: "
            f"{r['mean_ms_per_iter']:.4g} ms/iter"
        )
    for f in files:
        print(f"wrote {f}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "decompose": _cmd_decompose,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (PfbSdpError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
