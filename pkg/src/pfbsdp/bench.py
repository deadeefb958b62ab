"""Benchmark harness: banded instance generation, experiment runs, sweeps.

The generator draws, in order, the constraint matrices A_1..A_m, the feasible
seed matrix W, and the cost C, each over the banded pattern's upper-triangle
entries in row-major order, using the splitmix64 stream. The right-hand side
is computed from the strictly feasible matrix W + kappa*I with the Gershgorin
shift kappa = 1 + max absolute row sum of W.
"""

import csv
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import distributed as dist
from . import semi
from .decompose import decompose_problem, objective_value, reconstruct
from .errors import InvalidSpec
from .model import SdpProblem, save_problem
from .rng import SplitMix64
from .solver_base import SolveConfig


@dataclass(frozen=True)
class BandedSpec:
    """Banded instance shape: N diagonal blocks of size n overlapping by rho."""

    N: int
    n: int
    rho: int
    m: int
    seed: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise InvalidSpec(f"need at least one block, got N={self.N}")
        if self.n < 1:
            raise InvalidSpec(f"block dimension must be positive, got n={self.n}")
        if not 1 <= self.rho < self.n:
            raise InvalidSpec(
                f"overlap must satisfy 1 <= rho < n, got rho={self.rho}, n={self.n}"
            )
        if self.m < 0:
            raise InvalidSpec(f"number of constraints must be >= 0, got m={self.m}")

    @property
    def ambient_n(self):
        return self.n * self.N - self.rho * (self.N - 1)

    def block_vertices(self, i):
        """1-based vertices of block i (0-based block index)."""
        start = i * (self.n - self.rho)
        return tuple(range(start + 1, start + self.n + 1))


@dataclass
class BandedInstance:
    """Generated problem plus the strictly feasible matrix used to build b."""

    spec: BandedSpec
    problem: SdpProblem
    x_feasible: np.ndarray


def _banded_entries(spec):
    """Upper-triangle pattern entries (0-based), row-major order."""
    n_amb = spec.ambient_n
    pattern = np.zeros((n_amb, n_amb), dtype=bool)
    for i in range(spec.N):
        idx = np.asarray(spec.block_vertices(i)) - 1
        pattern[np.ix_(idx, idx)] = True
    return np.argwhere(np.triu(pattern))


def gen_banded(spec):
    """Generate a seeded banded instance satisfying the standing assumptions.

    Draw order from one splitmix64 stream: A_1..A_m, then W, then C, each over
    the pattern's upper triangle row-major. The feasible matrix W + kappa*I
    uses the Gershgorin shift kappa = 1 + max absolute row sum, making it
    strictly positive definite; b_k is its constraint image. The cost receives
    the same style of diagonal shift: a raw uniform-entry cost leaves the
    problem unbounded below (no KKT point, so stationarity residuals cannot
    converge), while the shifted cost is positive definite and certifies a
    strictly feasible dual at y = 0.
    """
    n_amb = spec.ambient_n
    entries = _banded_entries(spec)
    rng = SplitMix64(spec.seed)

    def draw():
        m = np.zeros((n_amb, n_amb))
        for p, q in entries:
            v = rng.uniform()
            m[p, q] = v
            m[q, p] = v
        return m

    def gershgorin_shift(m):
        return 1.0 + float(np.max(np.sum(np.abs(m), axis=1)))

    a_mats = [draw() for _ in range(spec.m)]
    w = draw()
    x_f = w + gershgorin_shift(w) * np.eye(n_amb)
    c = draw()
    c += gershgorin_shift(c) * np.eye(n_amb)
    b = np.array([float(np.dot(a.ravel(), x_f.ravel())) for a in a_mats])
    return BandedInstance(
        spec=spec, problem=SdpProblem(C=c, A=a_mats, b=b), x_feasible=x_f
    )


@dataclass
class ExperimentConfig:
    """One experiment: which solver(s) to run and where outputs go."""

    solver: str = "both"
    solve: SolveConfig = field(default_factory=SolveConfig)
    out_dir: str = "."
    name: str = "run"
    plots: bool = True
    timings: bool = True

    def __post_init__(self):
        if self.solver not in ("semi", "distributed", "both"):
            raise ValueError(f"unknown solver choice {self.solver!r}")


def _fmt(v):
    return f"{v:.17g}"


def write_trace_csv(report, path):
    """Residual/objective trace; the consensus column is empty for the
    semi-decentralized solver. Deterministic bytes for a deterministic run."""
    with open(path, "w", newline="\n") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["iter", "r_eq", "r_cons", "r_stat", "r_consensus", "objective"])
        cons = report.r_consensus
        for k in range(report.trace_iters.size):
            wr.writerow(
                [
                    int(report.trace_iters[k]),
                    _fmt(report.r_eq[k]),
                    _fmt(report.r_cons[k]),
                    _fmt(report.r_stat[k]),
                    _fmt(cons[k]) if cons is not None else "",
                    _fmt(report.objective[k]),
                ]
            )


def write_timing_csv(report, path):
    """Per-100-iteration wall-time blocks plus the cumulative parallel metric.

    ``avg_ms_per_100`` is the mean per-iteration time of the block scaled to
    100 iterations; ``parallel_time_cum_ms`` accumulates the per-iteration
    maximum over agents (the parallel execution time a synchronous network
    would take).
    """
    iter_times = report.iter_times
    agent_max = report.agent_max_times
    with open(path, "w", newline="\n") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["iter_block", "avg_ms_per_100", "parallel_time_cum_ms"])
        if iter_times is None or iter_times.size == 0:
            return
        cum_parallel = 0.0
        n_blocks = (iter_times.size + 99) // 100
        for blk in range(n_blocks):
            lo, hi = blk * 100, min((blk + 1) * 100, iter_times.size)
            avg100 = float(np.mean(iter_times[lo:hi])) * 100.0 * 1e3
            if agent_max is not None and agent_max.size:
                cum_parallel += float(np.sum(agent_max[lo:hi])) * 1e3
            wr.writerow([blk + 1, _fmt(avg100), _fmt(cum_parallel)])


def _summary_dict(report, wall_s):
    r_stat, r_eq, r_cons = report.final_kkt
    out = {
        "solver": report.solver,
        "termination": report.termination,
        "iterations": report.iterations,
        "r_stat": r_stat,
        "r_eq": r_eq,
        "r_cons": r_cons,
        "objective": report.final_objective,
        "b_norm": report.b_norm,
        "threshold": report.threshold,
        "wall_time_s": wall_s,
    }
    if report.solver == "distributed":
        out["r_consensus"] = report.extras.get("final_consensus")
    return out


def run_experiment(cfg, problem):
    """Decompose, solve with the configured solver(s), and write artifacts.

    Per solver: a residual trace CSV, a timing CSV, and a JSON run summary;
    for ``both`` additionally a comparison summary. With ``plots`` enabled,
    matplotlib figures are rendered next to the delimited files. Returns the
    reports and the paths written.
    """
    from pathlib import Path

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    d = decompose_problem(problem)
    solvers = ["semi", "distributed"] if cfg.solver == "both" else [cfg.solver]
    solve_cfg = replace(
        cfg.solve,
        collect_timings=cfg.timings,
        collect_agent_times=cfg.timings,
    )

    reports = {}
    files = []
    for name in solvers:
        t0 = time.perf_counter()
        if name == "semi":
            rep = semi.solve(d, solve_cfg)
        else:
            rep = dist.solve_distributed(d, config=solve_cfg)
        wall = time.perf_counter() - t0
        reports[name] = rep
        trace = out_dir / f"{cfg.name}_{name}_trace.csv"
        write_trace_csv(rep, trace)
        files.append(trace)
        if cfg.timings:
            timing = out_dir / f"{cfg.name}_{name}_timing.csv"
            write_timing_csv(rep, timing)
            files.append(timing)
        summary = out_dir / f"{cfg.name}_{name}_summary.json"
        with open(summary, "w", newline="\n") as fh:
            json.dump(_summary_dict(rep, wall), fh, indent=2, sort_keys=True)
            fh.write("\n")
        files.append(summary)

    if len(reports) == 2:
        rs, rd = reports["semi"], reports["distributed"]
        comp = {
            "objective_semi": rs.final_objective,
            "objective_distributed": rd.final_objective,
            "objective_abs_diff": abs(rs.final_objective - rd.final_objective),
        }
        try:
            xs = reconstruct(d, rs.x, tol=np.inf)
            xd = reconstruct(d, rd.x, tol=np.inf)
            comp["pattern_entry_max_diff"] = float(np.max(np.abs(xs - xd)))
        except Exception:  # pragma: no cover - diagnostic only
            comp["pattern_entry_max_diff"] = None
        path = out_dir / f"{cfg.name}_comparison.json"
        with open(path, "w", newline="\n") as fh:
            json.dump(comp, fh, indent=2, sort_keys=True)
            fh.write("\n")
        files.append(path)

    if cfg.plots:
        from . import plots

        fig_path = out_dir / f"{cfg.name}_residuals.png"
        plots.residual_figure(list(reports.values()), fig_path)
        files.append(fig_path)
        if cfg.timings:
            tpath = out_dir / f"{cfg.name}_timing.png"
            plots.timing_figure(list(reports.values()), tpath)
            files.append(tpath)

    return reports, [str(f) for f in files]


def sweep(param, values, base, solve_cfg=None, iters=200, out_dir=".",
          solvers=("semi", "distributed"), plots=True, warmup=20):
    """Vary one of N, n, m and tabulate per-iteration wall times.

    Each point runs ``iters`` iterations (no convergence stop) after a short
    warm-up, isolating iteration cost from convergence behavior. Returns the
    table rows and writes ``sweep_<param>.csv`` (plus a figure when ``plots``).
    """
    from pathlib import Path

    if param not in ("N", "n", "m"):
        raise ValueError(f"sweep parameter must be one of N, n, m, got {param!r}")
    base_cfg = solve_cfg if solve_cfg is not None else SolveConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for value in values:
        spec = replace(base, **{param: int(value)})
        inst = gen_banded(spec)
        d = decompose_problem(inst.problem)
        for name in solvers:
            cfg = replace(
                base_cfg,
                tol=1e-300,
                max_iter=int(iters),
                record_every=int(iters),
                collect_timings=True,
                collect_agent_times=True,
            )
            warm_cfg = replace(cfg, max_iter=int(warmup), record_every=max(1, int(warmup)))
            if name == "semi":
                semi.solve(d, warm_cfg)
                rep = semi.solve(d, cfg)
            else:
                dist.solve_distributed(d, config=warm_cfg)
                rep = dist.solve_distributed(d, config=cfg)
            mean_ms = float(np.mean(rep.iter_times)) * 1e3
            parallel_ms = float(np.sum(rep.agent_max_times)) * 1e3
            rows.append(
                {
                    "param": param,
                    "value": int(value),
                    "solver": name,
                    "mean_ms_per_iter": mean_ms,
                    "avg_ms_per_100": mean_ms * 100.0,
                    "parallel_time_total_ms": parallel_ms,
                }
            )

    table = out_dir / f"sweep_{param}.csv"
    with open(table, "w", newline="\n") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(
            ["param", "value", "solver", "mean_ms_per_iter", "avg_ms_per_100",
             "parallel_time_total_ms"]
        )
        for r in rows:
            wr.writerow(
                [r["param"], r["value"], r["solver"], _fmt(r["mean_ms_per_iter"]),
                 _fmt(r["avg_ms_per_100"]), _fmt(r["parallel_time_total_ms"])]
            )
    written = [str(table)]
    if plots:
        from . import plots as plotmod

        fig = out_dir / f"sweep_{param}.png"
        plotmod.sweep_figure(rows, param, fig)
        written.append(str(fig))
    return rows, written


def generate_to_file(spec, path):
    """CLI helper: generate and save a problem file."""
    inst = gen_banded(spec)
    save_problem(inst.problem, path)
    return inst
