"""Shared solver configuration and report types."""

from dataclasses import dataclass, field

import numpy as np

# Norm floor below which a step-size denominator counts as degenerate.
EPS = 1e-12
# Step size used for degenerate (zero-coupling) rows and columns, times theta.
FALLBACK_STEP = 1.0


@dataclass
class SolveConfig:
    """Iteration controls shared by both solvers.

    ``tol`` is relative: iteration stops once the largest KKT (and, for the
    distributed solver, consensus) residual drops below ``tol * (1 + ||b||)``.
    ``step_tol``, when set, additionally stops on an infinity-norm state change
    below the threshold. ``record_every`` decimates the residual trace.
    """

    theta: float = 0.99
    tol: float = 1e-6
    max_iter: int = 200_000
    record_every: int = 10
    step_tol: float = None
    parallel: bool = False
    collect_timings: bool = True
    collect_agent_times: bool = False

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.tol <= 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 0 or self.record_every < 1:
            raise ValueError("max_iter must be >= 0 and record_every >= 1")


@dataclass
class SolveReport:
    """Final iterate, decimated residual/objective traces, and timings.

    ``trace_iters[k]`` gives the iteration number of trace row ``k``;
    residual traces share that indexing. ``r_consensus`` and the conservation
    arrays are populated by the distributed solver only. Wall-clock arrays are
    per iteration and live outside the determinism contract.
    """

    solver: str
    x: np.ndarray
    nu: np.ndarray
    lam: np.ndarray
    iterations: int
    termination: str
    b_norm: float
    threshold: float
    final_kkt: tuple
    final_objective: float
    trace_iters: np.ndarray
    r_stat: np.ndarray
    r_eq: np.ndarray
    r_cons: np.ndarray
    objective: np.ndarray
    r_consensus: np.ndarray = None
    conservation_z: np.ndarray = None
    conservation_y: np.ndarray = None
    iter_times: np.ndarray = None
    agent_max_times: np.ndarray = None
    extras: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.termination == "converged"


class TraceRecorder:
    """Accumulates decimated trace rows for a solve run."""

    def __init__(self, distributed=False):
        self.iters = []
        self.r_stat = []
        self.r_eq = []
        self.r_cons = []
        self.objective = []
        self.r_consensus = [] if distributed else None
        self.conservation_z = [] if distributed else None
        self.conservation_y = [] if distributed else None

    def add(self, k, r_stat, r_eq, r_cons, objective, r_consensus=None,
            cons_z=None, cons_y=None):
        self.iters.append(k)
        self.r_stat.append(r_stat)
        self.r_eq.append(r_eq)
        self.r_cons.append(r_cons)
        self.objective.append(objective)
        if self.r_consensus is not None:
            self.r_consensus.append(r_consensus)
            self.conservation_z.append(cons_z)
            self.conservation_y.append(cons_y)

    def arrays(self):
        out = {
            "trace_iters": np.asarray(self.iters, dtype=np.int64),
            "r_stat": np.asarray(self.r_stat),
            "r_eq": np.asarray(self.r_eq),
            "r_cons": np.asarray(self.r_cons),
            "objective": np.asarray(self.objective),
        }
        if self.r_consensus is not None:
            out["r_consensus"] = np.asarray(self.r_consensus)
            out["conservation_z"] = np.asarray(self.conservation_z)
            out["conservation_y"] = np.asarray(self.conservation_y)
        return out


def degenerate_safe(theta, denom):
    """theta / denom, or the fallback step when the denominator is degenerate."""
    return theta / denom if denom > EPS else theta * FALLBACK_STEP
