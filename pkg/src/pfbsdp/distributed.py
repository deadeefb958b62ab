"""Fully distributed preconditioned forward-backward solver.

Every agent keeps local copies of both multiplier vectors plus two auxiliary
consensus variables, and talks only to its clique-graph neighbors in
synchronous two-phase rounds: phase 1 exchanges multiplier copies and updates
the primal block and auxiliary state, phase 2 exchanges the updated auxiliary
state and refreshes the multiplier copies. No central coordinator exists.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .decompose import kkt_residual, objective_value
from .errors import MissingNeighborPayload
from .solver_base import SolveConfig, SolveReport, TraceRecorder, degenerate_safe
from .symm import _proj_vec_core
from .errors import ConvergenceFailure


@dataclass
class DistStepSizes:
    """Per-agent primal/dual steps and the shared consensus steps.

    ``sigma`` and ``eta`` are deliberately uniform across agents (scaled to
    the maximum weighted degree): uniformity makes the auxiliary updates
    conserve their sum exactly while keeping the preconditioner diagonally
    dominant.
    """

    alpha: np.ndarray
    sigma: float
    eta: float
    gamma: np.ndarray
    tau: np.ndarray
    theta: float


@dataclass
class AgentState:
    """Snapshot of one agent's local variables."""

    x: np.ndarray
    z: np.ndarray
    nu: np.ndarray
    y: np.ndarray
    lam: np.ndarray


@dataclass
class RoundMessages:
    """Materialized payloads of one synchronous round, keyed by sender.

    Phase 1 carries each agent's multiplier copies (nu_i, lam_i); phase 2 the
    freshly updated auxiliary pair (z_i, y_i). Messages flow only along
    clique-graph edges.
    """

    phase1: dict
    phase2: dict


def dist_step_sizes(d, cg=None, theta=0.99):
    """Gershgorin step sizes for the augmented preconditioner.

    alpha_i follows the semi-decentralized rule; gamma_i and tau_i divide by
    the agent's constraint row sums plus twice its weighted degree; sigma and
    eta divide by twice the maximum weighted degree. Degenerate denominators
    fall back to a unit step times theta.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if cg is None:
        cg = d.cg
    n_agents = d.n_agents
    alpha = np.empty(n_agents)
    gamma = np.empty(n_agents)
    tau = np.empty(n_agents)
    degrees = cg.degrees
    for i, agent in enumerate(d.agents):
        col = np.zeros(agent.n_i ** 2)
        if d.m:
            col += np.asarray(abs(agent.A_i).sum(axis=0)).ravel()
        if d.p:
            col += np.asarray(abs(agent.D_i).sum(axis=0)).ravel()
        alpha[i] = degenerate_safe(theta, float(col.max()) if col.size else 0.0)
        row_a = float(np.asarray(abs(agent.A_i).sum(axis=1)).max()) if d.m else 0.0
        row_d = float(np.asarray(abs(agent.D_i).sum(axis=1)).max()) if d.p else 0.0
        gamma[i] = degenerate_safe(theta, row_a + 2.0 * degrees[i])
        tau[i] = degenerate_safe(theta, row_d + 2.0 * degrees[i])
    d_max = float(degrees.max()) if n_agents else 0.0
    sigma = degenerate_safe(theta, 2.0 * d_max)
    return DistStepSizes(
        alpha=alpha, sigma=sigma, eta=sigma, gamma=gamma, tau=tau, theta=theta
    )


def preconditioner_matrix_dist(d, cg, steps):
    """Dense augmented preconditioner over (x, z, y, nu, lambda) blocks."""
    n_hat, m, p = d.n_hat, d.m, d.p
    n_agents = d.n_agents
    lap = cg.laplacian
    l_nu = np.kron(lap, np.eye(m)) if m else np.zeros((0, 0))
    l_lam = np.kron(lap, np.eye(p)) if p else np.zeros((0, 0))
    big_a = np.zeros((m * n_agents, n_hat))
    big_d = np.zeros((p * n_agents, n_hat))
    for i in range(n_agents):
        sl = d.slice_of(i)
        if m:
            big_a[i * m:(i + 1) * m, sl] = d.agents[i].A_i.toarray()
        if p:
            big_d[i * p:(i + 1) * p, sl] = d.agents[i].D_i.toarray()
    dims = [n_hat, m * n_agents, p * n_agents, m * n_agents, p * n_agents]
    starts = np.concatenate(([0], np.cumsum(dims)))
    phi = np.zeros((starts[-1], starts[-1]))

    def put(bi, bj, block):
        phi[starts[bi]:starts[bi + 1], starts[bj]:starts[bj + 1]] = block

    alpha_inv = np.repeat(1.0 / steps.alpha, d.sizes ** 2)
    phi[np.arange(n_hat), np.arange(n_hat)] = alpha_inv
    put(1, 1, np.eye(m * n_agents) / steps.sigma)
    put(2, 2, np.eye(p * n_agents) / steps.eta)
    put(3, 3, np.kron(np.diag(1.0 / steps.gamma), np.eye(m)))
    put(4, 4, np.kron(np.diag(1.0 / steps.tau), np.eye(p)))
    put(0, 3, -big_a.T)
    put(3, 0, -big_a)
    put(0, 4, -big_d.T)
    put(4, 0, -big_d)
    put(1, 3, l_nu)
    put(3, 1, l_nu)
    put(2, 4, l_lam)
    put(4, 2, l_lam)
    return phi


@njit(cache=True)
def _aux_kernel(out, cur, own_dual, in_dual, w, step):  # pragma: no cover
    """out = cur + step * sum_j w[j] * (own_dual - in_dual[j])."""
    deg = in_dual.shape[0]
    for t in range(cur.size):
        acc = 0.0
        for j in range(deg):
            acc += w[j] * (own_dual[t] - in_dual[j, t])
        out[t] = cur[t] + step * acc


@njit(cache=True)
def _dual_kernel(out, cur, step, drive, aux_new, aux_old, in_aux_new,
                 in_aux_old, in_dual, w):  # pragma: no cover
    """Multiplier refresh from the reflected auxiliary disagreements.

    out = cur + step * (drive
                        - sum_j w[2(aux_new - in_aux_new_j) - (aux_old - in_aux_old_j)]
                        - sum_j w (cur - in_dual_j))
    """
    deg = in_dual.shape[0]
    for t in range(cur.size):
        acc = drive[t]
        for j in range(deg):
            acc -= w[j] * (
                2.0 * (aux_new[t] - in_aux_new[j, t])
                - (aux_old[t] - in_aux_old[j, t])
            )
            acc -= w[j] * (cur[t] - in_dual[j, t])
        out[t] = cur[t] + step * acc


@njit(cache=True)
def _s1_kernel(x, n_i, c_i, at, dt, alpha, nu, lam, z_out, z, y_out, y,
               in_nu, in_lam, w, sigma, eta):  # pragma: no cover
    """Fused phase-1 computation; returns (status, x_new)."""
    g = c_i.copy()
    if nu.size:
        g += np.dot(at, nu)
    if lam.size:
        g += np.dot(dt, lam)
    status, x_new = _proj_vec_core(x - alpha * g, n_i)
    _aux_kernel(z_out, z, nu, in_nu, w, sigma)
    _aux_kernel(y_out, y, lam, in_lam, w, eta)
    return status, x_new


@njit(cache=True)
def _s2_kernel(x, x_prev, a, d, b_i, nu_out, nu, gamma, z, z_prev, in_z,
               in_z_prev, in_nu, lam_out, lam, tau, y, y_prev, in_y,
               in_y_prev, in_lam, w):  # pragma: no cover
    """Fused phase-2 computation writing the refreshed multiplier copies."""
    two_x = 2.0 * x - x_prev
    if nu.size:
        drive = np.dot(a, two_x) - b_i
        _dual_kernel(nu_out, nu, gamma, drive, z, z_prev, in_z, in_z_prev,
                     in_nu, w)
    if lam.size:
        drive_l = np.dot(d, two_x)
        _dual_kernel(lam_out, lam, tau, drive_l, y, y_prev, in_y, in_y_prev,
                     in_lam, w)


class DistributedAgent:
    """Isolated agent: local data, double-buffered state, message inboxes.

    Update functions read only this object and explicitly delivered payloads.
    State buffers are swapped, never mutated after publication, so payload
    references taken before an update stay valid for the whole round.
    """

    __slots__ = (
        "index", "n_i", "c_i", "A", "At", "D", "Dt", "b_i", "neighbors",
        "weights", "w_arr", "alpha", "sigma", "eta", "gamma", "tau",
        "x", "x_prev", "z", "z_prev", "nu", "nu_prev", "y", "y_prev",
        "lam", "lam_prev", "in_nu", "in_lam", "in_z", "in_z_prev",
        "in_y", "in_y_prev",
    )

    def __init__(self, index, n_i, c_i, a_dense, d_dense, b_i, neighbors,
                 weights, alpha, sigma, eta, gamma, tau):
        self.index = index
        self.n_i = n_i
        self.c_i = c_i
        self.A = a_dense
        self.At = np.ascontiguousarray(a_dense.T)
        self.D = d_dense
        self.Dt = np.ascontiguousarray(d_dense.T)
        self.b_i = b_i
        self.neighbors = tuple(neighbors)
        self.weights = dict(weights)
        self.w_arr = np.array([weights[j] for j in self.neighbors], dtype=float)
        self.alpha = alpha
        self.sigma = sigma
        self.eta = eta
        self.gamma = gamma
        self.tau = tau
        m = a_dense.shape[0]
        p = d_dense.shape[0]
        deg = len(self.neighbors)
        self.x = np.zeros(n_i * n_i)
        self.x_prev = self.x
        self.z = np.zeros(m)
        self.z_prev = np.zeros(m)
        self.nu = np.zeros(m)
        self.nu_prev = np.zeros(m)
        self.y = np.zeros(p)
        self.y_prev = np.zeros(p)
        self.lam = np.zeros(p)
        self.lam_prev = np.zeros(p)
        # phase-1 inbox: neighbor multiplier copies of the current round
        self.in_nu = np.zeros((deg, m))
        self.in_lam = np.zeros((deg, p))
        # phase-2 inboxes: fresh and previous-round auxiliary payloads
        self.in_z = np.zeros((deg, m))
        self.in_z_prev = np.zeros((deg, m))
        self.in_y = np.zeros((deg, p))
        self.in_y_prev = np.zeros((deg, p))

    @property
    def state(self):
        return AgentState(x=self.x, z=self.z, nu=self.nu, y=self.y, lam=self.lam)

    def state_change(self):
        """Infinity norm of the last round's state update."""
        out = float(np.max(np.abs(self.x - self.x_prev)))
        for new, old in (
            (self.z, self.z_prev),
            (self.y, self.y_prev),
            (self.nu, self.nu_prev),
            (self.lam, self.lam_prev),
        ):
            if new.size:
                out = max(out, float(np.max(np.abs(new - old))))
        return out


def local_update_s1(agent, received):
    """Phase 1: project the primal block, integrate multiplier disagreements.

    ``received`` maps each neighbor to its (nu_j, lam_j) of the current round;
    the payloads are copied into the agent's inbox (they are also needed by
    phase 2).
    """
    in_nu = agent.in_nu
    in_lam = agent.in_lam
    for idx, j in enumerate(agent.neighbors):
        if j not in received:
            raise MissingNeighborPayload(
                f"agent {agent.index} missing phase-1 payload from {j}"
            )
        nu_j, lam_j = received[j]
        in_nu[idx, :] = nu_j
        in_lam[idx, :] = lam_j
    x_prev = agent.x
    z, z_prev = agent.z, agent.z_prev
    y, y_prev = agent.y, agent.y_prev
    status, agent.x = _s1_kernel(
        x_prev, agent.n_i, agent.c_i, agent.At, agent.Dt, agent.alpha,
        agent.nu, agent.lam, z_prev, z, y_prev, y,
        in_nu, in_lam, agent.w_arr, agent.sigma, agent.eta,
    )
    agent.x_prev = x_prev
    if status == 0:
        raise ConvergenceFailure(
            f"Jacobi sweep budget exhausted for agent {agent.index}"
        )
    agent.z, agent.z_prev = z_prev, z
    agent.y, agent.y_prev = y_prev, y


def local_update_s2(agent, received):
    """Phase 2: refresh the multiplier copies from the reflected auxiliaries.

    ``received`` maps each neighbor to its freshly updated (z_j, y_j); the
    previous round's payloads and this round's (nu_j, lam_j) come from the
    agent's inboxes.
    """
    in_z, in_z_prev = agent.in_z_prev, agent.in_z
    in_y, in_y_prev = agent.in_y_prev, agent.in_y
    agent.in_z, agent.in_z_prev = in_z, in_z_prev
    agent.in_y, agent.in_y_prev = in_y, in_y_prev
    for idx, j in enumerate(agent.neighbors):
        if j not in received:
            raise MissingNeighborPayload(
                f"agent {agent.index} missing phase-2 payload from {j}"
            )
        z_j, y_j = received[j]
        in_z[idx, :] = z_j
        in_y[idx, :] = y_j
    nu, nu_prev = agent.nu, agent.nu_prev
    lam, lam_prev = agent.lam, agent.lam_prev
    _s2_kernel(
        agent.x, agent.x_prev, agent.A, agent.D, agent.b_i,
        nu_prev, nu, agent.gamma, agent.z, agent.z_prev,
        in_z, in_z_prev, agent.in_nu,
        lam_prev, lam, agent.tau, agent.y, agent.y_prev,
        in_y, in_y_prev, agent.in_lam, agent.w_arr,
    )
    if nu.size:
        agent.nu, agent.nu_prev = nu_prev, nu
    if lam.size:
        agent.lam, agent.lam_prev = lam_prev, lam


def split_rhs(d):
    """Per-agent right-hand sides that sum to b exactly.

    Each agent takes the image of a shared diagonal ansatz ``t * I`` under its
    own constraint block, plus an equal share of the leftover; ``t`` is the
    least-squares fit of the ansatz's constraint image to b. Any split summing
    to b yields the same fixed points, but the stationary values of the
    auxiliary consensus variables track the per-agent mismatch
    ``A_i x_i^* - b_i``; a plain ``b / N`` split leaves mismatches the size of
    b itself, which stretches the transient by orders of magnitude. For a
    single agent the split is b itself.
    """
    from .decompose import lift

    n_agents = d.n_agents
    if d.m == 0:
        return [np.zeros(0) for _ in range(n_agents)]
    if n_agents == 1:
        return [d.b.copy()]
    e_lift = lift(d, np.eye(d.n))
    g = d.A @ e_lift
    gg = float(g @ g)
    t = float(g @ d.b) / gg if gg > 0.0 else 0.0
    shares = [d.agents[i].A_i @ (t * e_lift[d.slice_of(i)]) for i in range(n_agents)]
    resid = (d.b - sum(shares)) / n_agents
    return [s + resid for s in shares]


def build_agents(d, cg=None, steps=None, theta=0.99):
    """Instantiate the agent network with seeded neighbor caches."""
    if cg is None:
        cg = d.cg
    if steps is None:
        steps = dist_step_sizes(d, cg, theta)
    n_agents = d.n_agents
    rhs = split_rhs(d)
    agents = []
    for i, ad in enumerate(d.agents):
        agents.append(
            DistributedAgent(
                index=i,
                n_i=ad.n_i,
                c_i=ad.c_i,
                a_dense=ad.A_i.toarray(),
                d_dense=ad.D_i.toarray(),
                b_i=rhs[i],
                neighbors=cg.neighbors[i],
                weights={j: cg.weight(i, j) for j in cg.neighbors[i]},
                alpha=float(steps.alpha[i]),
                sigma=steps.sigma,
                eta=steps.eta,
                gamma=float(steps.gamma[i]),
                tau=float(steps.tau[i]),
            )
        )
    # seed the phase-2 inboxes with the neighbors' initial auxiliary state
    for a in agents:
        for idx, j in enumerate(a.neighbors):
            a.in_z[idx, :] = agents[j].z
            a.in_y[idx, :] = agents[j].y
    return agents


def run_round(agents, pool=None, timed=False):
    """One synchronous round: phase-1 barrier, then phase-2 barrier.

    Payloads are snapshotted before each phase, so the update order of agents
    within a phase cannot leak information. Returns per-agent wall times when
    ``timed``.
    """
    messages = RoundMessages(
        phase1={a.index: (a.nu, a.lam) for a in agents},
        phase2={},
    )
    times = [0.0] * len(agents) if timed else None

    def s1(i):
        t0 = time.perf_counter() if timed else 0.0
        local_update_s1(
            agents[i], {j: messages.phase1[j] for j in agents[i].neighbors}
        )
        if timed:
            times[i] += time.perf_counter() - t0

    def s2(i):
        t0 = time.perf_counter() if timed else 0.0
        local_update_s2(
            agents[i], {j: messages.phase2[j] for j in agents[i].neighbors}
        )
        if timed:
            times[i] += time.perf_counter() - t0

    idx = range(len(agents))
    if pool is not None:
        list(pool.map(s1, idx))
    else:
        for i in idx:
            s1(i)
    messages.phase2 = {a.index: (a.z, a.y) for a in agents}
    if pool is not None:
        list(pool.map(s2, idx))
    else:
        for i in idx:
            s2(i)
    return times


def consensus_residual(agents):
    """Max disagreement of multiplier copies across neighboring agents."""
    if not agents:
        raise ValueError("need at least one agent")
    out = 0.0
    for a in agents:
        for j in a.neighbors:
            if j < a.index:
                continue
            other = agents[j]
            if a.nu.size:
                out = max(out, float(np.max(np.abs(a.nu - other.nu))))
            if a.lam.size:
                out = max(out, float(np.max(np.abs(a.lam - other.lam))))
    return out


def _stacked(agents):
    return np.concatenate([a.x for a in agents])


def _averaged_duals(agents):
    n = len(agents)
    nu = sum(a.nu for a in agents) / n
    lam = sum(a.lam for a in agents) / n
    return np.asarray(nu, dtype=float).reshape(-1), np.asarray(lam, dtype=float).reshape(-1)


def solve_distributed(d, cg=None, config=None, steps=None):
    """Run synchronous rounds until KKT and consensus residuals meet tolerance.

    Equality/stationarity residuals are evaluated with the averaged multiplier
    copies and the true stacked primal vector. The report also traces how well
    the auxiliary updates conserve their sum across agents.
    """
    cfg = config if config is not None else SolveConfig()
    if cg is None:
        cg = d.cg
    if steps is None:
        steps = dist_step_sizes(d, cg, cfg.theta)
    agents = build_agents(d, cg, steps)
    n_agents = len(agents)

    b_norm = float(np.linalg.norm(d.b)) if d.m else 0.0
    threshold = cfg.tol * (1.0 + b_norm)
    rec = TraceRecorder(distributed=True)
    iter_times = [] if cfg.collect_timings else None
    agent_max = [] if cfg.collect_agent_times else None
    pool = ThreadPoolExecutor(max_workers=n_agents) if cfg.parallel else None
    timed = cfg.collect_agent_times

    def residuals():
        x = _stacked(agents)
        nu_av, lam_av = _averaged_duals(agents)
        r_stat, r_eq, r_cons = kkt_residual(d, x, nu_av, lam_av)
        return x, nu_av, lam_av, r_stat, r_eq, r_cons, consensus_residual(agents)

    x, nu_av, lam_av, r_stat, r_eq, r_cons, r_consensus = residuals()
    termination = None
    if max(r_stat, r_eq, r_cons, r_consensus) <= threshold:
        termination = "converged"

    k = 0
    while termination is None and k < cfg.max_iter:
        k += 1
        t_iter = time.perf_counter()
        times = run_round(agents, pool=pool, timed=timed)
        if iter_times is not None:
            iter_times.append(time.perf_counter() - t_iter)
        if agent_max is not None:
            agent_max.append(max(times))

        if k % cfg.record_every == 0 or k == cfg.max_iter:
            x, nu_av, lam_av, r_stat, r_eq, r_cons, r_consensus = residuals()
            cons_z = float(np.max(np.abs(sum(a.z - a.z_prev for a in agents)))) if d.m else 0.0
            cons_y = float(np.max(np.abs(sum(a.y - a.y_prev for a in agents)))) if d.p else 0.0
            rec.add(
                k, r_stat, r_eq, r_cons, objective_value(d, x),
                r_consensus=r_consensus, cons_z=cons_z, cons_y=cons_y,
            )
            if max(r_stat, r_eq, r_cons, r_consensus) <= threshold:
                termination = "converged"
        if termination is None and cfg.step_tol is not None:
            if max(a.state_change() for a in agents) <= cfg.step_tol:
                termination = "step_converged"
    if pool is not None:
        pool.shutdown()
    if termination is None:
        termination = "max_iterations"

    if k > 0 and (not rec.iters or rec.iters[-1] != k):
        x, nu_av, lam_av, r_stat, r_eq, r_cons, r_consensus = residuals()
        cons_z = float(np.max(np.abs(sum(a.z - a.z_prev for a in agents)))) if d.m else 0.0
        cons_y = float(np.max(np.abs(sum(a.y - a.y_prev for a in agents)))) if d.p else 0.0
        rec.add(
            k, r_stat, r_eq, r_cons, objective_value(d, x),
            r_consensus=r_consensus, cons_z=cons_z, cons_y=cons_y,
        )

    report = SolveReport(
        solver="distributed",
        x=x,
        nu=nu_av,
        lam=lam_av,
        iterations=k,
        termination=termination,
        b_norm=b_norm,
        threshold=threshold,
        final_kkt=(r_stat, r_eq, r_cons),
        final_objective=objective_value(d, x),
        iter_times=np.asarray(iter_times) if iter_times is not None else None,
        agent_max_times=np.asarray(agent_max) if agent_max is not None else None,
        **rec.arrays(),
    )
    report.extras["final_consensus"] = r_consensus
    report.extras["agent_states"] = [a.state for a in agents]
    return report
