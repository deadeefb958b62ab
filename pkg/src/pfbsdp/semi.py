"""Semi-decentralized preconditioned forward-backward solver.

Agents update their primal blocks by a gradient step followed by a projection
onto their small PSD cone; a central coordinator then updates the shared
multipliers of the equality and consistency constraints. Step sizes come from
a Gershgorin diagonal-dominance rule that makes the preconditioner positive
definite by construction.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .decompose import kkt_residual, objective_value
from .solver_base import SolveConfig, SolveReport, TraceRecorder, degenerate_safe
from .symm import proj_psd_blocks, proj_psd_vec


@dataclass
class StepSizes:
    """Per-agent primal steps and scalar coordinator steps; theta in (0, 1)."""

    alpha: np.ndarray
    gamma: float
    tau: float
    theta: float


@dataclass
class SemiState:
    """Iterate of the semi-decentralized loop."""

    x: np.ndarray
    nu: np.ndarray
    lam: np.ndarray
    iteration: int = 0


def step_sizes(d, theta=0.99):
    """Gershgorin step sizes: alpha_i from the coupling column sums of agent i,
    gamma and tau from the row sums of the stacked A and D.

    With safety factor ``theta < 1`` the assembled preconditioner is strictly
    diagonally dominant with positive diagonal, hence positive definite.
    Degenerate (all-zero) rows or columns fall back to a unit step times theta.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    alpha = np.empty(d.n_agents)
    for i, agent in enumerate(d.agents):
        col = np.zeros(agent.n_i ** 2)
        if d.m:
            col += np.asarray(abs(agent.A_i).sum(axis=0)).ravel()
        if d.p:
            col += np.asarray(abs(agent.D_i).sum(axis=0)).ravel()
        alpha[i] = degenerate_safe(theta, float(col.max()) if col.size else 0.0)
    row_a = float(np.asarray(abs(d.A).sum(axis=1)).max()) if d.m else 0.0
    row_d = float(np.asarray(abs(d.D).sum(axis=1)).max()) if d.p else 0.0
    return StepSizes(
        alpha=alpha,
        gamma=degenerate_safe(theta, row_a),
        tau=degenerate_safe(theta, row_d),
        theta=theta,
    )


def preconditioner_matrix(d, steps):
    """Dense preconditioner: step-size diagonal, minus-A/minus-D coupling."""
    n_hat, m, p = d.n_hat, d.m, d.p
    dim = n_hat + m + p
    phi = np.zeros((dim, dim))
    for i in range(d.n_agents):
        sl = d.slice_of(i)
        phi[sl, sl] = np.eye(int(d.sizes[i]) ** 2) / steps.alpha[i]
    if m:
        phi[n_hat:n_hat + m, n_hat:n_hat + m] = np.eye(m) / steps.gamma
        a_dense = d.A.toarray()
        phi[:n_hat, n_hat:n_hat + m] = -a_dense.T
        phi[n_hat:n_hat + m, :n_hat] = -a_dense
    if p:
        phi[n_hat + m:, n_hat + m:] = np.eye(p) / steps.tau
        d_dense = d.D.toarray()
        phi[:n_hat, n_hat + m:] = -d_dense.T
        phi[n_hat + m:, :n_hat] = -d_dense
    return phi


def initial_state(d):
    """Zero matrices for every agent (feasible for the cone), zero multipliers."""
    return SemiState(
        x=np.zeros(d.n_hat), nu=np.zeros(d.m), lam=np.zeros(d.p), iteration=0
    )


def _gradient(d, nu, lam):
    grad = d.F.copy()
    if d.m:
        grad += d.A.T @ nu
    if d.p:
        grad += d.D.T @ lam
    return grad


def iterate(d, state, steps):
    """One forward-backward sweep: projected primal step, coordinator duals."""
    alpha_full = np.repeat(steps.alpha, d.sizes ** 2)
    y = state.x - alpha_full * _gradient(d, state.nu, state.lam)
    x_new = proj_psd_blocks(y, d.offsets, d.sizes)
    nu_new = state.nu
    lam_new = state.lam
    if d.m:
        nu_new = state.nu + steps.gamma * (2.0 * (d.A @ x_new) - d.A @ state.x - d.b)
    if d.p:
        lam_new = state.lam + steps.tau * (2.0 * (d.D @ x_new) - d.D @ state.x)
    return SemiState(x=x_new, nu=nu_new, lam=lam_new, iteration=state.iteration + 1)


def solve(d, config=None, steps=None):
    """Iterate to the relative residual tolerance; returns a SolveReport."""
    cfg = config if config is not None else SolveConfig()
    st = steps if steps is not None else step_sizes(d, cfg.theta)
    alpha_full = np.repeat(st.alpha, d.sizes ** 2)

    x = np.zeros(d.n_hat)
    nu = np.zeros(d.m)
    lam = np.zeros(d.p)
    b_norm = float(np.linalg.norm(d.b)) if d.m else 0.0
    threshold = cfg.tol * (1.0 + b_norm)

    rec = TraceRecorder(distributed=False)
    iter_times = [] if cfg.collect_timings else None
    agent_max = [] if cfg.collect_agent_times else None
    pool = ThreadPoolExecutor(max_workers=d.n_agents) if cfg.parallel else None

    agent_slices = [d.slice_of(i) for i in range(d.n_agents)]
    per_agent = cfg.collect_agent_times or cfg.parallel

    def agent_x_update(i, x_cur, nu_cur, lam_cur):
        t0 = time.perf_counter()
        agent = d.agents[i]
        g = agent.c_i.copy()
        if d.m:
            g += agent.A_i.T @ nu_cur
        if d.p:
            g += agent.D_i.T @ lam_cur
        out = proj_psd_vec(x_cur[agent_slices[i]] - st.alpha[i] * g)
        return out, time.perf_counter() - t0

    r_stat, r_eq, r_cons = kkt_residual(d, x, nu, lam)
    termination = None
    if max(r_stat, r_eq, r_cons) <= threshold:
        termination = "converged"

    ax = d.A @ x if d.m else None
    dx = d.D @ x if d.p else None
    k = 0
    while termination is None and k < cfg.max_iter:
        k += 1
        t_iter = time.perf_counter()
        if per_agent:
            if pool is not None:
                results = list(
                    pool.map(lambda i: agent_x_update(i, x, nu, lam), range(d.n_agents))
                )
            else:
                results = [agent_x_update(i, x, nu, lam) for i in range(d.n_agents)]
            x_new = np.concatenate([r[0] for r in results])
            if agent_max is not None:
                agent_max.append(max(r[1] for r in results))
        else:
            y = x - alpha_full * _gradient(d, nu, lam)
            x_new = proj_psd_blocks(y, d.offsets, d.sizes)
        step_inf = float(np.max(np.abs(x_new - x))) if cfg.step_tol is not None else None
        if d.m:
            ax_new = d.A @ x_new
            nu_new = nu + st.gamma * (2.0 * ax_new - ax - d.b)
            if cfg.step_tol is not None and nu.size:
                step_inf = max(step_inf, float(np.max(np.abs(nu_new - nu))))
            nu, ax = nu_new, ax_new
        if d.p:
            dx_new = d.D @ x_new
            lam_new = lam + st.tau * (2.0 * dx_new - dx)
            if cfg.step_tol is not None and lam.size:
                step_inf = max(step_inf, float(np.max(np.abs(lam_new - lam))))
            lam, dx = lam_new, dx_new
        x = x_new
        if iter_times is not None:
            iter_times.append(time.perf_counter() - t_iter)

        if k % cfg.record_every == 0 or k == cfg.max_iter:
            r_stat, r_eq, r_cons = kkt_residual(d, x, nu, lam)
            rec.add(k, r_stat, r_eq, r_cons, objective_value(d, x))
            if max(r_stat, r_eq, r_cons) <= threshold:
                termination = "converged"
        if termination is None and cfg.step_tol is not None and step_inf <= cfg.step_tol:
            termination = "step_converged"
    if pool is not None:
        pool.shutdown()
    if termination is None:
        termination = "max_iterations"

    if k > 0 and (not rec.iters or rec.iters[-1] != k):
        r_stat, r_eq, r_cons = kkt_residual(d, x, nu, lam)
        rec.add(k, r_stat, r_eq, r_cons, objective_value(d, x))

    return SolveReport(
        solver="semi",
        x=x,
        nu=nu,
        lam=lam,
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
