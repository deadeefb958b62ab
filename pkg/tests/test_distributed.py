import numpy as np
import pytest

from pfbsdp.bench import BandedSpec, gen_banded
from pfbsdp.decompose import assemble, decompose_problem, kkt_residual
from pfbsdp.distributed import (
    build_agents,
    consensus_residual,
    dist_step_sizes,
    local_update_s1,
    local_update_s2,
    preconditioner_matrix_dist,
    run_round,
    solve_distributed,
    split_rhs,
)
from pfbsdp.errors import MissingNeighborPayload
from pfbsdp.graphs import Clique
from pfbsdp.model import SdpProblem
from pfbsdp.semi import initial_state, iterate, solve, step_sizes
from pfbsdp.solver_base import SolveConfig
from pfbsdp.symm import eigh, mat


def small_banded(seed=0, N=3, n=4, rho=1, m=2):
    inst = gen_banded(BandedSpec(N=N, n=n, rho=rho, m=m, seed=seed))
    return decompose_problem(inst.problem)


def two_agent_consensus_setup(nu_values):
    """Two 1x1 agents sharing a vertex, no problem data, unit weight."""
    p = SdpProblem(C=np.zeros((3, 3)), A=[np.zeros((3, 3))], b=[0.0])
    cliques = [Clique(vertices=(1, 2), index=0), Clique(vertices=(2, 3), index=1)]
    d = assemble(p, cliques)
    agents = build_agents(d)
    for a, val in zip(agents, nu_values):
        a.nu = np.array([float(val)])
    return d, agents


class TestDistStepSizes:
    def test_two_agents_no_data(self):
        p = SdpProblem(C=np.zeros((3, 3)), A=[], b=[])
        cliques = [Clique(vertices=(1, 2), index=0), Clique(vertices=(2, 3), index=1)]
        d = assemble(p, cliques)
        st = dist_step_sizes(d, theta=0.8)
        assert st.sigma == pytest.approx(0.8 / 2.0)
        assert st.eta == st.sigma

    def test_sigma_uniform_across_agents(self):
        d = small_banded(N=5)
        st = dist_step_sizes(d)
        # one shared value scaled to the maximum weighted degree
        assert np.isscalar(st.sigma)
        assert st.sigma == pytest.approx(st.theta / (2.0 * d.cg.degrees.max()))

    def test_gamma_tau_rule(self):
        d = small_banded(seed=2)
        st = dist_step_sizes(d, theta=0.5)
        for i, agent in enumerate(d.agents):
            a_i = np.abs(agent.A_i.toarray()).sum(axis=1).max()
            e_i = np.abs(agent.D_i.toarray()).sum(axis=1).max()
            deg = d.cg.degrees[i]
            assert st.gamma[i] == pytest.approx(0.5 / (a_i + 2 * deg), rel=1e-12)
            assert st.tau[i] == pytest.approx(0.5 / (e_i + 2 * deg), rel=1e-12)

    def test_alpha_matches_semi_rule(self):
        d = small_banded(seed=3)
        assert np.array_equal(dist_step_sizes(d).alpha, step_sizes(d).alpha)

    def test_preconditioner_positive_definite(self):
        for seed in (0, 1):
            d = small_banded(seed=seed)
            phi = preconditioner_matrix_dist(d, d.cg, dist_step_sizes(d))
            assert np.array_equal(phi, phi.T)
            w, _ = eigh(phi)
            assert w[0] > 0.0


class TestSplitRhs:
    def test_sums_to_b(self):
        d = small_banded(seed=4, N=4)
        parts = split_rhs(d)
        assert np.abs(sum(parts) - d.b).max() <= 1e-10 * (1 + np.abs(d.b).max())

    def test_single_agent_gets_b_exactly(self):
        p = SdpProblem(C=np.eye(2), A=[np.eye(2)], b=[3.0])
        d = assemble(p, [Clique(vertices=(1, 2), index=0)])
        parts = split_rhs(d)
        assert np.array_equal(parts[0], d.b)

    def test_no_constraints(self):
        p = SdpProblem(C=np.zeros((3, 3)), A=[], b=[])
        cliques = [Clique(vertices=(1, 2), index=0), Clique(vertices=(2, 3), index=1)]
        d = assemble(p, cliques)
        assert all(part.size == 0 for part in split_rhs(d))


class TestLocalUpdates:
    def test_consensus_annihilates_aux_updates(self):
        d, agents = two_agent_consensus_setup([1.5, 1.5])
        run_round(agents)
        for a in agents:
            assert np.array_equal(a.z, np.zeros(1))
            assert np.array_equal(a.y, np.zeros(d.p))

    def test_psd_point_is_projection_fixed_point(self):
        d, agents = two_agent_consensus_setup([0.0, 0.0])
        x0 = np.array([1.0, 0.25, 0.25, 2.0])  # symmetric PSD 2x2, stacked
        agents[0].x = x0.copy()
        run_round(agents)
        assert np.array_equal(agents[0].x, x0)

    def test_two_agent_z_transfer(self):
        d, agents = two_agent_consensus_setup([1.0, 0.0])
        for a in agents:
            a.sigma = 0.5
        z0 = [a.z.copy() for a in agents]
        run_round(agents)
        assert agents[0].z[0] == pytest.approx(z0[0][0] + 0.5)
        assert agents[1].z[0] == pytest.approx(z0[1][0] - 0.5)

    def test_missing_phase1_payload(self):
        d, agents = two_agent_consensus_setup([0.0, 0.0])
        with pytest.raises(MissingNeighborPayload):
            local_update_s1(agents[0], {})

    def test_missing_phase2_payload(self):
        d, agents = two_agent_consensus_setup([0.0, 0.0])
        local_update_s1(agents[0], {1: (agents[1].nu, agents[1].lam)})
        with pytest.raises(MissingNeighborPayload):
            local_update_s2(agents[0], {})

    def test_zero_state_keeps_duals_at_zero(self):
        d, agents = two_agent_consensus_setup([0.0, 0.0])
        run_round(agents)
        for a in agents:
            assert np.array_equal(a.nu, np.zeros(1))
            assert np.array_equal(a.lam, np.zeros(d.p))

    def test_bracket_vanishes_on_converged_run(self):
        d = small_banded(seed=5, N=2, n=3)
        rep = solve_distributed(
            d, config=SolveConfig(tol=1e-300, max_iter=200000, step_tol=1e-13)
        )
        assert rep.termination == "step_converged"
        agents = build_agents(d)
        states = rep.extras["agent_states"]
        for a, s in zip(agents, states):
            a.x, a.z, a.nu, a.y, a.lam = (v.copy() for v in
                                          (s.x, s.z, s.nu, s.y, s.lam))
        for a in agents:
            for idx, j in enumerate(a.neighbors):
                a.in_z[idx, :] = agents[j].z
                a.in_y[idx, :] = agents[j].y
        nu_before = [a.nu.copy() for a in agents]
        run_round(agents)
        for a, nu0 in zip(agents, nu_before):
            assert np.abs(a.nu - nu0).max() <= 1e-9


class TestSingleAgentReduction:
    def test_matches_semi_coordinator(self):
        p = SdpProblem(C=np.diag([3.0, 1.0, 2.0]), A=[np.eye(3)], b=[1.0])
        d = assemble(p, [Clique(vertices=(1, 2, 3), index=0)])
        s = initial_state(d)
        st = step_sizes(d)
        agents = build_agents(d)
        dev = 0.0
        for _ in range(1000):
            s = iterate(d, s, st)
            run_round(agents)
            dev = max(
                dev,
                float(np.abs(agents[0].x - s.x).max()),
                float(np.abs(agents[0].nu - s.nu).max()),
            )
        assert dev <= 1e-12


class TestConsensusResidual:
    def test_identical_copies(self):
        d, agents = two_agent_consensus_setup([2.0, 2.0])
        assert consensus_residual(agents) == 0.0

    def test_unit_gap(self):
        d, agents = two_agent_consensus_setup([1.0, 0.0])
        assert consensus_residual(agents) == 1.0

    def test_converged_run_below_tolerance(self):
        d = small_banded(seed=6, N=2, n=3)
        rep = solve_distributed(d, config=SolveConfig(tol=1e-7))
        assert rep.converged
        assert rep.extras["final_consensus"] <= rep.threshold


class TestSolveDistributed:
    def test_zero_problem_converges_immediately(self):
        p = SdpProblem(C=np.zeros((2, 2)), A=[np.zeros((2, 2))], b=[0.0])
        d = assemble(p, [Clique(vertices=(1, 2), index=0)])
        rep = solve_distributed(d)
        assert rep.converged and rep.iterations == 0

    def test_analytic_instance(self):
        p = SdpProblem(C=np.diag([3.0, 1.0, 2.0]), A=[np.eye(3)], b=[1.0])
        d = assemble(p, [Clique(vertices=(1, 2, 3), index=0)])
        rep = solve_distributed(d, config=SolveConfig(tol=1e-7))
        assert rep.converged
        assert rep.final_objective == pytest.approx(1.0, abs=1e-4)

    def test_cross_solver_agreement_small(self):
        d = small_banded(seed=7, N=3, n=3)
        cfg = SolveConfig(tol=1e-8)
        rs = solve(d, cfg)
        rd = solve_distributed(d, config=cfg)
        assert rs.converged and rd.converged
        assert rd.final_objective == pytest.approx(rs.final_objective, rel=1e-5)

    def test_conservation_of_auxiliary_sums(self):
        d = small_banded(seed=8, N=4)
        rep = solve_distributed(d, config=SolveConfig(tol=1e-6, record_every=5))
        assert rep.conservation_z.max() <= 1e-12
        assert rep.conservation_y.max() <= 1e-12

    def test_cone_membership_after_phase_one(self):
        d = small_banded(seed=9)
        agents = build_agents(d)
        for _ in range(20):
            run_round(agents)
            for a in agents:
                xi = mat(a.x)
                w, _ = eigh(xi)
                assert w[0] >= -1e-9 * (1.0 + np.linalg.norm(xi))

    def test_fixed_point_implies_kkt_with_any_copy(self):
        d = small_banded(seed=10, N=2, n=3)
        rep = solve_distributed(
            d, config=SolveConfig(tol=1e-300, max_iter=300000, step_tol=1e-12)
        )
        assert rep.termination == "step_converged"
        states = rep.extras["agent_states"]
        gaps = [np.abs(states[0].nu - s.nu).max() for s in states[1:]]
        assert max(gaps, default=0.0) <= 1e-8
        r = kkt_residual(d, rep.x, states[0].nu, states[0].lam)
        assert max(r) <= 1e-8

    def test_deterministic_bitwise(self):
        d = small_banded(seed=11)
        cfg = SolveConfig(tol=1e-6)
        r1 = solve_distributed(d, config=cfg)
        r2 = solve_distributed(d, config=cfg)
        assert r1.iterations == r2.iterations
        assert np.array_equal(r1.x, r2.x)
        assert np.array_equal(r1.r_consensus, r2.r_consensus)

    def test_parallel_matches_sequential(self):
        d = small_banded(seed=12)
        r_seq = solve_distributed(d, config=SolveConfig(tol=1e-6))
        r_par = solve_distributed(d, config=SolveConfig(tol=1e-6, parallel=True))
        assert r_seq.iterations == r_par.iterations
        assert np.array_equal(r_seq.x, r_par.x)

    def test_trace_has_consensus_column(self):
        d = small_banded(seed=13)
        rep = solve_distributed(d, config=SolveConfig(tol=1e-5))
        assert rep.r_consensus is not None
        assert rep.r_consensus.size == rep.trace_iters.size
