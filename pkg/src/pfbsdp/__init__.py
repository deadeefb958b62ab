"""Chordal decomposition of sparse SDPs with preconditioned forward-backward
solvers: a semi-decentralized variant with a central coordinator and a fully
distributed variant over the clique intersection graph."""

from .bench import BandedInstance, BandedSpec, ExperimentConfig, gen_banded, run_experiment, sweep
from .decompose import (
    AgentData,
    ConsistencyBlock,
    DecomposedSdp,
    SelectionMatrix,
    assemble,
    consistency_blocks,
    decompose_problem,
    kkt_residual,
    lift,
    objective_value,
    overlap_disagreement,
    reconstruct,
    selection_matrix,
    split_data,
)
from .distributed import (
    AgentState,
    DistStepSizes,
    RoundMessages,
    build_agents,
    consensus_residual,
    dist_step_sizes,
    local_update_s1,
    local_update_s2,
    run_round,
    solve_distributed,
)
from .graphs import (
    Clique,
    CliqueGraph,
    PatternGraph,
    chordal_extension,
    clique_graph,
    is_chordal,
    maximal_cliques,
    mcs_order,
)
from .model import (
    AggregatePattern,
    SdpProblem,
    ValidationReport,
    aggregate_pattern,
    load_problem,
    save_problem,
    validate,
)
from .semi import SemiState, StepSizes, initial_state, iterate, solve, step_sizes
from .solver_base import SolveConfig, SolveReport
from .symm import as_symmetric, eigh, inner, mat, proj_psd, proj_psd_vec, vec

__version__ = "0.1.0"
