"""Clique-tree conversion of a sparse SDP into coupled small-cone problems.

Produces, per clique (agent), the split cost and constraint data in vectorized
form, plus the consistency constraints that force overlapping submatrix
entries to agree. Data entries are split by exclusive owner assignment: each
pattern entry belongs to the lowest-index clique containing both endpoints.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    OverlapMismatch,
    UncoveredEntry,
)
from .graphs import clique_graph, chordal_extension, maximal_cliques
from .model import aggregate_pattern
from .symm import proj_psd_blocks, vec


@dataclass(frozen=True)
class SelectionMatrix:
    """0/1 entry selection matrix picking the principal submatrix of a clique."""

    rows: tuple
    n: int

    def __post_init__(self):
        if not self.rows:
            raise ValueError("selection must pick at least one row")
        if any(a >= b for a, b in zip(self.rows, self.rows[1:])):
            raise ValueError("selected rows must be strictly increasing")
        if self.rows[0] < 1 or self.rows[-1] > self.n:
            raise IndexOutOfRange(
                f"selected rows {self.rows} outside 1..{self.n}"
            )

    def dense(self):
        p = np.zeros((len(self.rows), self.n))
        for h, k in enumerate(self.rows):
            p[h, k - 1] = 1.0
        return p

    def extract(self, x):
        """P X P^T: the principal submatrix indexed by the clique."""
        idx = np.asarray(self.rows) - 1
        return x[np.ix_(idx, idx)]

    def lift(self, sub):
        """P^T X_i P: place a submatrix back into the ambient space."""
        idx = np.asarray(self.rows) - 1
        out = np.zeros((self.n, self.n))
        out[np.ix_(idx, idx)] = sub
        return out


def selection_matrix(clique, n):
    return SelectionMatrix(rows=tuple(clique.vertices), n=n)


@dataclass
class AgentData:
    """One clique's share of the decomposed problem, in vectorized form."""

    index: int
    clique: object
    n_i: int
    c_i: np.ndarray
    A_i: sp.csr_matrix
    D_i: sp.csr_matrix


@dataclass(frozen=True)
class ConsistencyBlock:
    """Consistency rows for one overlapping clique pair (i < j).

    Row ``r`` (column-major over the overlap submatrix) carries +1 at
    ``cols_i[r]`` within ``x_i`` and -1 at ``cols_j[r]`` within ``x_j``.
    """

    i: int
    j: int
    overlap: tuple
    row_offset: int
    cols_i: np.ndarray
    cols_j: np.ndarray

    @property
    def n_ij(self):
        return len(self.overlap)

    @property
    def n_rows(self):
        return self.n_ij ** 2

    def dense_pair(self, n_i, n_j):
        """Dense (D_ij, D_ji) acting on vec(X_i) and vec(X_j)."""
        d_ij = np.zeros((self.n_rows, n_i * n_i))
        d_ji = np.zeros((self.n_rows, n_j * n_j))
        for r in range(self.n_rows):
            d_ij[r, self.cols_i[r]] = 1.0
            d_ji[r, self.cols_j[r]] = -1.0
        return d_ij, d_ji


@dataclass
class DecomposedSdp:
    """Vector-form multi-agent SDP with stacked coupling matrices."""

    agents: list
    blocks: list
    A: sp.csr_matrix
    D: sp.csr_matrix
    b: np.ndarray
    F: np.ndarray
    offsets: np.ndarray
    sizes: np.ndarray
    n: int
    cliques: list
    cg: object
    owner: dict = field(repr=False)

    @property
    def n_agents(self):
        return len(self.agents)

    @property
    def n_hat(self):
        return int(self.offsets[-1] + self.sizes[-1] ** 2) if self.agents else 0

    @property
    def p(self):
        return self.D.shape[0]

    @property
    def m(self):
        return self.A.shape[0]

    def slice_of(self, i):
        lo = int(self.offsets[i])
        return slice(lo, lo + int(self.sizes[i]) ** 2)

    def agent_vectors(self, x):
        return [x[self.slice_of(i)] for i in range(self.n_agents)]


def _owner_map(cliques):
    """Lowest-index owning clique for every vertex pair covered by a clique."""
    owner = {}
    for c in cliques:
        for a in c.vertices:
            for b in c.vertices:
                if a <= b:
                    owner.setdefault((a, b), c.index)
    return owner


def split_data(problem, cliques):
    """Split C and each A_k into per-clique blocks by owner assignment.

    Every support entry is placed in exactly one clique, so
    ``<C, Q> == sum_i <C_i, Q_i>`` holds for any Q on the pattern. Raises
    ``UncoveredEntry`` if some support entry lies in no clique.
    """
    owner = _owner_map(cliques)
    support = np.zeros((problem.n, problem.n), dtype=bool)
    for m in [problem.C, *problem.A]:
        support |= m != 0.0
    for i, j in np.argwhere(support):
        if i <= j and (int(i) + 1, int(j) + 1) not in owner:
            raise UncoveredEntry(
                f"support entry ({int(i) + 1},{int(j) + 1}) lies in no clique"
            )

    def split_one(m):
        out = []
        for c in cliques:
            n_i = c.size
            block = np.zeros((n_i, n_i))
            for a, p_v in enumerate(c.vertices):
                for b, q_v in enumerate(c.vertices):
                    key = (p_v, q_v) if p_v <= q_v else (q_v, p_v)
                    if owner[key] == c.index:
                        block[a, b] = m[p_v - 1, q_v - 1]
            out.append(block)
        return out

    c_split = split_one(problem.C)
    a_split_by_k = [split_one(a) for a in problem.A]
    # regroup as per-clique lists over k
    a_split = [
        [a_split_by_k[k][i] for k in range(problem.m)] for i in range(len(cliques))
    ]
    return c_split, a_split


def consistency_blocks(cliques, cg):
    """One consistency block per unordered overlapping clique pair.

    Rows are ordered by (i, j) lexicographic, then column-major within the
    overlap submatrix, which fixes the global multiplier indexing.
    """
    pos = [{v: k for k, v in enumerate(c.vertices)} for c in cliques]
    blocks = []
    offset = 0
    for (i, j) in sorted(cg.overlaps):
        ov = cg.overlaps[(i, j)]
        n_ij = len(ov)
        n_i = cliques[i].size
        n_j = cliques[j].size
        cols_i = np.empty(n_ij * n_ij, dtype=np.int64)
        cols_j = np.empty(n_ij * n_ij, dtype=np.int64)
        r = 0
        for b in range(n_ij):
            for a in range(n_ij):
                va, vb = ov[a], ov[b]
                cols_i[r] = pos[i][vb] * n_i + pos[i][va]
                cols_j[r] = pos[j][vb] * n_j + pos[j][va]
                r += 1
        blocks.append(
            ConsistencyBlock(
                i=i, j=j, overlap=ov, row_offset=offset, cols_i=cols_i, cols_j=cols_j
            )
        )
        offset += n_ij * n_ij
    return blocks


def assemble(problem, cliques, cg=None):
    """Build the stacked vector-form problem from a validated clique cover."""
    if cg is None:
        cg = clique_graph(cliques)
    n_agents = len(cliques)
    sizes = np.array([c.size for c in cliques], dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(sizes ** 2)))[:-1]
    n_hat = int(np.sum(sizes ** 2))

    c_split, a_split = split_data(problem, cliques)
    blocks = consistency_blocks(cliques, cg)
    p_total = sum(bl.n_rows for bl in blocks)

    a_rows, a_cols, a_vals = [], [], []
    for i in range(n_agents):
        base = offsets[i]
        for k in range(problem.m):
            blk = a_split[i][k]
            for (r, c_idx) in np.argwhere(blk != 0.0):
                a_rows.append(k)
                a_cols.append(base + c_idx * sizes[i] + r)
                a_vals.append(blk[r, c_idx])
    a_mat = sp.csr_matrix(
        (a_vals, (a_rows, a_cols)), shape=(problem.m, n_hat), dtype=float
    )

    d_rows, d_cols, d_vals = [], [], []
    for bl in blocks:
        for r in range(bl.n_rows):
            d_rows.append(bl.row_offset + r)
            d_cols.append(offsets[bl.i] + bl.cols_i[r])
            d_vals.append(1.0)
            d_rows.append(bl.row_offset + r)
            d_cols.append(offsets[bl.j] + bl.cols_j[r])
            d_vals.append(-1.0)
    d_mat = sp.csr_matrix(
        (d_vals, (d_rows, d_cols)), shape=(p_total, n_hat), dtype=float
    )

    agents = []
    f_parts = []
    for i in range(n_agents):
        c_i = vec(c_split[i])
        f_parts.append(c_i)
        lo = int(offsets[i])
        hi = lo + int(sizes[i]) ** 2
        agents.append(
            AgentData(
                index=i,
                clique=cliques[i],
                n_i=int(sizes[i]),
                c_i=c_i,
                A_i=sp.csr_matrix(a_mat[:, lo:hi]),
                D_i=sp.csr_matrix(d_mat[:, lo:hi]),
            )
        )

    return DecomposedSdp(
        agents=agents,
        blocks=blocks,
        A=a_mat,
        D=d_mat,
        b=problem.b.copy(),
        F=np.concatenate(f_parts) if f_parts else np.zeros(0),
        offsets=offsets,
        sizes=sizes,
        n=problem.n,
        cliques=list(cliques),
        cg=cg,
        owner=_owner_map(cliques),
    )


def decompose_problem(problem, zero_tol=0.0, cliques=None, weight_rule=None):
    """Full pipeline: pattern, chordal extension, cliques, assembly.

    Passing explicit ``cliques`` skips the pattern stage (useful when the
    aggregate pattern is disconnected, e.g. diagonal-only problems treated as
    a single clique).
    """
    if cliques is None:
        pattern = aggregate_pattern(problem, zero_tol)
        extended = chordal_extension(pattern.graph)
        cliques = maximal_cliques(extended)
    cg = clique_graph(cliques, weight_rule=weight_rule)
    return assemble(problem, cliques, cg)


def lift(d, x_matrix):
    """Stack vec(X_i) over all agents for an ambient matrix on the pattern."""
    x_matrix = np.asarray(x_matrix, dtype=float)
    if x_matrix.shape != (d.n, d.n):
        raise DimensionMismatch(
            f"expected ({d.n},{d.n}) matrix, got {x_matrix.shape}"
        )
    parts = []
    for c in d.cliques:
        idx = np.asarray(c.vertices) - 1
        parts.append(vec(x_matrix[np.ix_(idx, idx)]))
    return np.concatenate(parts)


def overlap_disagreement(d, x):
    """Max overlap mismatch: the infinity norm of the consistency rows."""
    if d.p == 0:
        return 0.0
    return float(np.max(np.abs(d.D @ x)))


def reconstruct(d, x, tol=1e-6):
    """Ambient matrix on the (extended) pattern, entries taken from owners.

    Raises ``OverlapMismatch`` when overlapping entries of different agents
    disagree by more than ``tol`` in infinity norm; off-pattern entries are
    zero.
    """
    x = np.asarray(x, dtype=float)
    if x.size != d.n_hat:
        raise DimensionMismatch(f"expected stacked vector of length {d.n_hat}")
    gap = overlap_disagreement(d, x)
    if gap > tol:
        raise OverlapMismatch(
            f"overlap entries disagree by {gap:.3e} > tol {tol:.3e}"
        )
    out = np.zeros((d.n, d.n))
    for i, agent in enumerate(d.agents):
        xi = x[d.slice_of(i)].reshape((agent.n_i, agent.n_i), order="F")
        verts = agent.clique.vertices
        for a, p_v in enumerate(verts):
            for b, q_v in enumerate(verts):
                key = (p_v, q_v) if p_v <= q_v else (q_v, p_v)
                if d.owner[key] == i:
                    out[p_v - 1, q_v - 1] = xi[a, b]
                    out[q_v - 1, p_v - 1] = xi[b, a]
    return (out + out.T) / 2.0


def objective_value(d, x):
    """Decomposed objective sum_i <c_i, x_i> (= <C, X> for consistent x)."""
    return float(np.dot(d.F, x))


def kkt_residual(d, x, nu, lam):
    """Stationarity, equality, and consistency residual norms.

    ``r_stat`` uses the projection characterization of the normal-cone
    inclusion with the constant gradient F; all three vanish exactly at a
    KKT point.
    """
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float).reshape(-1)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if x.size != d.n_hat:
        raise DimensionMismatch(f"x has length {x.size}, expected {d.n_hat}")
    if nu.size != d.m:
        raise DimensionMismatch(f"nu has length {nu.size}, expected {d.m}")
    if lam.size != d.p:
        raise DimensionMismatch(f"lambda has length {lam.size}, expected {d.p}")
    r_eq = float(np.linalg.norm(d.A @ x - d.b)) if d.m else 0.0
    r_cons = float(np.linalg.norm(d.D @ x)) if d.p else 0.0
    grad = d.F.copy()
    if d.m:
        grad += d.A.T @ nu
    if d.p:
        grad += d.D.T @ lam
    proj = proj_psd_blocks(x - grad, d.offsets, d.sizes)
    r_stat = float(np.linalg.norm(x - proj))
    return r_stat, r_eq, r_cons
