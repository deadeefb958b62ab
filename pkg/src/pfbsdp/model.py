"""SDP problem container, aggregate sparsity pattern, and assumption checks.

Also owns the problem-file schema: a JSON document with fields ``n``, ``m``,
``b``, and ``C``/``A[k]`` as sorted ``(row, col, value)`` triplets over the
upper triangle with 1-based indices. Writers are byte-reproducible.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .graphs import PatternGraph, chordal_extension, maximal_cliques
from .symm import as_symmetric


@dataclass
class SdpProblem:
    """Standard primal form: minimize <C,X> s.t. <A_k,X> = b_k, X PSD."""

    C: np.ndarray
    A: list
    b: np.ndarray

    def __post_init__(self):
        self.C = as_symmetric(self.C)
        self.A = [as_symmetric(a) for a in self.A]
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        n = self.C.shape[0]
        for k, a in enumerate(self.A):
            if a.shape != (n, n):
                raise DimensionMismatch(
                    f"constraint matrix {k} has shape {a.shape}, expected ({n},{n})"
                )
        if len(self.A) != self.b.size:
            raise DimensionMismatch(
                f"{len(self.A)} constraint matrices but {self.b.size} right-hand sides"
            )

    @property
    def n(self):
        return self.C.shape[0]

    @property
    def m(self):
        return len(self.A)


@dataclass(frozen=True)
class AggregatePattern:
    """Union of the supports of C and all A_k.

    ``graph`` holds the off-diagonal support as edges; ``diagonal`` the set of
    vertices with a nonzero diagonal entry in some data matrix.
    """

    graph: PatternGraph
    diagonal: frozenset

    @property
    def entries(self):
        """All support entries (i, j) with i <= j, diagonal included."""
        return sorted(set(self.graph.edges) | {(i, i) for i in self.diagonal})


def aggregate_pattern(problem, zero_tol=0.0):
    """Aggregate sparsity pattern, using ``|entry| > zero_tol`` as the nonzero test.

    The default keeps exact structural zeros; a positive tolerance sparsifies
    externally loaded data.
    """
    support = np.zeros((problem.n, problem.n), dtype=bool)
    for m in [problem.C, *problem.A]:
        support |= np.abs(m) > zero_tol
    edges = set()
    diagonal = set()
    idx = np.argwhere(support)
    for i, j in idx:
        if i < j:
            edges.add((int(i) + 1, int(j) + 1))
        elif i == j:
            diagonal.add(int(i) + 1)
    return AggregatePattern(graph=PatternGraph(problem.n, edges), diagonal=frozenset(diagonal))


@dataclass
class ValidationReport:
    """Outcome of the standing-assumption checks; empty violations means pass."""

    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations


def pivoted_rank(a, rel_tol=1e-10):
    """Matrix rank by elimination with full pivoting.

    A pivot counts while it exceeds ``rel_tol`` times the largest (first)
    pivot.
    """
    a = np.array(a, dtype=float)
    if a.size == 0:
        return 0
    m, n = a.shape
    rank = 0
    largest = None
    while rank < min(m, n):
        sub = np.abs(a[rank:, rank:])
        flat = int(np.argmax(sub))
        i, j = divmod(flat, sub.shape[1])
        piv = sub[i, j]
        if largest is None:
            largest = piv
        if piv == 0.0 or piv <= rel_tol * largest:
            break
        a[[rank, rank + i]] = a[[rank + i, rank]]
        a[:, [rank, rank + j]] = a[:, [rank + j, rank]]
        a[rank + 1:] -= np.outer(a[rank + 1:, rank] / a[rank, rank], a[rank])
        rank += 1
    return rank


def validate(problem, pattern, cliques=None):
    """Check the structural assumptions behind the decomposition.

    Reports (never raises): data symmetry, pattern connectivity, and, per
    clique, linear independence of the split constraint matrices via the rank
    of the stacked ``m x n_i**2`` matrix. When ``cliques`` is omitted they are
    derived from the chordal extension of the pattern; the independence check
    is skipped for disconnected patterns.
    """
    from .decompose import split_data

    report = ValidationReport()
    for name, m in [("C", problem.C)] + [
        (f"A[{k + 1}]", a) for k, a in enumerate(problem.A)
    ]:
        if not np.array_equal(m, m.T):
            report.violations.append(f"{name} is not symmetric")
    connected = pattern.graph.is_connected()
    if not connected:
        report.violations.append(
            "aggregate sparsity pattern is disconnected"
        )
    if cliques is None:
        if not connected:
            return report
        cliques = maximal_cliques(chordal_extension(pattern.graph))
    if problem.m == 0:
        return report
    _, a_split = split_data(problem, cliques)
    for i, mats in enumerate(a_split):
        stacked = np.stack([m.reshape(-1) for m in mats])
        r = pivoted_rank(stacked)
        if r < problem.m:
            report.violations.append(
                f"constraint matrices for clique {i} have rank {r} < m={problem.m}"
            )
    return report


def _triplets(matrix):
    """Sorted 1-based upper-triangle (row, col, value) triplets of nonzeros."""
    out = []
    n = matrix.shape[0]
    for i in range(n):
        for j in range(i, n):
            v = matrix[i, j]
            if v != 0.0:
                out.append([i + 1, j + 1, float(v)])
    return out


def _from_triplets(triplets, n, name):
    m = np.zeros((n, n))
    for t in triplets:
        if len(t) != 3:
            raise ValueError(f"{name}: triplet {t!r} must be (row, col, value)")
        r, c, v = int(t[0]), int(t[1]), float(t[2])
        if not (1 <= r <= c <= n):
            raise ValueError(f"{name}: triplet index ({r},{c}) outside upper triangle of 1..{n}")
        m[r - 1, c - 1] = v
        m[c - 1, r - 1] = v
    return m


def problem_to_dict(problem):
    return {
        "n": problem.n,
        "m": problem.m,
        "b": [float(v) for v in problem.b],
        "C": _triplets(problem.C),
        "A": [_triplets(a) for a in problem.A],
    }


def problem_from_dict(doc):
    n = int(doc["n"])
    m = int(doc["m"])
    b = np.asarray(doc["b"], dtype=float)
    if b.size != m:
        raise ValueError(f"field m={m} does not match len(b)={b.size}")
    c = _from_triplets(doc["C"], n, "C")
    if len(doc["A"]) != m:
        raise ValueError(f"field m={m} does not match len(A)={len(doc['A'])}")
    a = [_from_triplets(t, n, f"A[{k + 1}]") for k, t in enumerate(doc["A"])]
    return SdpProblem(C=c, A=a, b=b)


def save_problem(problem, path):
    """Write the JSON problem file; identical problems produce identical bytes."""
    with open(path, "w", newline="\n") as fh:
        json.dump(problem_to_dict(problem), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_problem(path):
    with open(path) as fh:
        return problem_from_dict(json.load(fh))
