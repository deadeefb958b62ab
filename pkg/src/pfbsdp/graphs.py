"""Sparsity-pattern graphs: chordality, chordal extension, cliques, clique graph.

Vertices are labeled ``1..n`` throughout, matching the problem-file convention.
Clique (agent) indices are 0-based positions in the canonical, lexicographically
sorted clique list.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DisconnectedCliqueGraph,
    DisconnectedGraph,
    IndexOutOfRange,
    NotChordal,
)


class PatternGraph:
    """Undirected graph on vertices ``1..n`` with positive edge weights."""

    def __init__(self, n, edges, weights=None):
        n = int(n)
        if n < 1:
            raise ValueError("vertex count must be at least 1")
        adj = [set() for _ in range(n + 1)]
        norm = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if not (1 <= i <= n and 1 <= j <= n):
                raise IndexOutOfRange(f"edge ({i},{j}) outside 1..{n}")
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            e = (i, j) if i < j else (j, i)
            norm.add(e)
            adj[e[0]].add(e[1])
            adj[e[1]].add(e[0])
        self.n = n
        self.edges = frozenset(norm)
        self._adj = tuple(frozenset(s) for s in adj)
        w = {}
        for e in norm:
            w[e] = 1.0
        if weights:
            for (i, j), val in weights.items():
                e = (i, j) if i < j else (j, i)
                if e not in norm:
                    raise ValueError(f"weight given for non-edge {e}")
                if not val > 0:
                    raise ValueError(f"edge weight must be positive, got {val}")
                w[e] = float(val)
        self.weights = w

    def neighbors(self, i):
        return self._adj[i]

    def has_edge(self, i, j):
        return j in self._adj[i]

    def degree(self, i):
        return len(self._adj[i])

    def is_connected(self):
        seen = {1}
        stack = [1]
        while stack:
            v = stack.pop()
            for u in self._adj[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return len(seen) == self.n

    def __eq__(self, other):
        return (
            isinstance(other, PatternGraph)
            and self.n == other.n
            and self.edges == other.edges
        )

    def __repr__(self):
        return f"PatternGraph(n={self.n}, edges={len(self.edges)})"


@dataclass(frozen=True)
class Clique:
    """A maximal clique, holding its sorted vertex list and agent index."""

    vertices: tuple
    index: int

    def __post_init__(self):
        if not self.vertices:
            raise ValueError("clique must be nonempty")
        if any(a >= b for a, b in zip(self.vertices, self.vertices[1:])):
            raise ValueError("clique vertices must be strictly increasing")

    @property
    def size(self):
        return len(self.vertices)


def mcs_order(g):
    """Maximum-cardinality-search visit order with lowest-index tie-breaking."""
    if not g.is_connected():
        raise DisconnectedGraph("maximum cardinality search requires a connected graph")
    weight = [0] * (g.n + 1)
    numbered = [False] * (g.n + 1)
    order = []
    for _ in range(g.n):
        best, best_w = 0, -1
        for v in range(1, g.n + 1):
            if not numbered[v] and weight[v] > best_w:
                best, best_w = v, weight[v]
        order.append(best)
        numbered[best] = True
        for u in g.neighbors(best):
            if not numbered[u]:
                weight[u] += 1
    return order


def _is_peo(g, order):
    """True when each vertex's already-visited neighbors form a clique.

    Equivalently, the reversed visit order is a perfect elimination ordering.
    Only the latest-visited earlier neighbor needs checking against the rest.
    """
    pos = {v: k for k, v in enumerate(order)}
    for v in order:
        earlier = [u for u in g.neighbors(v) if pos[u] < pos[v]]
        if len(earlier) <= 1:
            continue
        parent = max(earlier, key=pos.__getitem__)
        for u in earlier:
            if u != parent and not g.has_edge(parent, u):
                return False
    return True


def is_chordal(g):
    """Chordality test: the MCS order must be a perfect elimination ordering."""
    return _is_peo(g, mcs_order(g))


def chordal_extension(g):
    """Chordal supergraph via greedy minimum-degree elimination.

    Chordal input is returned as-is. Fill-in edges recorded during the
    elimination game are added otherwise; ties pick the lowest vertex index,
    so the result is deterministic. Minimum fill-in is NP-complete, so no
    optimality is claimed.
    """
    if is_chordal(g):
        return g
    adj = {v: set(g.neighbors(v)) for v in range(1, g.n + 1)}
    fill = set()
    remaining = set(range(1, g.n + 1))
    while remaining:
        v = min(remaining, key=lambda u: (len(adj[u]), u))
        nbrs = sorted(adj[v])
        for a_i, a in enumerate(nbrs):
            for b in nbrs[a_i + 1:]:
                if b not in adj[a]:
                    fill.add((a, b))
                    adj[a].add(b)
                    adj[b].add(a)
        for u in nbrs:
            adj[u].discard(v)
        remaining.discard(v)
        del adj[v]
    return PatternGraph(g.n, set(g.edges) | fill, weights=g.weights)


def maximal_cliques(g):
    """All maximal cliques of a chordal graph, lexicographically sorted.

    Candidates come from the MCS order: each vertex together with its
    already-visited neighbors; non-maximal candidates are dropped. A chordal
    graph yields at most ``n`` cliques this way.
    """
    order = mcs_order(g)
    if not _is_peo(g, order):
        raise NotChordal("maximal clique enumeration requires a chordal graph")
    pos = {v: k for k, v in enumerate(order)}
    candidates = []
    for v in order:
        c = {u for u in g.neighbors(v) if pos[u] < pos[v]}
        c.add(v)
        candidates.append(c)
    maximal = []
    for c in candidates:
        if not any(other > c for other in candidates if other is not c):
            maximal.append(tuple(sorted(c)))
    maximal.sort()
    return [Clique(vertices=verts, index=k) for k, verts in enumerate(maximal)]


class CliqueGraph:
    """Clique intersection graph: overlaps, weights, and weighted Laplacian.

    Nodes are clique indices ``0..N-1``; an edge joins every pair of cliques
    with a nonempty vertex overlap. The Laplacian ``L = Delta - W`` hosts the
    consensus coupling of the distributed solver.
    """

    def __init__(self, cliques, neighbors, overlaps, weights, laplacian):
        self.cliques = tuple(cliques)
        self.neighbors = neighbors
        self.overlaps = overlaps
        self.weights = weights
        self.laplacian = laplacian
        self.degrees = np.asarray(laplacian).diagonal().copy()

    @property
    def n_cliques(self):
        return len(self.cliques)

    @property
    def edge_pairs(self):
        return sorted(self.overlaps)

    def overlap(self, i, j):
        key = (i, j) if i < j else (j, i)
        return self.overlaps[key]

    def weight(self, i, j):
        key = (i, j) if i < j else (j, i)
        return self.weights[key]

    def __repr__(self):
        return f"CliqueGraph(cliques={self.n_cliques}, edges={len(self.overlaps)})"


def clique_graph(cliques, weight_rule=None):
    """Assemble the clique intersection graph with its weighted Laplacian.

    ``weight_rule(clique_i, clique_j, overlap) -> positive float`` defaults to
    uniform unit weights. Raises ``DisconnectedCliqueGraph`` when the
    intersection graph is not connected.
    """
    n = len(cliques)
    if n == 0:
        raise ValueError("need at least one clique")
    vsets = [set(c.vertices) for c in cliques]
    overlaps = {}
    weights = {}
    neighbors = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            ov = vsets[i] & vsets[j]
            if not ov:
                continue
            ov = tuple(sorted(ov))
            w = 1.0 if weight_rule is None else float(weight_rule(cliques[i], cliques[j], ov))
            if not w > 0:
                raise ValueError(f"weight rule returned non-positive weight for ({i},{j})")
            overlaps[(i, j)] = ov
            weights[(i, j)] = w
            neighbors[i].append(j)
            neighbors[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for u in neighbors[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    if len(seen) != n:
        raise DisconnectedCliqueGraph(
            f"clique intersection graph has {n - len(seen)} unreachable cliques"
        )
    lap = np.zeros((n, n))
    for (i, j), w in weights.items():
        lap[i, j] -= w
        lap[j, i] -= w
        lap[i, i] += w
        lap[j, j] += w
    return CliqueGraph(
        cliques=cliques,
        neighbors=tuple(tuple(sorted(nb)) for nb in neighbors),
        overlaps=overlaps,
        weights=weights,
        laplacian=lap,
    )
