"""Graph machinery for verifying the chordality structure of the solver.

The sparsity pattern of the Schur complement equals the pattern of the
product of the support's biadjacency matrix with its transpose, i.e. the
adjacency of the "secondary" graph connecting two sources whenever a
2-path joins them through a shared sink. When every cycle of length 8 or
more in the bipartite support graph has a chord, the secondary graph is
chordal and its Cholesky factor admits a zero-fill ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


CYCLE_NODE_CAP = 24


@dataclass(frozen=True)
class BipartiteGraph:
    """Bipartite graph given by its biadjacency nonzero pattern."""

    m: int
    n: int
    edges: tuple  # ((left, right), ...)

    def __post_init__(self):
        seen = set()
        for l, r in self.edges:
            if not (0 <= l < self.m and 0 <= r < self.n):
                raise ValueError(f"edge ({l}, {r}) out of range")
            if (l, r) in seen:
                raise ValueError(f"duplicate edge ({l}, {r})")
            seen.add((l, r))

    @classmethod
    def from_biadjacency(cls, M):
        M = np.asarray(M)
        rows, cols = np.nonzero(M)
        return cls(M.shape[0], M.shape[1], tuple(zip(rows.tolist(), cols.tolist())))

    def right_neighbors(self):
        nbrs = [[] for _ in range(self.n)]
        for l, r in self.edges:
            nbrs[r].append(l)
        return nbrs

    def left_neighbors(self):
        nbrs = [[] for _ in range(self.m)]
        for l, r in self.edges:
            nbrs[l].append(r)
        return nbrs

    def transpose(self):
        return BipartiteGraph(self.n, self.m, tuple((r, l) for l, r in self.edges))


@dataclass(frozen=True)
class SecondaryGraph:
    """Undirected graph on the left nodes; i ~ k iff a 2-path joins them."""

    node_count: int
    edges: frozenset  # frozenset of frozenset pairs {i, k}, i != k

    def adjacency_sets(self):
        adj = [set() for _ in range(self.node_count)]
        for e in self.edges:
            i, k = tuple(e)
            adj[i].add(k)
            adj[k].add(i)
        return adj


def secondary_graph(g: BipartiteGraph) -> SecondaryGraph:
    """Connect left nodes sharing at least one right neighbor."""
    edges = set()
    for group in g.right_neighbors():
        group = sorted(set(group))
        for ai in range(len(group)):
            for bi in range(ai + 1, len(group)):
                edges.add(frozenset((group[ai], group[bi])))
    return SecondaryGraph(g.m, frozenset(edges))


def _mcs_order(adj):
    """Maximum cardinality search; returns vertices in elimination order.

    For a chordal graph the returned order is a perfect elimination
    ordering (eliminate position 0 first).
    """
    n = len(adj)
    weight = [0] * n
    visited = [False] * n
    visit_order = []
    for _ in range(n):
        v = max(
            (u for u in range(n) if not visited[u]),
            key=lambda u: (weight[u], -u),
        )
        visited[v] = True
        visit_order.append(v)
        for u in adj[v]:
            if not visited[u]:
                weight[u] += 1
    visit_order.reverse()
    return visit_order


def _verify_peo(adj, order):
    """Check that `order` is a perfect elimination ordering."""
    n = len(adj)
    pos = {v: i for i, v in enumerate(order)}
    for v in order:
        later = [u for u in adj[v] if pos[u] > pos[v]]
        if len(later) < 2:
            continue
        u = min(later, key=lambda x: pos[x])
        for w in later:
            if w != u and w not in adj[u]:
                return False, (v, u, w)
    return True, None


def _find_hole(adj):
    """A chordless cycle of length >= 4 in a non-chordal graph."""
    from collections import deque

    n = len(adj)
    for v in range(n):
        nbrs = sorted(adj[v])
        for ai in range(len(nbrs)):
            for bi in range(ai + 1, len(nbrs)):
                u, w = nbrs[ai], nbrs[bi]
                if u in adj[w]:
                    continue
                # shortest u-w path avoiding v and the rest of N(v)
                blocked = set(adj[v]) | {v}
                blocked.discard(u)
                blocked.discard(w)
                prev = {u: None}
                dq = deque([u])
                while dq:
                    x = dq.popleft()
                    if x == w:
                        break
                    for y in adj[x]:
                        if y not in blocked and y not in prev:
                            prev[y] = x
                            dq.append(y)
                if w in prev:
                    path = [w]
                    while path[-1] is not None and prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    path.append(v)
                    return path
    return None


def is_chordal(g):
    """(flag, witness): a PEO when chordal, else a chordless >= 4 cycle.

    Accepts a SecondaryGraph or a list of adjacency sets.
    """
    adj = g.adjacency_sets() if isinstance(g, SecondaryGraph) else [set(s) for s in g]
    order = _mcs_order(adj)
    ok, _ = _verify_peo(adj, order)
    if ok:
        return True, order
    hole = _find_hole(adj)
    return False, hole


def zero_fill_verify(pattern, peo):
    """True iff symbolic elimination under `peo` creates no fill-in.

    `pattern` is a symmetric sparsity pattern given as a list of
    adjacency sets (or a SecondaryGraph); eliminating vertices in `peo`
    order connects each vertex's not-yet-eliminated neighbors pairwise,
    and the check is that every such pair is already adjacent.
    """
    adj = (pattern.adjacency_sets() if isinstance(pattern, SecondaryGraph)
           else [set(s) for s in pattern])
    if sorted(peo) != list(range(len(adj))):
        raise ValueError("ordering must be a permutation of the vertices")
    pos = {v: i for i, v in enumerate(peo)}
    for v in peo:
        later = [u for u in adj[v] if pos[u] > pos[v]]
        for ai in range(len(later)):
            for bi in range(ai + 1, len(later)):
                if later[bi] not in adj[later[ai]]:
                    return False
    return True


def has_chordless_cycle_ge8(g: BipartiteGraph):
    """(flag, witness cycle) by exhaustive chordless-cycle enumeration.

    Test-facing: refuses graphs with more than CYCLE_NODE_CAP nodes.
    """
    if g.m + g.n > CYCLE_NODE_CAP:
        raise ValueError(f"graph too large for cycle enumeration (> {CYCLE_NODE_CAP} nodes)")
    # single node space: left nodes 0..m-1, right nodes m..m+n-1
    total = g.m + g.n
    adj = [set() for _ in range(total)]
    for l, r in g.edges:
        adj[l].add(g.m + r)
        adj[g.m + r].add(l)

    # DFS over chordless paths; start at the smallest vertex of the cycle
    for start in range(total):
        stack = [(start, [start], {start})]
        while stack:
            v, path, inpath = stack.pop()
            for u in sorted(adj[v]):
                if u < start:
                    continue
                if u == start:
                    # chords back to start from interior vertices were
                    # tolerated during extension; rule them out now
                    if (len(path) >= 8 and path[1] < path[-1]
                            and not any(start in adj[w] for w in path[2:-1])):
                        return True, path
                    continue
                if u in inpath:
                    continue
                # chordless extension: among the path's interior, u may
                # touch only the previous vertex (start is checked at close)
                if any(w in adj[u] for w in path[1:-1]):
                    continue
                stack.append((u, path + [u], inpath | {u}))
    return False, None
