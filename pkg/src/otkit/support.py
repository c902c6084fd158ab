"""Support management: which transport variables may be nonzero.

The support (set ``index``) is grown by reduced-cost pricing and shrunk
by dropping variables with small primal values near convergence. Partial
pricing scans only the precomputed candidate set J of variables whose
cost is below C_max; a full scan refreshes it periodically.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .instance import CostView, OTInstance

log = logging.getLogger(__name__)

PRICING_CHUNK = 1 << 20


class SupportError(RuntimeError):
    pass


@dataclass
class Support:
    """Sorted variable index set plus the pricing candidate set J."""

    index: np.ndarray          # sorted, unique flat variable indices
    m: int
    n: int
    J: np.ndarray              # candidate indices with c(j) < C_max
    J_k1: np.ndarray
    J_k2: np.ndarray
    J_cost: np.ndarray
    refresh_period: int = 3
    # incidence counts of support variables per row / column, used to veto
    # removals that would leave a constraint row without any variable
    _row_count: np.ndarray = field(default=None, repr=False)
    _col_count: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.index = np.unique(np.asarray(self.index, dtype=np.int64))
        if self.index.size < 1:
            raise SupportError("support must be nonempty")
        if self.index[0] < 0 or self.index[-1] >= self.m * self.n:
            raise SupportError("support index out of range")
        if self._row_count is None:
            self._row_count = np.bincount(self.index % self.m, minlength=self.m)
            self._col_count = np.bincount(self.index // self.m, minlength=self.n)

    @property
    def psi(self):
        return self.index.size

    @property
    def k1(self):
        return self.index % self.m

    @property
    def k2(self):
        return self.index // self.m

    def membership_mask(self):
        mask = np.zeros(self.m * self.n, dtype=bool)
        mask[self.index] = True
        return mask


def candidate_set(view: CostView):
    """All variables with cost strictly below C_max, with cached endpoints."""
    m, n = view.m, view.n
    cmax = view.c_max_threshold
    js, costs = [], []
    for start in range(0, m * n, PRICING_CHUNK):
        j = np.arange(start, min(start + PRICING_CHUNK, m * n))
        c = view.c(j)
        keep = c < cmax
        js.append(j[keep])
        costs.append(c[keep])
    J = np.concatenate(js) if js else np.empty(0, dtype=np.int64)
    Jc = np.concatenate(costs) if costs else np.empty(0)
    return J, J % m, J // m, Jc


def initial_support(inst: OTInstance, target_multiplier=5.0, refresh_period=3,
                    c_max=None) -> Support:
    """Lowest-cost variables, roughly target_multiplier*(m+n-1) of them.

    Ties are broken by smaller variable index; rows and columns left
    uncovered by the cheap set are repaired with their cheapest variable.
    """
    if not 3.0 <= target_multiplier <= 10.0:
        raise ValueError("target_multiplier must lie in [3, 10]")
    m, n = inst.m, inst.n
    view = inst.cost_view(c_max=c_max)
    target = min(m * n, int(round(target_multiplier * (m + n - 1))))

    # full cost scan once, chunked; keep a running pool of best candidates
    best_j = None
    best_c = None
    for start in range(0, m * n, PRICING_CHUNK):
        j = np.arange(start, min(start + PRICING_CHUNK, m * n))
        c = np.asarray(view.c(j), dtype=float)
        if best_j is not None:
            j = np.concatenate((best_j, j))
            c = np.concatenate((best_c, c))
        if j.size > target:
            # stable sort on cost: ties resolved by ascending index
            order = np.argsort(c, kind="stable")[:target]
            order.sort()
            j, c = j[order], c[order]
        else:
            order = np.argsort(c, kind="stable")
            order.sort()
            j, c = j[order], c[order]
        best_j, best_c = j, c

    index = set(best_j.tolist())

    # coverage repair: every source row and sink column needs one variable
    covered_rows = np.zeros(m, dtype=bool)
    covered_cols = np.zeros(n, dtype=bool)
    covered_rows[best_j % m] = True
    covered_cols[best_j // m] = True
    for i in np.flatnonzero(~covered_rows):
        row_js = i + m * np.arange(n)
        index.add(int(row_js[np.argmin(view.c(row_js))]))
    for k in np.flatnonzero(~covered_cols):
        col_js = k * m + np.arange(m)
        index.add(int(col_js[np.argmin(view.c(col_js))]))

    J, Jk1, Jk2, Jc = candidate_set(view)
    return Support(
        index=np.fromiter(index, dtype=np.int64),
        m=m,
        n=n,
        J=J,
        J_k1=Jk1,
        J_k2=Jk2,
        J_cost=Jc,
        refresh_period=refresh_period,
    )


def _select_entering(rc, j, member_mask, limit):
    """Most negative reduced costs not already in the support."""
    neg = (rc < 0) & ~member_mask[j]
    if not np.any(neg):
        return np.empty(0, dtype=np.int64)
    rc, j = rc[neg], j[neg]
    if j.size > limit:
        part = np.argpartition(rc, limit - 1)[:limit]
        rc, j = rc[part], j[part]
    order = np.lexsort((j, rc))
    return j[order].astype(np.int64)


def full_reduced_costs(y, inst: OTInstance, support: Support, view: CostView):
    """Up to m entering candidates from a full reduced-cost scan.

    Sorted ascending by reduced cost c(j) - y[k1] - y[m + k2], ties by index.
    """
    m, n = inst.m, inst.n
    y = np.asarray(y, dtype=float)
    if y.shape != (m + n,):
        raise ValueError("multiplier y has wrong length")
    mask = support.membership_mask()
    cands_j, cands_rc = [], []
    for start in range(0, m * n, PRICING_CHUNK):
        j = np.arange(start, min(start + PRICING_CHUNK, m * n))
        rc = np.asarray(view.c(j), dtype=float) - y[j % m] - y[m + j // m]
        sel = _select_entering(rc, j, mask, m)
        if sel.size:
            cands_j.append(sel)
            cands_rc.append(view.c(sel) - y[sel % m] - y[m + sel // m])
    if not cands_j:
        return np.empty(0, dtype=np.int64)
    j = np.concatenate(cands_j)
    rc = np.concatenate(cands_rc)
    order = np.lexsort((j, rc))[: m]
    return j[order]


def heuristic_reduced_costs(y, inst: OTInstance, support: Support):
    """Same contract as full_reduced_costs but scanning only J."""
    m = inst.m
    y = np.asarray(y, dtype=float)
    rc = support.J_cost - y[support.J_k1] - y[m + support.J_k2]
    return _select_entering(rc, support.J, support.membership_mask(), m)


class _DSU:
    """Union-find over the m + n bipartite graph nodes."""

    def __init__(self, size):
        self.parent = list(range(size))

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        self.parent[rx] = ry
        return True


def _connectivity_filtered_removals(index, entering, candidates, p_red, m, n,
                                    limit):
    """Positions in `index` that can leave without splitting the support graph.

    Candidates are considered in decreasing primal order; a candidate edge
    is kept (vetoed) when the other edges do not already connect its two
    endpoints, so the set of removals leaves the number of connected
    components unchanged. At most `limit` removals, smallest primal first.
    """
    if candidates.size == 0:
        return []
    cand_mask = np.zeros(index.size, dtype=bool)
    cand_mask[candidates] = True

    dsu = _DSU(m + n)
    fixed = index[~cand_mask]
    for k1, k2 in zip(fixed % m, fixed // m):
        dsu.union(int(k1), m + int(k2))
    for j in entering:
        dsu.union(int(j % m), m + int(j // m))

    order = candidates[np.argsort(-p_red[candidates], kind="stable")]
    removable = []
    for pos in order:
        j = int(index[pos])
        if dsu.union(j % m, m + j // m):
            log.debug("removal of variable %d vetoed (connectivity)", j + 1)
        else:
            removable.append(int(pos))
    # removable is sorted by decreasing p; keep the smallest-p `limit` edges
    return sorted(removable[-limit:]) if len(removable) > limit else sorted(removable)


def update_support(support: Support, entering, p_red, s_red, mu,
                   near_convergence=False, removal_threshold=0.0):
    """Apply one support update.

    Entering variables are appended with p = s = sqrt(mu); when
    near_convergence, up to m variables with p below removal_threshold
    leave. A removal is vetoed when it would disconnect the bipartite
    support graph (which would make the reduced constraint matrix lose
    rank beyond its structural deficiency of 1).
    Returns (support', p_red', s_red', entered, removed).
    """
    m, n = support.m, support.n
    entering = np.asarray(entering, dtype=np.int64)
    if entering.size > m:
        raise SupportError("at most m variables may enter per update")
    mask = support.membership_mask()
    entering = entering[~mask[entering]]

    index = support.index
    row_count = support._row_count.copy()
    col_count = support._col_count.copy()

    removed = []
    if near_convergence and removal_threshold > 0.0:
        small = np.flatnonzero(p_red < removal_threshold)
        removed = _connectivity_filtered_removals(
            index, entering, small, p_red, m, n, limit=m)
        for pos in removed:
            j = index[pos]
            row_count[j % m] -= 1
            col_count[j // m] -= 1

    keep = np.ones(index.size, dtype=bool)
    if removed:
        keep[np.array(removed)] = False
    new_index = np.concatenate((index[keep], entering))
    order = np.argsort(new_index)
    new_index = new_index[order]

    root = np.sqrt(mu)
    new_p = np.concatenate((p_red[keep], np.full(entering.size, root)))[order]
    new_s = np.concatenate((s_red[keep], np.full(entering.size, root)))[order]

    if entering.size:
        row_count += np.bincount(entering % m, minlength=m)
        col_count += np.bincount(entering // m, minlength=n)

    new_support = Support(
        index=new_index,
        m=m,
        n=n,
        J=support.J,
        J_k1=support.J_k1,
        J_k2=support.J_k2,
        J_cost=support.J_cost,
        refresh_period=support.refresh_period,
        _row_count=row_count,
        _col_count=col_count,
    )
    removed_idx = index[~keep]
    return new_support, new_p, new_s, entering, removed_idx
