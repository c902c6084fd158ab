"""Reference transportation-simplex solver for desk-scale verification.

Independent of the sparse solver modules: it works on the dense cost
matrix with the classic northwest-corner start and cycle pivoting, and
returns an exact basic optimal solution (a vertex of the transportation
polytope, hence acyclic).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import Explicit, GridMetric, OTInstance

ORACLE_VARIABLE_CAP = 10_000


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReferenceSolution:
    plan: np.ndarray
    objective: float
    vertex: bool
    support_size: int


def dense_cost(inst: OTInstance) -> np.ndarray:
    """Materialize the m x n cost matrix (small instances only)."""
    if isinstance(inst.cost, Explicit):
        return inst.cost.C.copy()
    spec: GridMetric = inst.cost
    pos = spec.positions().astype(float)
    d = np.abs(pos[:, None, :] - pos[None, :, :])
    if spec.metric == "L1":
        return d.sum(axis=2)
    if spec.metric == "L2":
        return np.hypot(d[:, :, 0], d[:, :, 1])
    return d.max(axis=2)


def _northwest_corner(a, b):
    """Initial basic feasible solution with exactly m+n-1 basic cells."""
    m, n = a.size, b.size
    plan = np.zeros((m, n))
    basis = []
    i = j = 0
    ra, rb = a.copy().astype(float), b.copy().astype(float)
    while i < m and j < n:
        t = min(ra[i], rb[j])
        plan[i, j] = t
        basis.append((i, j))
        ra[i] -= t
        rb[j] -= t
        if i == m - 1 and j == n - 1:
            break
        # advance along the exhausted direction; on ties keep a degenerate
        # zero cell so the basis stays a spanning tree
        if (ra[i] <= rb[j] and i < m - 1) or j == n - 1:
            i += 1
        else:
            j += 1
    assert len(basis) == m + n - 1, "northwest corner produced a non-tree basis"
    return plan, basis


def _duals(C, basis, m, n):
    """Solve u_i + v_j = C_ij over the basis spanning tree."""
    adj = [[] for _ in range(m + n)]
    for i, j in basis:
        adj[i].append(m + j)
        adj[m + j].append(i)
    pot = np.full(m + n, np.nan)
    pot[0] = 0.0
    stack = [0]
    cost_of = {}
    for i, j in basis:
        cost_of[(i, m + j)] = C[i, j]
        cost_of[(m + j, i)] = C[i, j]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if np.isnan(pot[y]):
                pot[y] = cost_of[(x, y)] - pot[x]
                stack.append(y)
    if np.isnan(pot).any():
        raise OracleError("basis graph is not a spanning tree")
    return pot[:m], pot[m:]  # u, v with u_i + v_j = C_ij


def _cycle(basis_set, enter, m, n):
    """Unique cycle created by adding `enter` to the basis tree."""
    adj = {}
    for i, j in basis_set:
        adj.setdefault(i, []).append(m + j)
        adj.setdefault(m + j, []).append(i)
    ei, ej = enter
    start, goal = ei, m + ej
    prev = {start: None}
    stack = [start]
    while stack:
        x = stack.pop()
        if x == goal:
            break
        for y in adj.get(x, ()):
            if y not in prev:
                prev[y] = x
                stack.append(y)
    if goal not in prev:
        raise OracleError("entering cell closes no cycle (disconnected basis)")
    nodes = [goal]
    while prev[nodes[-1]] is not None:
        nodes.append(prev[nodes[-1]])
    # nodes: goal .. start; convert the node path to a cell cycle
    cells = [enter]
    for x, y in zip(nodes[1:], nodes[:-1]):
        if x < m:
            cells.append((x, y - m))
        else:
            cells.append((y, x - m))
    return cells  # alternating +enter, -, +, -, ...


def reference_solve(inst: OTInstance, max_pivots=None) -> ReferenceSolution:
    """Exact optimum by the transportation simplex (Bland smallest-index)."""
    m, n = inst.m, inst.n
    if m * n > ORACLE_VARIABLE_CAP:
        raise OracleError(f"instance too large for the oracle ({m * n} > {ORACLE_VARIABLE_CAP})")
    total = inst.a.sum()
    C = dense_cost(inst)
    plan, basis = _northwest_corner(inst.a, inst.b)
    basis_set = set(basis)
    scale = max(1.0, float(np.abs(C).max()))
    tol = 1e-12 * scale
    if max_pivots is None:
        max_pivots = 50 * (m + n) * max(m, n) + 1000
    for _ in range(max_pivots):
        u, v = _duals(C, basis_set, m, n)
        rc = C - u[:, None] - v[None, :]
        # Bland-style: smallest flat index among sufficiently negative cells
        cand = None
        flat = np.flatnonzero((rc < -tol).ravel(order="F"))
        for j in flat:
            cell = (int(j % m), int(j // m))
            if cell not in basis_set:
                cand = cell
                break
        if cand is None:
            break
        cells = _cycle(basis_set, cand, m, n)
        minus = cells[1::2]
        theta = min(plan[c] for c in minus)
        # leaving cell: Bland tie-break on the flat index
        leave = min(
            (c for c in minus if plan[c] <= theta + 0.0),
            key=lambda c: (plan[c], c[0] + m * c[1]),
        )
        for c in cells[0::2]:
            plan[c] += theta
        for c in minus:
            plan[c] -= theta
        plan[leave] = 0.0
        basis_set.discard(leave)
        basis_set.add(cand)
    else:
        raise OracleError("pivot limit exceeded in transportation simplex")
    plan = np.where(plan < 0, 0.0, plan)
    objective = float((C * plan).sum())
    support_size = int((plan > 0).sum())
    return ReferenceSolution(
        plan=plan, objective=objective, vertex=True, support_size=support_size
    )


def rwe(solver_value, reference_value):
    """Relative Wasserstein error; absolute difference if the reference is 0."""
    if reference_value == 0.0:
        return abs(solver_value), True
    return abs(solver_value - reference_value) / abs(reference_value), False
