"""Linear solvers for the Schur complement systems.

Early iterations use conjugate gradient preconditioned by an incomplete
Cholesky factor with a drop tolerance; late iterations use an exact
sparse LDL^T factorization with a fill-reducing ordering. The switch is
driven by the relative decrease of the support size over a 5-iteration
window. Both Schur complements are singular with null vector e, so
right-hand sides and solutions are deflated against e.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class NumericError(RuntimeError):
    pass


class ICBreakdown(NumericError):
    """Incomplete factorization lost positive pivots even after lifting."""


def deflate(v):
    """Project out the all-ones direction (in place safe: returns new array)."""
    return v - v.mean()


# ---------------------------------------------------------------------------
# Preconditioned conjugate gradient


def pcg(matvec, r, precond=None, tol=1e-8, maxit=1000, deflate_null=True):
    """Solve S x = r by PCG; returns (x, iters, relres).

    With deflate_null, r is projected against the ones vector and the
    returned x is orthogonal to it (S is expected singular with S e = 0
    and consistent rhs). relres is the relative preconditioned residual.
    """
    r = np.asarray(r, dtype=float).copy()
    k = r.size
    if precond is None:
        precond = lambda v: v
    if deflate_null:
        r = deflate(r)
    x = np.zeros(k)
    z = precond(r)
    if deflate_null:
        z = deflate(z)
    rz = float(r @ z)
    rz0 = max(abs(rz), np.finfo(float).tiny)
    if np.sqrt(abs(rz) / rz0) == 0.0 or np.linalg.norm(r) == 0.0:
        return x, 0, 0.0
    p = z.copy()
    relres = 1.0
    iters = 0
    for iters in range(1, maxit + 1):
        q = matvec(p)
        pq = float(p @ q)
        if not np.isfinite(pq):
            raise NumericError("non-finite value in PCG iteration")
        if pq <= 0.0:
            # numerically null search direction on a semidefinite system
            break
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        z = precond(r)
        if deflate_null:
            z = deflate(z)
        rz_new = float(r @ z)
        if not np.isfinite(rz_new):
            raise NumericError("non-finite value in PCG iteration")
        relres = np.sqrt(abs(rz_new) / rz0)
        if relres <= tol:
            rz = rz_new
            break
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
    if deflate_null:
        x = deflate(x)
    return x, iters, float(relres)


# ---------------------------------------------------------------------------
# Incomplete Cholesky with drop tolerance


@dataclass
class Factorization:
    kind: str                      # "IncompleteCholesky" | "ExactLDLT"
    n: int
    ordering: np.ndarray
    Lp: np.ndarray
    Li: np.ndarray
    Lx: np.ndarray
    D: np.ndarray = None           # LDLT only
    pivot_shift: float = 0.0
    pivots_replaced: int = 0
    lift: float = 0.0
    nnz_S: int = 0
    _lu: object = field(default=None, repr=False)

    @property
    def nnz_L(self):
        return self.Li.size

    @property
    def fill_ratio(self):
        return self.nnz_L / max(1, self.nnz_S)

    @property
    def fill_percent(self):
        """nnz(L) as a percentage of the dense lower triangle."""
        dense = self.n * (self.n + 1) / 2.0
        return 100.0 * self.nnz_L / dense

    def _L_csc(self):
        return sp.csc_matrix(
            (self.Lx, self.Li, self.Lp), shape=(self.n, self.n)
        )

    # -- IncompleteCholesky: apply (L L^T)^-1 as a preconditioner
    def precond(self, r):
        if self._lu is None:
            L = self._L_csc()
            self._lu = spla.splu(
                L, permc_spec="NATURAL", diag_pivot_thresh=0.0,
                options=dict(SymmetricMode=False),
            )
        y = self._lu.solve(r)
        return self._lu.solve(y, trans="T")

    # -- ExactLDLT: solve (P^T L D L^T P) x = b, deflated against e
    def solve(self, b, deflate_null=True):
        b = np.asarray(b, dtype=float)
        if deflate_null:
            b = deflate(b)
        x = b[self.ordering].copy()
        n, Lp, Li, Lx = self.n, self.Lp, self.Li, self.Lx
        for j in range(n):                       # unit lower forward solve
            lo, hi = Lp[j], Lp[j + 1]
            if lo < hi:
                x[Li[lo:hi]] -= Lx[lo:hi] * x[j]
        x /= self.D
        for j in range(n - 1, -1, -1):           # transpose backward solve
            lo, hi = Lp[j], Lp[j + 1]
            if lo < hi:
                x[j] -= Lx[lo:hi] @ x[Li[lo:hi]]
        out = np.empty(n)
        out[self.ordering] = x
        if deflate_null:
            out = deflate(out)
        return out


def incomplete_cholesky(S, drop_tol=1e-2, lift=0.0, max_lift_retries=3):
    """IC factorization of sparse symmetric S (+ lift on the diagonal).

    Off-diagonal entries smaller than drop_tol times the updated column
    norm are discarded. A nonpositive pivot triggers a 10x lift retry,
    up to max_lift_retries times, then ICBreakdown.
    """
    S = sp.csc_matrix(S)
    n = S.shape[0]
    base_lift = lift if lift > 0 else 0.0
    attempt_lift = base_lift
    for attempt in range(max_lift_retries + 1):
        try:
            return _ic_attempt(S, drop_tol, attempt_lift)
        except ICBreakdown:
            if attempt == max_lift_retries:
                raise
            attempt_lift = 10.0 * attempt_lift if attempt_lift > 0 else (
                1e-10 * max(S.diagonal().max(), 1.0)
            )
            log.debug("IC breakdown, retrying with lift %.3e", attempt_lift)
    raise ICBreakdown("unreachable")


def _ic_attempt(S, drop_tol, lift):
    n = S.shape[0]
    Sp, Si, Sx = S.indptr, S.indices, S.data
    # column lists of the factor under construction
    col_rows = [None] * n
    col_vals = [None] * n
    rowlist = [[] for _ in range(n)]  # row k: [(j, L[k,j]), ...] j < k
    work = np.zeros(n)
    for k in range(n):
        lo, hi = Sp[k], Sp[k + 1]
        rows = Si[lo:hi]
        vals = Sx[lo:hi]
        below = rows >= k
        touched = set(rows[below].tolist())
        work[rows[below]] = vals[below]
        work[k] += lift
        for j, lkj in rowlist[k]:
            rj, vj = col_rows[j], col_vals[j]
            start = np.searchsorted(rj, k)
            rr = rj[start:]
            work[rr] -= lkj * vj[start:]
            touched.update(rr.tolist())
        touched.discard(k)
        pivot = work[k]
        if not np.isfinite(pivot) or pivot <= 0.0:
            work[k] = 0.0
            for i in touched:
                work[i] = 0.0
            raise ICBreakdown(f"nonpositive pivot {pivot!r} at column {k}")
        idx = np.fromiter(touched, dtype=np.intp, count=len(touched))
        idx.sort()
        colvals = work[idx]
        colnorm = np.sqrt(pivot * pivot + float(colvals @ colvals))
        if drop_tol > 0:
            keep = np.abs(colvals) >= drop_tol * colnorm
            idx, colvals = idx[keep], colvals[keep]
        root = np.sqrt(pivot)
        scaled = colvals / root
        col_rows[k] = idx
        col_vals[k] = scaled
        for i, v in zip(idx.tolist(), scaled.tolist()):
            rowlist[i].append((k, v))
        work[k] = 0.0
        for i in touched:
            work[i] = 0.0
        # prepend the diagonal
        col_rows[k] = np.concatenate(([k], idx))
        col_vals[k] = np.concatenate(([root], scaled))
    Lp = np.zeros(n + 1, dtype=np.int64)
    for k in range(n):
        Lp[k + 1] = Lp[k] + col_rows[k].size
    Li = np.concatenate(col_rows) if n else np.empty(0, dtype=np.intp)
    Lx = np.concatenate(col_vals) if n else np.empty(0)
    return Factorization(
        kind="IncompleteCholesky", n=n, ordering=np.arange(n),
        Lp=Lp, Li=Li.astype(np.int64), Lx=Lx, lift=lift, nnz_S=S.nnz,
    )


# ---------------------------------------------------------------------------
# Exact sparse LDL^T with fill-reducing ordering


def min_degree_ordering(S):
    """Greedy minimum-degree elimination ordering (ties by smaller index)."""
    S = sp.csc_matrix(S)
    n = S.shape[0]
    adj = [set() for _ in range(n)]
    coo = S.tocoo()
    for i, j in zip(coo.row, coo.col):
        if i != j:
            adj[i].add(int(j))
    alive = set(range(n))
    import heapq

    heap = [(len(adj[v]), v) for v in range(n)]
    heapq.heapify(heap)
    order = []
    while heap:
        d, v = heapq.heappop(heap)
        if v not in alive or d != len(adj[v]):
            continue
        alive.discard(v)
        order.append(v)
        nbrs = adj[v]
        for u in nbrs:
            adj[u].discard(v)
            new = nbrs - adj[u]
            new.discard(u)
            if new:
                adj[u].update(new)
            heapq.heappush(heap, (len(adj[u]), u))
        adj[v] = set()
    return np.array(order, dtype=np.int64)


def exact_ldlt(S, ordering_policy="amd", pivot_floor_rel=1e-12):
    """Sparse LDL^T of symmetric S, permuted by a fill-reducing ordering.

    At most one pivot is expected to fall below the floor (the rank-1
    deficiency); it is replaced by the floor value. More than one small
    pivot signals a corrupted system.
    """
    S = sp.csc_matrix(S)
    n = S.shape[0]
    if isinstance(ordering_policy, str):
        if ordering_policy == "amd":
            perm = min_degree_ordering(S)
        elif ordering_policy == "natural":
            perm = np.arange(n, dtype=np.int64)
        else:
            raise ValueError(f"unknown ordering policy {ordering_policy!r}")
    else:
        perm = np.asarray(ordering_policy, dtype=np.int64)
        if np.sort(perm).tolist() != list(range(n)):
            raise ValueError("ordering must be a permutation of 0..n-1")

    iperm = np.empty(n, dtype=np.int64)
    iperm[perm] = np.arange(n)
    Sperm = S[perm][:, perm].tocsc()
    Sperm.sort_indices()
    Sp, Si, Sx = Sperm.indptr, Sperm.indices, Sperm.data

    pivot_floor = pivot_floor_rel * max(float(np.abs(Sperm.diagonal()).max()), 1e-300)

    # symbolic: elimination tree and column counts (Davis-style LDL)
    parent = np.full(n, -1, dtype=np.int64)
    flag = np.full(n, -1, dtype=np.int64)
    Lnz = np.zeros(n, dtype=np.int64)
    for k in range(n):
        flag[k] = k
        for p in range(Sp[k], Sp[k + 1]):
            i = Si[p]
            if i >= k:
                continue
            while flag[i] != k:
                if parent[i] == -1:
                    parent[i] = k
                Lnz[i] += 1
                flag[i] = k
                i = parent[i]
    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(Lnz, out=Lp[1:])
    Li = np.zeros(Lp[n], dtype=np.int64)
    Lx = np.zeros(Lp[n])
    D = np.zeros(n)

    # numeric, up-looking
    Y = np.zeros(n)
    pattern = np.zeros(n, dtype=np.int64)
    Lnext = Lp[:n].copy()
    flag[:] = -1
    replaced = 0
    for k in range(n):
        top = n
        flag[k] = k
        for p in range(Sp[k], Sp[k + 1]):
            i = Si[p]
            if i > k:
                continue
            Y[i] += Sx[p]
            length = 0
            while flag[i] != k:
                pattern[length] = i
                length += 1
                flag[i] = k
                i = parent[i]
            while length > 0:
                length -= 1
                top -= 1
                pattern[top] = pattern[length]
        D[k] = Y[k]
        Y[k] = 0.0
        for s in range(top, n):
            i = pattern[s]
            yi = Y[i]
            Y[i] = 0.0
            for p in range(Lp[i], Lnext[i]):
                Y[Li[p]] -= Lx[p] * yi
            lki = yi / D[i]
            D[k] -= lki * yi
            Li[Lnext[i]] = k
            Lx[Lnext[i]] = lki
            Lnext[i] += 1
        if abs(D[k]) < pivot_floor:
            D[k] = pivot_floor
            replaced += 1
    if replaced > 1:
        raise NumericError(
            f"{replaced} pivots below floor: rank deficiency larger than 1"
        )
    # convert to row-sorted CSC of the strictly-lower factor for the solves
    L = sp.csc_matrix((Lx, Li, Lp), shape=(n, n))
    L.sort_indices()
    return Factorization(
        kind="ExactLDLT", n=n, ordering=perm, Lp=L.indptr.astype(np.int64),
        Li=L.indices.astype(np.int64), Lx=L.data, D=D,
        pivot_shift=pivot_floor, pivots_replaced=replaced, nnz_S=S.nnz,
    )


# ---------------------------------------------------------------------------
# Phase switching


@dataclass
class SolverPhase:
    """Iterative -> Direct controller keyed on support-size decrease."""

    mode: str = "Iterative"
    ic_drop_tol: float = 1e-2
    switch_threshold: float = 0.05
    window: int = 5
    allow_switch_back: bool = False
    support_history: deque = None

    def __post_init__(self):
        if self.support_history is None:
            self.support_history = deque(maxlen=self.window + 1)

    def observe(self, support_size):
        self.support_history.append(int(support_size))

    def lower_drop_tol(self, factor=10.0, floor=1e-6):
        self.ic_drop_tol = max(floor, self.ic_drop_tol / factor)

    def maybe_switch(self):
        """Returns True exactly when the Iterative -> Direct switch fires."""
        if self.mode == "Direct":
            if self.allow_switch_back and len(self.support_history) >= 2:
                h = list(self.support_history)
                if h[-1] > h[-2]:
                    log.info("support grew after switching; falling back to Iterative")
                    self.mode = "Iterative"
            return False
        if should_switch(self.support_history, self.switch_threshold, self.window):
            self.mode = "Direct"
            return True
        return False


def should_switch(history, threshold=0.05, window=5):
    """True iff the support shrank by >= threshold over the last `window` steps."""
    h = list(history)
    if len(h) < window + 1:
        return False
    old, new = h[-window - 1], h[-1]
    if old <= 0:
        return False
    return (old - new) / old >= threshold
