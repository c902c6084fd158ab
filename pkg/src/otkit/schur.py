"""Structured normal equations and their Schur complements.

On the support, the normal equations matrix is [[M, V], [V^T, N]] with
diagonal M, N and sparse V holding the scaling weights theta at the
support positions. Row sums of V equal M's diagonal and column sums
equal N's diagonal, which makes both Schur complements weakly
diagonally dominant with zero row sums (singular, null vector e).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

DIAG_FLOOR = 1e-30


class SchurError(RuntimeError):
    pass


class ScaleError(SchurError):
    """Nonpositive theta entry: the iterate upstream is corrupted."""


class PatternBudgetError(SchurError):
    """Explicit Schur complement would exceed the nnz budget."""


@dataclass
class SchurSystem:
    M: np.ndarray                 # length m, positive diagonal
    N: np.ndarray                 # length n, positive diagonal
    V: sp.csc_matrix              # m x n, theta on the support
    side: str                     # "SM" (n x n) or "SN" (m x m)
    lift: float = 0.0
    _VT: sp.csc_matrix = field(default=None, repr=False)

    @property
    def m(self):
        return self.M.size

    @property
    def n(self):
        return self.N.size

    @property
    def active_dim(self):
        return self.n if self.side == "SM" else self.m

    @property
    def VT(self):
        if self._VT is None:
            self._VT = self.V.T.tocsc()
        return self._VT


def assemble(support_index, theta_red, m, n) -> SchurSystem:
    """Build M, N, V from theta on the support; pick the smaller side."""
    theta_red = np.asarray(theta_red, dtype=float)
    support_index = np.asarray(support_index)
    if support_index.size == 0:
        raise SchurError("support is empty")
    if np.any(theta_red <= 0) or not np.all(np.isfinite(theta_red)):
        raise ScaleError("theta entries must be finite and > 0")
    k1 = support_index % m
    k2 = support_index // m
    V = sp.csc_matrix((theta_red, (k1, k2)), shape=(m, n))
    M = np.bincount(k1, weights=theta_red, minlength=m)
    N = np.bincount(k2, weights=theta_red, minlength=n)
    for diag, what in ((M, "row"), (N, "column")):
        zero = diag <= 0.0
        if np.any(zero):
            log.warning("%d empty %s(s) in V; flooring diagonal", zero.sum(), what)
            diag[zero] = DIAG_FLOOR
    side = "SM" if n <= m else "SN"
    return SchurSystem(M=M, N=N, V=V, side=side)


def schur_matvec(sys: SchurSystem, v):
    """Apply the active Schur complement without forming it."""
    v = np.asarray(v, dtype=float)
    if v.shape != (sys.active_dim,):
        raise ValueError(f"expected vector of length {sys.active_dim}")
    if sys.side == "SM":
        # (N - V^T M^-1 V) v
        return sys.N * v - sys.VT @ ((sys.V @ v) / sys.M)
    return sys.M * v - sys.V @ ((sys.VT @ v) / sys.N)


def assemble_sparse_schur(sys: SchurSystem, lift=None, nnz_cap=None):
    """Explicit sparse symmetric Schur complement plus lift*I.

    Pattern equals pattern(V^T V) (resp. V V^T) union the diagonal; no
    cancellation can occur since all weights are positive.
    """
    if sys.side == "SM":
        S = sp.diags(sys.N) - sys.VT @ sp.diags(1.0 / sys.M) @ sys.V
    else:
        S = sp.diags(sys.M) - sys.V @ sp.diags(1.0 / sys.N) @ sys.VT
    S = S.tocsc()
    if nnz_cap is not None and S.nnz > nnz_cap:
        raise PatternBudgetError(
            f"explicit Schur complement has {S.nnz} nonzeros, cap {nnz_cap}"
        )
    if lift is None:
        lift = sys.lift
    if lift:
        S = (S + lift * sp.eye(S.shape[0], format="csc")).tocsc()
    S.sort_indices()
    return S


def reduce_rhs(sys: SchurSystem, beta1, beta2):
    """Right-hand side for the active complement's solve."""
    beta1 = np.asarray(beta1, dtype=float)
    beta2 = np.asarray(beta2, dtype=float)
    if beta1.shape != (sys.m,) or beta2.shape != (sys.n,):
        raise ValueError("rhs block dimensions do not match")
    if sys.side == "SM":
        return beta2 - sys.VT @ (beta1 / sys.M)
    return beta1 - sys.V @ (beta2 / sys.N)


def expand_solution(sys: SchurSystem, alpha_active, beta1, beta2):
    """Back-substitute the complement solution into (alpha1, alpha2)."""
    alpha_active = np.asarray(alpha_active, dtype=float)
    if sys.side == "SM":
        alpha2 = alpha_active
        alpha1 = (beta1 - sys.V @ alpha2) / sys.M
    else:
        alpha1 = alpha_active
        alpha2 = (beta2 - sys.VT @ alpha1) / sys.N
    return alpha1, alpha2


def block_residual(sys: SchurSystem, alpha1, alpha2, beta1, beta2):
    """Residual norm of the full 2x2 block system, for verification."""
    r1 = beta1 - (sys.M * alpha1 + sys.V @ alpha2)
    r2 = beta2 - (sys.VT @ alpha1 + sys.N * alpha2)
    return float(np.sqrt(np.dot(r1, r1) + np.dot(r2, r2)))


def dump_pattern(sys: SchurSystem, path):
    """Write the active complement pattern in Matrix Market coordinates."""
    from scipy.io import mmwrite

    S = assemble_sparse_schur(sys)
    mmwrite(str(path), S)
