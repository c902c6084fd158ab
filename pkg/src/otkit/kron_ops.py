"""Matrix-free application of the transport constraint operator.

The constraint matrix stacks a row-sum block and a column-sum block; it
has m+n rows, m*n columns, two unit entries per column and rank m+n-1.
It is never materialized: applications reduce to row/column sums of the
m-by-n reshaped argument, or to index arithmetic on the support.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConstraintOperator:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("dimensions must be positive")

    @property
    def shape(self):
        return (self.m + self.n, self.m * self.n)

    def apply(self, x, out=None):
        return apply_A(x, self.m, self.n, out=out)

    def apply_T(self, u, w, out=None):
        return apply_AT(u, w, self.m, self.n, out=out)


def column_endpoints(j, m, n=None):
    """Source and sink node of variable j: (j % m, j // m), 0-based.

    Accepts scalars or arrays; raises IndexError out of range when n is given.
    """
    j = np.asarray(j)
    if n is not None and j.size and (j.min() < 0 or j.max() >= m * n):
        raise IndexError(f"variable index out of range 1..{m * n}")
    return j % m, j // m


def apply_A(x, m, n, out=None):
    """Row sums then column sums of unvec(x); output length m+n."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m * n,):
        raise ValueError(f"expected vector of length {m * n}, got shape {x.shape}")
    if out is None:
        out = np.empty(m + n)
    X = x.reshape(m, n, order="F")
    np.sum(X, axis=1, out=out[:m])
    np.sum(X, axis=0, out=out[m:])
    return out


def apply_AT(u, w, m, n, out=None):
    """Adjoint application: entry j is u[j % m] + w[j // m]."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if u.shape != (m,) or w.shape != (n,):
        raise ValueError("dimension mismatch in apply_AT")
    if out is None:
        out = np.empty(m * n)
    out.reshape(m, n, order="F")[:] = u[:, None]
    out.reshape(m, n, order="F")[:] += w[None, :]
    return out


def apply_A_restricted(x_red, support_index, m, n, out=None):
    """apply_A of the zero-padded vector, in O(|support|) time and memory."""
    x_red = np.asarray(x_red, dtype=float)
    support_index = np.asarray(support_index)
    if x_red.shape != support_index.shape:
        raise ValueError("x_red must align with the support index")
    if support_index.size and (
        support_index.min() < 0 or support_index.max() >= m * n
    ):
        raise IndexError(f"support index out of range 1..{m * n}")
    k1 = support_index % m
    k2 = support_index // m
    if out is None:
        out = np.empty(m + n)
    out[:m] = np.bincount(k1, weights=x_red, minlength=m)
    out[m:] = np.bincount(k2, weights=x_red, minlength=n)
    return out


def apply_AT_restricted(u, w, support_index, m, out=None):
    """Rows of apply_AT restricted to the support: u[k1] + w[k2]."""
    support_index = np.asarray(support_index)
    k1 = support_index % m
    k2 = support_index // m
    if out is None:
        return u[k1] + w[k2]
    np.add(u[k1], w[k2], out=out)
    return out
