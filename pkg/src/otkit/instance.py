"""Optimal transport problem instances.

An instance couples two nonnegative mass vectors ``a`` (m sources) and
``b`` (n sinks) with a cost description, either an explicit m-by-n matrix
or a grid metric (L1 / L2 / Linf distance between pixel positions).

Vectorization is column-major throughout the package: the transport
variable with flat index ``j`` (0-based) moves mass from source
``j % m`` to sink ``j // m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

BALANCE_RTOL = 1e-12

GENERATOR_KINDS = (
    "uniform-random",
    "gaussian-blob",
    "shifted-gaussian",
    "two-blobs",
    "checkerboard",
)


class InstanceError(ValueError):
    """Invalid instance data (unbalanced, negative mass, bad dimensions)."""


class ParseError(InstanceError):
    """Malformed instance file; carries the offending 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class GridMetric:
    """Cost given by a pixel metric on a res_rows x res_cols grid.

    Positions are indexed column-major: position p sits at grid
    coordinates (p % res_rows, p // res_rows).
    """

    res_rows: int
    res_cols: int
    metric: str  # "L1" | "L2" | "LINF"

    def __post_init__(self):
        if self.res_rows < 1 or self.res_cols < 1:
            raise InstanceError("grid resolution must be positive")
        if self.metric not in ("L1", "L2", "LINF"):
            raise InstanceError(f"unknown metric {self.metric!r}")

    @property
    def size(self):
        return self.res_rows * self.res_cols

    def positions(self):
        """(size, 2) array of (row, col) coordinates, column-major order."""
        p = np.arange(self.size)
        return np.column_stack((p % self.res_rows, p // self.res_rows))


@dataclass(frozen=True)
class Explicit:
    """Cost given by an explicit dense nonnegative m x n matrix."""

    C: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        if C.ndim != 2:
            raise InstanceError("explicit cost must be a 2-D matrix")
        if np.any(C < 0) or not np.all(np.isfinite(C)):
            raise InstanceError("explicit cost entries must be finite and >= 0")
        object.__setattr__(self, "C", C)


CostSpec = Union[GridMetric, Explicit]


def grid_cost(spec: GridMetric, i: int, j: int) -> float:
    """Distance between grid positions i and j under spec.metric.

    Positions are 0-based flat indices in column-major order.
    """
    size = spec.size
    for p in (i, j):
        if not 0 <= p < size:
            raise IndexError(f"position {p + 1} out of range 1..{size}")
    da = abs(i % spec.res_rows - j % spec.res_rows)
    db = abs(i // spec.res_rows - j // spec.res_rows)
    if spec.metric == "L1":
        return float(da + db)
    if spec.metric == "L2":
        return float(np.hypot(da, db))
    return float(max(da, db))


@dataclass(frozen=True)
class OTInstance:
    """A balanced discrete optimal transport problem."""

    a: np.ndarray
    b: np.ndarray
    cost: CostSpec

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 1 or b.ndim != 1 or a.size < 1 or b.size < 1:
            raise InstanceError("marginals must be nonempty 1-D vectors")
        if np.any(a < 0) or np.any(b < 0):
            raise InstanceError("marginals must be nonnegative")
        ta, tb = a.sum(), b.sum()
        if abs(ta - tb) > BALANCE_RTOL * max(1.0, abs(ta), abs(tb)):
            raise InstanceError(
                f"unbalanced marginals: sum(a)={ta!r} != sum(b)={tb!r}"
            )
        if isinstance(self.cost, GridMetric):
            if a.size != self.cost.size or b.size != self.cost.size:
                raise InstanceError("grid metric requires m == n == res_rows*res_cols")
        else:
            if self.cost.C.shape != (a.size, b.size):
                raise InstanceError("cost matrix shape does not match marginals")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def m(self):
        return self.a.size

    @property
    def n(self):
        return self.b.size

    @property
    def f(self):
        """Stacked constraint right-hand side [a; b]."""
        return np.concatenate((self.a, self.b))

    @property
    def metric_name(self):
        if isinstance(self.cost, GridMetric):
            return self.cost.metric
        return "EXPLICIT"

    def cost_view(self, c_max=None):
        return CostView(self, c_max=c_max)


class CostView:
    """Lazy view of the vectorized cost, plus the pricing threshold C_max.

    ``c(j)`` accepts scalar or array flat indices and never materializes
    the full mn cost vector; callers scan it in chunks.
    """

    def __init__(self, inst: OTInstance, c_max=None):
        self.inst = inst
        self.m = inst.m
        self.n = inst.n
        if isinstance(inst.cost, GridMetric):
            spec = inst.cost
            self._pos = spec.positions().astype(float)
            self._metric = spec.metric
            self._C = None
            default_cmax = 0.4 * max(spec.res_rows, spec.res_cols)
        else:
            self._C = inst.cost.C
            self._pos = None
            default_cmax = float(np.percentile(self._C, 10))
        self.c_max_threshold = float(c_max) if c_max is not None else default_cmax

    def c(self, j):
        """Cost of flat variable index/indices j (0-based, column-major)."""
        j = np.asarray(j)
        if j.size and (j.min() < 0 or j.max() >= self.m * self.n):
            raise IndexError("variable index out of range")
        k1 = j % self.m
        k2 = j // self.m
        if self._C is not None:
            return self._C[k1, k2]
        d = np.abs(self._pos[k1] - self._pos[k2])
        if self._metric == "L1":
            return d.sum(axis=-1)
        if self._metric == "L2":
            return np.hypot(d[..., 0], d[..., 1])
        return d.max(axis=-1)

    def __call__(self, j):
        return self.c(j)


def _image_pair(res, class_kind, rng):
    """Two res x res nonnegative images for the synthetic classes."""
    yy, xx = np.meshgrid(np.arange(res), np.arange(res), indexing="ij")

    def blob(cy, cx, s):
        return np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * s**2))

    if class_kind == "uniform-random":
        A = rng.random((res, res))
        B = rng.random((res, res))
    elif class_kind == "gaussian-blob":
        s = res / 5.0
        A = blob(res * 0.35, res * 0.35, s) + 1e-6
        B = blob(res * 0.6, res * 0.6, s) + 1e-6
        A *= 1.0 + 0.05 * rng.random((res, res))
        B *= 1.0 + 0.05 * rng.random((res, res))
    elif class_kind == "shifted-gaussian":
        s = res / 6.0
        c = (res - 1) / 2.0
        shift = max(1.0, res / 4.0)
        A = blob(c, c - shift / 2.0, s) + 1e-6
        B = blob(c, c + shift / 2.0, s) + 1e-6
    elif class_kind == "two-blobs":
        s = res / 8.0
        A = blob(res * 0.25, res * 0.25, s) + blob(res * 0.75, res * 0.75, s) + 1e-6
        B = blob(res * 0.25, res * 0.75, s) + blob(res * 0.75, res * 0.25, s) + 1e-6
    elif class_kind == "checkerboard":
        k = max(1, res // 4)
        mask = ((yy // k + xx // k) % 2).astype(float)
        A = mask * (0.5 + rng.random((res, res))) + 1e-6
        B = (1.0 - mask) * (0.5 + rng.random((res, res))) + 1e-6
    else:
        raise InstanceError(f"unknown class kind {class_kind!r}")
    return A, B


def make_synthetic_instance(res, class_kind, seed, metric="L2"):
    """Balanced grid instance with m = n = res**2 and unit total mass.

    Deterministic for a fixed (res, class_kind, seed).
    """
    if res < 2:
        raise InstanceError("res must be >= 2")
    rng = np.random.default_rng(seed)
    A, B = _image_pair(res, class_kind, rng)
    # image pixel (r, c) -> position r + c*res (column-major)
    a = A.reshape(-1, order="F")
    b = B.reshape(-1, order="F")
    a = a / a.sum()
    b = b / b.sum()
    return OTInstance(a=a, b=b, cost=GridMetric(res, res, metric))


# ---------------------------------------------------------------------------
# Text formats: OTIMG (grid instance) and OTLP (explicit LP data).


def _data_lines(path):
    out = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                out.append((lineno, text))
    return out


def _take_floats(tokens, count, what, lineno):
    if len(tokens) < count:
        raise ParseError(f"expected {count} values for {what}, got {len(tokens)}", lineno)
    head = tokens[:count]
    try:
        vals = np.array([float(t) for t in head])
    except ValueError as exc:
        raise ParseError(f"bad numeric value in {what}: {exc}", lineno) from None
    return vals, tokens[count:]


def read_instance(path) -> OTInstance:
    """Read an OTIMG or OTLP text file."""
    lines = _data_lines(path)
    if not lines:
        raise ParseError("empty file", 1)
    first_lineno, header = lines[0]
    fields = header.split()
    kind = fields[0].upper()

    # flatten remaining tokens, remembering the line each token came from
    tokens = []
    for lineno, text in lines[1:]:
        for tok in text.split():
            tokens.append(tok)
    token_line = []
    for lineno, text in lines[1:]:
        token_line.extend([lineno] * len(text.split()))

    def line_at(consumed):
        idx = min(consumed, len(token_line) - 1)
        return token_line[idx] if token_line else first_lineno

    if kind == "OTIMG":
        if len(fields) != 2:
            raise ParseError("OTIMG header must be 'OTIMG <res>'", first_lineno)
        try:
            res = int(fields[1])
        except ValueError:
            raise ParseError("bad resolution in OTIMG header", first_lineno) from None
        if res < 1:
            raise ParseError("resolution must be >= 1", first_lineno)
        need = 2 * res * res
        # last non-numeric tail should be the metric line
        if len(tokens) < need + 2:
            raise ParseError(
                f"expected {need} image values plus a metric line", line_at(len(tokens))
            )
        vals, rest = _take_floats(tokens, need, "image data", line_at(0))
        if len(rest) != 2 or rest[0].lower() != "metric":
            raise ParseError("missing 'metric L1|L2|LINF' line", line_at(need))
        metric = rest[1].upper()
        if metric not in ("L1", "L2", "LINF"):
            raise ParseError(f"unknown metric {rest[1]!r}", line_at(need))
        A = vals[: res * res].reshape(res, res)  # row-major image blocks
        B = vals[res * res :].reshape(res, res)
        if np.any(vals < 0):
            bad = int(np.argmax(vals < 0))
            raise ParseError("negative mass value", line_at(bad))
        a = A.reshape(-1, order="F")
        b = B.reshape(-1, order="F")
        if abs(a.sum() - b.sum()) > BALANCE_RTOL * max(1.0, a.sum(), b.sum()):
            raise ParseError("unbalanced marginals", line_at(need - 1))
        return OTInstance(a=a, b=b, cost=GridMetric(res, res, metric))

    if kind == "OTLP":
        if len(fields) != 3:
            raise ParseError("OTLP header must be 'OTLP <m> <n>'", first_lineno)
        try:
            m, n = int(fields[1]), int(fields[2])
        except ValueError:
            raise ParseError("bad dimensions in OTLP header", first_lineno) from None
        if m < 1 or n < 1:
            raise ParseError("dimensions must be >= 1", first_lineno)
        need = m + n + m * n
        if len(tokens) != need:
            raise ParseError(
                f"expected {need} values (a, b, cost), got {len(tokens)}",
                line_at(len(tokens)),
            )
        vals, _ = _take_floats(tokens, need, "OTLP data", line_at(0))
        a = vals[:m]
        b = vals[m : m + n]
        C = vals[m + n :].reshape(m, n)  # row-major cost block
        if np.any(a < 0) or np.any(b < 0):
            bad = int(np.argmax(vals[: m + n] < 0))
            raise ParseError("negative mass value", line_at(bad))
        if np.any(C < 0):
            raise ParseError("negative cost value", line_at(m + n))
        if abs(a.sum() - b.sum()) > BALANCE_RTOL * max(1.0, a.sum(), b.sum()):
            raise ParseError("unbalanced marginals", line_at(m + n - 1))
        return OTInstance(a=a, b=b, cost=Explicit(C))

    raise ParseError(f"unknown header {fields[0]!r} (expected OTIMG or OTLP)", first_lineno)


def write_instance(inst: OTInstance, path):
    """Write inst in OTIMG form (grid metric) or OTLP form (explicit cost)."""
    with open(path, "w") as fh:
        if isinstance(inst.cost, GridMetric):
            spec = inst.cost
            if spec.res_rows != spec.res_cols:
                raise InstanceError("OTIMG format requires a square grid")
            res = spec.res_rows
            fh.write(f"OTIMG {res}\n")
            A = inst.a.reshape(res, res, order="F")
            B = inst.b.reshape(res, res, order="F")
            for img in (A, B):
                for row in img:
                    fh.write(" ".join(repr(float(v)) for v in row) + "\n")
            fh.write(f"metric {spec.metric}\n")
        else:
            m, n = inst.m, inst.n
            fh.write(f"OTLP {m} {n}\n")
            fh.write(" ".join(repr(float(v)) for v in inst.a) + "\n")
            fh.write(" ".join(repr(float(v)) for v in inst.b) + "\n")
            for row in inst.cost.C:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
