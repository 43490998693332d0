"""Dense linear algebra over GF(2^w).

Matrices are :class:`GfMatrix` objects (a field plus a read-only int64
array).  Vectors are plain numpy integer arrays; a 2-D right operand is
treated as a stack of column vectors, so ``G @ X`` encodes every column of
``X`` at once.
"""

from __future__ import annotations

from itertools import combinations, islice
from math import comb
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CapacityError,
    ConstructionError,
    DimensionError,
    FieldMismatchError,
    SingularMatrixError,
)
from .gf import GF

_CHUNK = 4096


class GfMatrix:
    """Immutable ``rows x cols`` matrix over a :class:`~secvault.gf.GF`."""

    __slots__ = ("field", "data")

    def __init__(self, field: GF, data):
        arr = np.array(data, dtype=np.int64)
        if arr.ndim != 2 or 0 in arr.shape:
            raise DimensionError(f"matrix data must be a non-empty 2-D array, got shape {arr.shape}")
        if arr.min() < 0 or arr.max() >= field.order:
            raise ValueError(f"matrix entries out of range for {field!r}")
        arr.setflags(write=False)
        self.field = field
        self.data = arr

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"GfMatrix({self.field!r}, {self.data.tolist()})"

    def __eq__(self, other):
        if not isinstance(other, GfMatrix):
            return NotImplemented
        return self.field == other.field and np.array_equal(self.data, other.data)

    __hash__ = None

    def __matmul__(self, other):
        if isinstance(other, GfMatrix):
            if other.field != self.field:
                raise FieldMismatchError(f"{self.field!r} vs {other.field!r}")
            return GfMatrix(self.field, matmul(self.field, self.data, other.data))
        return mat_vec(self, other)

    def rank(self) -> int:
        return rank(self)

    def inverse(self) -> "GfMatrix":
        return invert(self)

    def take_rows(self, rows: Sequence[int]) -> "GfMatrix":
        return row_submatrix(self, rows)


def matmul(F: GF, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of raw arrays ``a`` (m x s) and ``b`` (s, ...) over ``F``."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    tail = b.shape[1:]
    b2 = b.reshape(b.shape[0], -1)
    out = np.zeros((a.shape[0], b2.shape[1]), dtype=np.int64)
    for t in range(a.shape[1]):
        out ^= F._mul(a[:, t, None], b2[t, None, :])
    return out.reshape((a.shape[0],) + tail)


def identity(F: GF, k: int) -> GfMatrix:
    return GfMatrix(F, np.eye(k, dtype=np.int64))


def vstack(blocks: Sequence[GfMatrix]) -> GfMatrix:
    F = blocks[0].field
    if any(b.field != F for b in blocks):
        raise FieldMismatchError("all blocks must share a field")
    return GfMatrix(F, np.vstack([b.data for b in blocks]))


def default_cauchy_points(n: int, k: int) -> tuple[list[int], list[int]]:
    """Row points ``0..n-1`` and column points ``n..n+k-1``."""
    return list(range(n)), list(range(n, n + k))


def cauchy(F: GF, h: Sequence[int], f: Sequence[int]) -> GfMatrix:
    """Cauchy matrix with entries ``1 / (h_i - f_j)``.

    Every square submatrix of the result is invertible.
    """
    h = [int(v) for v in h]
    f = [int(v) for v in f]
    if len(h) + len(f) > F.order:
        raise CapacityError(f"{len(h)} + {len(f)} points do not fit in a field of order {F.order}")
    points = h + f
    if len(set(points)) != len(points):
        raise ConstructionError("Cauchy points must be pairwise distinct across h and f")
    if min(points) < 0 or max(points) >= F.order:
        raise ConstructionError(f"Cauchy points must be elements of {F!r}")
    diff = np.bitwise_xor.outer(np.array(h, dtype=np.int64), np.array(f, dtype=np.int64))
    return GfMatrix(F, F.inv(diff))


def mat_vec(m: GfMatrix, v) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim == 0 or v.shape[0] != m.cols:
        raise DimensionError(f"matrix has {m.cols} columns, vector has shape {v.shape}")
    if v.dtype.kind not in "iu" or (v.size and (v.min() < 0 or v.max() >= m.field.order)):
        raise ValueError(f"vector entries are not elements of {m.field!r}")
    return matmul(m.field, m.data, v)


def row_submatrix(m: GfMatrix, rows: Iterable[int]) -> GfMatrix:
    rows = [int(r) for r in rows]
    if len(set(rows)) != len(rows):
        raise IndexError(f"duplicate row index in {rows}")
    if any(not 0 <= r < m.rows for r in rows):
        raise IndexError(f"row index out of range for {m.rows} rows: {rows}")
    return GfMatrix(m.field, m.data[rows])


def _rref(F: GF, a: np.ndarray):
    """Reduced row echelon form; returns ``(R, pivot_columns)``."""
    a = np.array(a, dtype=np.int64)
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(a[r:, c])
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
        a[r] = F._mul(a[r], F.inv(int(a[r, c])))
        factors = a[:, c].copy()
        factors[r] = 0
        a ^= F._mul(factors[:, None], a[r][None, :])
        pivots.append(c)
        r += 1
    return a, pivots


def rank(m: GfMatrix) -> int:
    return len(_rref(m.field, m.data)[1])


def invert(m: GfMatrix) -> GfMatrix:
    if m.rows != m.cols:
        raise DimensionError(f"cannot invert a non-square {m.shape} matrix")
    k = m.rows
    aug = np.hstack([m.data, np.eye(k, dtype=np.int64)])
    red, pivots = _rref(m.field, aug)
    if pivots[:k] != list(range(k)):
        raise SingularMatrixError("matrix is singular")
    return GfMatrix(m.field, red[:, k:])


def solve(m: GfMatrix, y) -> np.ndarray:
    """Solve ``m @ x = y`` for square invertible ``m``."""
    return matmul(m.field, invert(m).data, np.asarray(y, dtype=np.int64))


def batched_full_rank(F: GF, mats: np.ndarray) -> np.ndarray:
    """For a stack of square matrices ``(S, r, r)`` report which are invertible."""
    a = np.array(mats, dtype=np.int64)
    S, r, _ = a.shape
    ok = np.ones(S, dtype=bool)
    idx = np.arange(S)
    for c in range(r):
        nz = a[:, c:, c] != 0
        ok &= nz.any(axis=1)
        piv = c + np.argmax(nz, axis=1)
        top = a[idx, c].copy()
        a[idx, c] = a[idx, piv]
        a[idx, piv] = top
        pv = a[:, c, c]
        scale = F.inv(np.where(pv == 0, 1, pv))
        a[:, c, :] = F._mul(a[:, c, :], np.asarray(scale)[:, None])
        if c + 1 < r:
            a[:, c + 1:, :] ^= F._mul(a[:, c + 1:, c, None], a[:, c, None, :])
    return ok


def satisfies_criterion2(m: GfMatrix, gamma: int) -> bool:
    """True iff every ``2*gamma`` columns of the ``2*gamma``-row matrix are independent.

    This is the condition under which any ``gamma``-sparse vector is
    uniquely determined by ``m @ z``.  Checked exhaustively.
    """
    width = 2 * gamma
    if m.rows != width:
        raise DimensionError(f"expected {width} rows for gamma={gamma}, got {m.rows}")
    if width >= m.cols:
        raise DimensionError(f"2*gamma={width} must be smaller than the {m.cols} columns")
    return _all_column_subsets_full_rank(m.field, m.data, width)


def _all_column_subsets_full_rank(F: GF, data: np.ndarray, width: int) -> bool:
    if width == 0:
        return True
    cols = data.shape[1]
    if np.any(np.count_nonzero(data == 0, axis=1) >= width):
        # a row with `width` zeros vanishes on some column subset
        return False
    it = combinations(range(cols), width)
    remaining = comb(cols, width)
    while remaining:
        take = min(_CHUNK, remaining)
        block = np.fromiter((c for combo in islice(it, take) for c in combo),
                            dtype=np.int64, count=take * width).reshape(take, width)
        remaining -= take
        mats = np.transpose(data[:, block], (1, 0, 2))
        if not batched_full_rank(F, mats).all():
            return False
    return True
