"""Static resilience: loss probabilities under independent node failures.

Closed forms cover the full object and non-systematic deltas.  Systematic
deltas are handled by an exhaustive census over failure patterns, since
only some ``2*gamma`` subsets of a systematic generator allow sparse
recovery.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import Iterable, Sequence

import numpy as np

from .codec import CodeParams, _inverse_rows, qualifies
from .errors import CensusSizeError, SingularMatrixError
from .placement import FailurePattern, Placement, PlacementMap

MAX_CENSUS_N = 24

__all__ = [
    "FailureModel", "FailurePattern", "PlacementMap", "Placement", "Variant", "Census",
    "loss_prob_full", "loss_prob_delta_nonsys", "loss_prob_delta_sys", "loss_prob_sys_bound",
    "census", "census_loss_prob", "archive_retention", "nines", "resilience_rows", "write_csv",
]


@dataclass(frozen=True)
class FailureModel:
    """Each node fails independently with probability ``p``."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"failure probability must lie in [0, 1], got {self.p}")


class Variant(str, Enum):
    NONSYS = "nonsys"
    SYS = "sys"
    NONDIFF = "nondiff"


def _p(p):
    if isinstance(p, FailureModel):
        return p.p
    arr = np.asarray(p, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError("failure probability must lie in [0, 1]")
    return float(arr) if arr.ndim == 0 else arr


def _tail(n: int, need: int, p):
    """P(fewer than ``need`` of ``n`` nodes alive), summed smallest term first."""
    p = _p(p)
    total = 0.0 * np.asarray(p)
    for j in range(need):
        total = total + comb(n, n - j) * p ** (n - j) * (1 - p) ** j
    return float(total) if np.ndim(total) == 0 else total


def tail_coefficients(n: int, need: int) -> dict[int, int]:
    """Coefficients ``{failures: count}`` of the loss polynomial in the
    basis ``p^f (1-p)^(n-f)`` for "fewer than ``need`` alive"."""
    return {n - j: comb(n, n - j) for j in range(need)}


def loss_prob_full(params: CodeParams, p):
    return _tail(params.n, params.k, p)


def loss_prob_delta_nonsys(params: CodeParams, gamma: int, p):
    if not 1 <= gamma <= params.k:
        raise ValueError(f"gamma must be in [1, {params.k}], got {gamma}")
    return _tail(params.n, min(2 * gamma, params.k), p)


def loss_prob_sys_bound(params: CodeParams, gamma: int, p):
    """The binomial lower bound on the systematic delta loss (strict when 2*gamma < k)."""
    return _tail(params.n, min(2 * gamma, params.k), p)


@dataclass(frozen=True)
class Census:
    """Classification of all ``2**n - 1`` nonempty failure patterns for one object."""

    n: int
    k: int
    gamma: int
    patterns: int
    recoverable_mds: int
    recoverable_sparse_extra: int
    lost_by_failures: tuple

    @property
    def total_handled(self) -> int:
        return self.recoverable_mds + self.recoverable_sparse_extra

    @property
    def lost(self) -> int:
        return self.patterns - self.total_handled

    def loss_coefficients(self) -> dict[int, int]:
        return {f: c for f, c in enumerate(self.lost_by_failures) if c}

    def loss_prob(self, p):
        p = _p(p)
        total = 0.0 * np.asarray(p)
        for f in range(self.n, -1, -1):
            c = self.lost_by_failures[f]
            if c:
                total = total + c * p ** f * (1 - p) ** (self.n - f)
        return float(total) if np.ndim(total) == 0 else total


def _upward_closure(marks: np.ndarray, n: int) -> np.ndarray:
    # marks[mask] |= marks[submask] for every submask
    out = marks.copy()
    for b in range(n):
        view = out.reshape(-1, 2, 1 << b)
        view[:, 1, :] |= view[:, 0, :]
    return out


@lru_cache(maxsize=256)
def _recoverable_masks(params: CodeParams, gamma: int):
    n, k = params.n, params.k
    size = 1 << n
    popcount = np.bitwise_count(np.arange(size, dtype=np.uint64)).astype(np.int64)
    if params.h:
        full_ok = popcount >= k
    else:
        marks = np.zeros(size, dtype=bool)
        for rows in combinations(range(n), k):
            try:
                _inverse_rows(params, rows)
            except SingularMatrixError:
                continue
            marks[sum(1 << r for r in rows)] = True
        full_ok = _upward_closure(marks, n)
    sparse_ok = np.zeros(size, dtype=bool)
    if 1 <= gamma and 2 * gamma < k:
        zeros = np.count_nonzero(params.generator.data == 0, axis=1)
        cand = [i for i in range(n) if zeros[i] < 2 * gamma]
        for rows in combinations(cand, 2 * gamma):
            if qualifies(params, rows, gamma):
                sparse_ok[sum(1 << r for r in rows)] = True
        sparse_ok = _upward_closure(sparse_ok, n)
    if gamma == 0:
        sparse_ok[:] = True
    return full_ok, sparse_ok, popcount


def census(params: CodeParams, gamma: int) -> Census:
    """Exhaustively classify every nonempty failure pattern of the ``n`` nodes.

    ``recoverable_mds`` counts patterns leaving an invertible set of ``k``
    live shares; ``recoverable_sparse_extra`` those that are recoverable
    only through a ``2*gamma`` sparse-recovery subset.
    """
    n = params.n
    if n > MAX_CENSUS_N:
        raise CensusSizeError(f"census over 2**{n} patterns is infeasible (n <= {MAX_CENSUS_N})")
    full_ok, sparse_ok, popcount = _recoverable_masks(params, gamma)
    allmask = (1 << n) - 1
    alive = allmask - np.arange(1, allmask + 1)  # alive mask of every nonempty failure pattern
    f_ok = full_ok[alive]
    s_ok = sparse_ok[alive] & ~f_ok
    lost = ~(f_ok | s_ok)
    failures = n - popcount[alive]
    lost_by = np.bincount(failures[lost], minlength=n + 1)
    return Census(n, params.k, gamma, int(allmask), int(f_ok.sum()), int(s_ok.sum()),
                  tuple(int(c) for c in lost_by))


def census_loss_prob(params: CodeParams, gamma: int, p):
    return census(params, gamma).loss_prob(p)


def _systematic_twin(params: CodeParams) -> CodeParams:
    if params.systematic:
        return params
    return CodeParams.cauchy(params.n, params.k, True, params.field.width, params.field.poly)


def loss_prob_delta_sys(params: CodeParams, gamma: int, p):
    """Exact loss probability of a ``gamma``-sparse delta under a systematic code."""
    if not params.systematic:
        raise ValueError("loss_prob_delta_sys needs systematic code parameters")
    if not 1 <= gamma <= params.k:
        raise ValueError(f"gamma must be in [1, {params.k}], got {gamma}")
    if 2 * gamma >= params.k:
        return loss_prob_full(params, p)
    return census_loss_prob(params, gamma, p)


def _delta_loss(params, gamma, p, variant: Variant):
    if gamma == 0:
        return 0.0 * np.asarray(_p(p))
    if variant is Variant.NONSYS:
        return loss_prob_delta_nonsys(params, gamma, p)
    if variant is Variant.SYS:
        return loss_prob_delta_sys(_systematic_twin(params), gamma, p)
    return loss_prob_full(params, p)


def archive_retention(params: CodeParams, gammas: Sequence[int], placement: Placement | str, p,
                      variant: Variant | str = Variant.NONSYS):
    """Probability that all ``L = len(gammas) + 1`` versions survive.

    ``gammas`` are the delta sparsities of versions ``2..L``.  Colocated
    placement loses everything exactly when fewer than ``k`` nodes live, so
    it does not depend on the variant; dispersed placement multiplies the
    per-object survival probabilities.
    """
    placement = Placement(placement)
    variant = Variant(variant)
    full = loss_prob_full(params, p)
    if placement is Placement.COLOCATED:
        return 1 - full
    keep = 1 - full
    for g in gammas:
        keep = keep * (1 - _delta_loss(params, g, p, variant))
    return keep


def nines(availability):
    """``-log10(1 - availability)``."""
    a = np.asarray(availability, dtype=float)
    with np.errstate(divide="ignore"):
        out = -np.log10(1 - a)
    return float(out) if out.ndim == 0 else out


def resilience_rows(params: CodeParams, gamma: int, p_grid: Iterable[float], gammas: Sequence[int] | None = None):
    """Rows ``(p, variant, placement, metric, value)`` for a p sweep.

    Census counts are independent of ``p`` and are emitted with an empty
    ``p`` field.
    """
    gammas = [gamma] if gammas is None else list(gammas)
    rows = []
    for variant, prm in ((Variant.NONSYS, params), (Variant.SYS, _systematic_twin(params))):
        if prm.n <= MAX_CENSUS_N:
            c = census(prm if variant is Variant.SYS else _nonsys_twin(params), gamma)
            rows += [("", variant.value, "", "census_patterns", c.patterns),
                     ("", variant.value, "", "census_recoverable_mds", c.recoverable_mds),
                     ("", variant.value, "", "census_sparse_extra", c.recoverable_sparse_extra),
                     ("", variant.value, "", "census_total_handled", c.total_handled)]
    for p in p_grid:
        p = float(p)
        rows.append((p, "all", "", "loss_full", loss_prob_full(params, p)))
        for variant in Variant:
            if variant is not Variant.NONDIFF and 1 <= gamma:
                rows.append((p, variant.value, "", "loss_delta", _delta_loss(params, gamma, p, variant)))
            for placement in Placement:
                r = archive_retention(params, gammas, placement, p, variant)
                rows.append((p, variant.value, placement.value, "retention", float(r)))
                rows.append((p, variant.value, placement.value, "retention_nines", nines(r)))
    return rows


def _nonsys_twin(params: CodeParams) -> CodeParams:
    if not params.systematic:
        return params
    return CodeParams.cauchy(params.n, params.k, False, params.field.width, params.field.poly)


def write_csv(rows, out, header=("p", "variant", "placement", "metric", "value"), comments=()):
    """Write rows to a path or text stream; ``comments`` become ``# ...`` lines."""
    own = isinstance(out, (str, bytes)) or hasattr(out, "__fspath__")
    fh = open(out, "w", newline="") if own else out
    try:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    finally:
        if own:
            fh.close()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v
