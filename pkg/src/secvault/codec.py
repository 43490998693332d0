"""Differential erasure coding of versioned objects.

A version is a length-``k`` vector over GF(2^w), optionally with a trailing
axis of ``m`` symbols per block (shape ``(k, m)``); the code acts on every
column independently.  The first version is encoded in full, later ones as
the difference to their predecessor.  A delta with ``gamma`` nonzero blocks
can be read back from ``2*gamma`` shares instead of ``k`` whenever the
corresponding generator rows have every ``2*gamma`` columns independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from enum import Enum
from functools import lru_cache
from itertools import combinations
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import (
    ConstructionError,
    DimensionError,
    InconsistentSyndromeError,
    InsufficientSharesError,
    SingularMatrixError,
    UnrecoverableError,
    UnusableSubsetError,
)
from .gf import DEFAULT_WIDTH, GF, field as get_field
from .linalg import (
    GfMatrix,
    _all_column_subsets_full_rank,
    _rref,
    cauchy,
    default_cauchy_points,
    identity,
    invert,
    matmul,
    vstack,
)
from .placement import FailurePattern, Placement, PlacementMap

_SPARSE_CHUNK = 1 << 22


class Mode(str, Enum):
    BASIC = "basic"
    OPTIMIZED = "optimized"
    REVERSED = "reversed"


class StoredAs(str, Enum):
    DELTA = "delta"
    FULL = "full"


@dataclass(frozen=True, eq=False)
class CodeParams:
    """An ``(n, k)`` linear code: field, generator matrix and its provenance.

    Use :meth:`cauchy` to build the MDS codes the rest of the package
    assumes.  ``h``/``f`` record the Cauchy points so the generator can be
    rebuilt bit-exactly from a manifest.
    """

    n: int
    k: int
    systematic: bool
    field: GF
    generator: GfMatrix
    h: tuple = ()
    f: tuple = ()

    def __post_init__(self):
        if not self.n > self.k >= 1:
            raise ConstructionError(f"need n > k >= 1, got n={self.n}, k={self.k}")
        if self.generator.shape != (self.n, self.k):
            raise ConstructionError(f"generator must be {self.n}x{self.k}, got {self.generator.shape}")
        if self.generator.field != self.field:
            raise ConstructionError("generator is over a different field")
        if self.systematic and not np.array_equal(self.generator.data[:self.k], np.eye(self.k, dtype=np.int64)):
            raise ConstructionError("systematic generator must start with the identity block")

    @classmethod
    def cauchy(cls, n: int, k: int, systematic: bool = False, width: int = DEFAULT_WIDTH,
               poly: int | None = None, h=None, f=None) -> "CodeParams":
        F = get_field(width, poly)
        rows = n - k if systematic else n
        if not n > k >= 1:
            raise ConstructionError(f"need n > k >= 1, got n={n}, k={k}")
        dh, df = default_cauchy_points(rows, k)
        h = dh if h is None else list(h)
        f = df if f is None else list(f)
        if len(h) != rows or len(f) != k:
            raise ConstructionError(f"need {rows} row points and {k} column points")
        block = cauchy(F, h, f)
        gen = vstack([identity(F, k), block]) if systematic else block
        return cls(n, k, systematic, F, gen, tuple(h), tuple(f))

    def _key(self):
        return (self.n, self.k, self.systematic, self.field, self.generator.data.tobytes())

    def __eq__(self, other):
        return isinstance(other, CodeParams) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @property
    def parity_rows(self) -> list[int]:
        return list(range(self.k, self.n)) if self.systematic else list(range(self.n))

    def encode(self, x) -> np.ndarray:
        return self.generator @ _as_object(x, self)

    def to_dict(self):
        return {"n": self.n, "k": self.k, "width": self.field.width, "poly": self.field.poly,
                "systematic": self.systematic, "h": list(self.h), "f": list(self.f)}

    @classmethod
    def from_dict(cls, d) -> "CodeParams":
        return cls.cauchy(int(d["n"]), int(d["k"]), bool(d["systematic"]), int(d["width"]),
                          int(d["poly"]), d["h"], d["f"])


@dataclass(frozen=True)
class DeltaRecord:
    """What the encoder decided for one incoming version."""

    index: int
    delta: np.ndarray
    gamma: int
    stored_as: StoredAs


@dataclass
class EncodedVersion:
    """One stored object: a codeword plus the bookkeeping needed to read it.

    ``gamma`` is the sparsity of the version delta that produced this
    record (for the anchor record: the number of nonzero blocks of the
    stored version).  ``codeword`` is ``None`` when the record was loaded
    from a manifest and shares live elsewhere.
    """

    index: int
    gamma: int
    stored_as: StoredAs
    codeword: Optional[np.ndarray] = None


@dataclass
class VersionedArchive:
    params: CodeParams
    mode: Mode
    records: list = dc_field(default_factory=list)
    latest: Optional[np.ndarray] = dc_field(default=None, repr=False)

    @property
    def L(self) -> int:
        return len(self.records)

    def record(self, j: int) -> EncodedVersion:
        if not 1 <= j <= self.L:
            raise IndexError(f"version {j} not in 1..{self.L}")
        return self.records[j - 1]

    @property
    def pattern(self) -> list[str]:
        """Stored objects in x/z notation, e.g. ``['x1', 'z2', 'x3']``.

        In reversed mode record ``j < L`` holds ``z_{j+1}``.
        """
        out = []
        for r in self.records:
            if r.stored_as is StoredAs.FULL:
                out.append(f"x{r.index}")
            elif self.mode is Mode.REVERSED:
                out.append(f"z{r.index + 1}")
            else:
                out.append(f"z{r.index}")
        return out

    def append(self, x) -> DeltaRecord:
        """Encode the next version; the only mutating operation on an archive."""
        x = _as_object(x, self.params)
        k = self.params.k
        j = self.L + 1
        if self.latest is None:
            rec = DeltaRecord(1, x, compute_sparsity(x), StoredAs.FULL)
            self.records.append(EncodedVersion(1, rec.gamma, StoredAs.FULL, self.params.encode(x)))
            self.latest = x
            return rec
        if x.shape != self.latest.shape:
            raise DimensionError(f"version shape {x.shape} differs from {self.latest.shape}")
        z = self.latest ^ x
        gamma = compute_sparsity(z)
        if self.mode is Mode.REVERSED:
            prev = self.records[-1]
            self.records[-1] = EncodedVersion(prev.index, gamma, StoredAs.DELTA, self.params.encode(z))
            self.records.append(EncodedVersion(j, compute_sparsity(x), StoredAs.FULL, self.params.encode(x)))
            rec = DeltaRecord(j, z, gamma, StoredAs.DELTA)
        elif self.mode is Mode.OPTIMIZED and 2 * gamma >= k:
            self.records.append(EncodedVersion(j, gamma, StoredAs.FULL, self.params.encode(x)))
            rec = DeltaRecord(j, z, gamma, StoredAs.FULL)
        else:
            self.records.append(EncodedVersion(j, gamma, StoredAs.DELTA, self.params.encode(z)))
            rec = DeltaRecord(j, z, gamma, StoredAs.DELTA)
        self.latest = x
        return rec


def _as_object(x, params: CodeParams) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim not in (1, 2) or x.shape[0] != params.k:
        raise DimensionError(f"a version must have shape (k,) or (k, m) with k={params.k}, got {x.shape}")
    if x.dtype.kind not in "iu" or (x.size and (x.min() < 0 or x.max() >= params.field.order)):
        raise ValueError(f"version entries are not elements of {params.field!r}")
    return x.astype(np.int64)


def compute_sparsity(z) -> int:
    """Number of nonzero blocks (entries, for 1-D input) of ``z``."""
    z = np.asarray(z)
    if z.ndim == 1:
        return int(np.count_nonzero(z))
    return int(np.count_nonzero(z.reshape(z.shape[0], -1).any(axis=1)))


def encode_archive(versions: Sequence, params: CodeParams, mode: Mode | str = Mode.BASIC) -> VersionedArchive:
    versions = list(versions)
    if not versions:
        raise ValueError("at least one version is required")
    archive = VersionedArchive(params, Mode(mode))
    for x in versions:
        archive.append(x)
    return archive


# -- decoding -------------------------------------------------------------


def _split_shares(shares, params: CodeParams):
    idx = [int(i) for i, _ in shares]
    if len(set(idx)) != len(idx):
        raise ValueError(f"duplicate share index in {idx}")
    if any(not 0 <= i < params.n for i in idx):
        raise IndexError(f"share index out of range for n={params.n}: {idx}")
    vals = [np.asarray(v, dtype=np.int64) for _, v in shares]
    if vals and any(v.shape != vals[0].shape for v in vals):
        raise DimensionError("all shares must have the same shape")
    return idx, vals


@lru_cache(maxsize=4096)
def _inverse_rows(params: CodeParams, rows: tuple) -> np.ndarray:
    return invert(params.generator.take_rows(rows)).data


def decode_full(shares, params: CodeParams) -> np.ndarray:
    """Recover a full object from at least ``k`` shares ``(index, value)``."""
    idx, vals = _split_shares(shares, params)
    k = params.k
    if len(idx) < k:
        raise InsufficientSharesError(f"need {k} shares, got {len(idx)}")
    by_index = dict(zip(idx, vals))
    if params.systematic and all(i in by_index for i in range(k)):
        return np.stack([by_index[i] for i in range(k)])
    for rows in combinations(sorted(idx), k):
        try:
            inv = _inverse_rows(params, rows)
        except SingularMatrixError:
            continue
        return matmul(params.field, inv, np.stack([by_index[i] for i in rows]))
    raise SingularMatrixError(f"no invertible {k}x{k} submatrix among rows {sorted(idx)}")


@lru_cache(maxsize=65536)
def qualifies(params: CodeParams, rows: tuple, gamma: int) -> bool:
    """Whether generator ``rows`` (exactly ``2*gamma``) allow ``gamma``-sparse recovery."""
    if len(rows) != 2 * gamma or 2 * gamma >= params.k:
        return False
    return _all_column_subsets_full_rank(params.field, params.generator.data[list(rows)], 2 * gamma)


class SparseDecoder:
    """Support-enumeration decoder for a fixed ``2*gamma x k`` matrix.

    For every size-``gamma`` support ``S`` an invertible ``E_S`` is
    precomputed with ``E_S @ phi[:, S] = [I; 0]``.  An observation ``y`` is
    consistent with ``S`` iff the lower ``gamma`` rows of ``E_S @ y``
    vanish, and then the upper rows are the nonzero values.
    """

    def __init__(self, F: GF, phi: np.ndarray, gamma: int):
        self.field = F
        self.gamma = gamma
        self.k = phi.shape[1]
        supports, solve, check = [], [], []
        eye = np.eye(2 * gamma, dtype=np.int64)
        for S in combinations(range(self.k), gamma):
            red, piv = _rref(F, np.hstack([phi[:, S], eye]))
            if piv[:gamma] != list(range(gamma)):
                continue
            supports.append(S)
            solve.append(red[:gamma, gamma:])
            check.append(red[gamma:, gamma:])
        self.supports = np.array(supports, dtype=np.int64).reshape(len(supports), gamma)
        self.solve = np.array(solve, dtype=np.int64).reshape(len(supports), gamma, 2 * gamma)
        self.check = np.array(check, dtype=np.int64).reshape(len(supports) * gamma, 2 * gamma)

    def __call__(self, y) -> np.ndarray:
        """Decode each column of ``y`` (shape ``(2*gamma,)`` or ``(2*gamma, B)``)."""
        y = np.asarray(y, dtype=np.int64)
        vector = y.ndim == 1
        Y = y.reshape(y.shape[0], -1)
        B = Y.shape[1]
        g = self.gamma
        out = np.zeros((self.k, B), dtype=np.int64)
        if g == 0 or B == 0:
            if g == 0 and Y.size and np.any(Y):  # pragma: no cover - no rows read when gamma == 0
                raise InconsistentSyndromeError("nonzero observation for an all-zero delta")
            return out[:, 0] if vector else out
        nS = len(self.supports)
        step = max(1, _SPARSE_CHUNK // max(1, nS * g))
        for lo in range(0, B, step):
            Yc = Y[:, lo:lo + step]
            resid = matmul(self.field, self.check, Yc).reshape(nS, g, -1)
            ok = ~resid.any(axis=1)
            found = ok.any(axis=0)
            if not found.all():
                bad = lo + int(np.flatnonzero(~found)[0])
                raise InconsistentSyndromeError(
                    f"no {g}-sparse vector matches the observed shares (column {bad})")
            s = np.argmax(ok, axis=0)
            E = self.solve[s]
            vals = np.zeros((Yc.shape[1], g), dtype=np.int64)
            for t in range(2 * g):
                vals ^= self.field._mul(E[:, :, t], Yc[t][:, None])
            cols = np.arange(lo, lo + Yc.shape[1])
            out[self.supports[s].T, cols[None, :]] = vals.T
        return out[:, 0] if vector else out


@lru_cache(maxsize=1024)
def sparse_decoder(params: CodeParams, rows: tuple, gamma: int) -> SparseDecoder:
    return SparseDecoder(params.field, params.generator.data[list(rows)], gamma)


def decode_sparse(shares, gamma: int, params: CodeParams) -> np.ndarray:
    """Recover a ``gamma``-sparse object from exactly ``2*gamma`` shares."""
    idx, vals = _split_shares(shares, params)
    if gamma == 0:
        if idx:
            raise InsufficientSharesError("a 0-sparse delta is read from zero shares")
        return np.zeros(params.k, dtype=np.int64)
    if len(idx) != 2 * gamma:
        raise InsufficientSharesError(f"need exactly {2 * gamma} shares for gamma={gamma}, got {len(idx)}")
    if 2 * gamma >= params.k:
        raise UnusableSubsetError(f"2*gamma={2 * gamma} is not below k={params.k}")
    rows = tuple(idx)
    if not qualifies(params, tuple(sorted(rows)), gamma):
        raise UnusableSubsetError(f"rows {sorted(rows)} do not support {gamma}-sparse recovery")
    return sparse_decoder(params, rows, gamma)(np.stack(vals))


def first_qualifying_subset(params: CodeParams, gamma: int, alive: Iterable[int]) -> Optional[tuple]:
    """Lowest qualifying ``2*gamma`` subset of ``alive`` shares, or ``None``.

    Rows with ``2*gamma`` or more zero entries are skipped outright (they
    vanish on some column subset); for systematic codes this drops every
    identity row, so parity rows are what remains.
    """
    width = 2 * gamma
    if width == 0 or width >= params.k:
        return None
    zeros = np.count_nonzero(params.generator.data == 0, axis=1)
    cand = sorted(i for i in alive if zeros[i] < width)
    for rows in combinations(cand, width):
        if qualifies(params, rows, gamma):
            return rows
    return None


# -- planning and retrieval -------------------------------------------------


def read_cost(params: CodeParams, gamma: int, stored_as: StoredAs | str = StoredAs.DELTA) -> int:
    """Closed-form read count for one stored object with every node alive."""
    k = params.k
    if StoredAs(stored_as) is StoredAs.FULL:
        return k
    if gamma == 0:
        return 0
    if 2 * gamma >= k:
        return k
    if params.systematic:
        return 2 * gamma if 2 * gamma <= params.n - k else k
    return 2 * gamma


@dataclass(frozen=True)
class ObjectRead:
    record: int
    shares: tuple
    path: str  # "full", "sparse" or "zero"

    @property
    def reads(self) -> int:
        return len(self.shares)


@dataclass
class IoReport:
    """Reads per stored object for one retrieval, planned or executed."""

    versions: tuple
    restart: int
    steps: list = dc_field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(s.reads for s in self.steps)

    @property
    def per_object(self) -> dict:
        return {s.record: s.reads for s in self.steps}


RetrievalPlan = IoReport


def _restart_index(archive: VersionedArchive, l: int) -> int:
    if archive.mode is Mode.REVERSED:
        return archive.L
    for j in range(l, 0, -1):
        if archive.record(j).stored_as is StoredAs.FULL:
            return j
    raise ValueError("archive has no full anchor record")  # pragma: no cover


def _needed_records(archive: VersionedArchive, l: int, prefix: bool) -> list[int]:
    if not 1 <= l <= archive.L:
        raise IndexError(f"version {l} not in 1..{archive.L}")
    if archive.mode is Mode.REVERSED:
        start = 1 if prefix else l
        return list(range(archive.L, start - 1, -1))
    if prefix:
        return list(range(1, l + 1))
    return list(range(_restart_index(archive, l), l + 1))


def _plan_object(params: CodeParams, rec: EncodedVersion, alive: list[int]) -> ObjectRead:
    k = params.k
    if rec.stored_as is StoredAs.DELTA and rec.gamma == 0:
        return ObjectRead(rec.index, (), "zero")
    if rec.stored_as is StoredAs.DELTA and 2 * rec.gamma < k:
        rows = first_qualifying_subset(params, rec.gamma, alive)
        if rows is not None:
            return ObjectRead(rec.index, rows, "sparse")
    if len(alive) < k:
        raise UnrecoverableError(
            f"record {rec.index} is lost: {len(alive)} live shares, {k} needed", record=rec.index)
    if params.systematic and set(range(k)) <= set(alive):
        return ObjectRead(rec.index, tuple(range(k)), "full")
    for rows in combinations(sorted(alive), k):
        try:
            _inverse_rows(params, rows)
        except SingularMatrixError:
            continue
        return ObjectRead(rec.index, rows, "full")
    raise UnrecoverableError(f"record {rec.index}: no invertible set of live shares", record=rec.index)


def _placement_for(archive, placement):
    if placement is None:
        return PlacementMap(Placement.COLOCATED, archive.params.n, archive.L)
    return placement


def retrieval_plan(archive: VersionedArchive, l: int, failed=None, placement: PlacementMap | None = None,
                   prefix: bool = False) -> IoReport:
    """Which shares to read to rebuild version ``l`` (or versions ``1..l`` with ``prefix``).

    ``failed`` is a :class:`FailurePattern` or iterable of failed node ids,
    interpreted through ``placement`` (colocated by default).
    """
    placement = _placement_for(archive, placement)
    records = _needed_records(archive, l, prefix)
    versions = tuple(range(1, l + 1)) if prefix else (l,)
    restart = archive.L if archive.mode is Mode.REVERSED else (1 if prefix else _restart_index(archive, l))
    report = IoReport(versions, restart)
    for j in records:
        alive = placement.alive_shares(j, failed)
        report.steps.append(_plan_object(archive.params, archive.record(j), alive))
    return report


def archive_reader(archive: VersionedArchive) -> Callable[[int, int], Optional[np.ndarray]]:
    def read(record: int, share: int):
        cw = archive.record(record).codeword
        return None if cw is None else cw[share]
    return read


def _object_shape(archive: VersionedArchive):
    if archive.latest is not None:
        return archive.latest.shape
    for r in archive.records:
        if r.codeword is not None:
            return (archive.params.k,) + r.codeword.shape[1:]
    return (archive.params.k,)


def _execute(archive, l, failed, placement, reader, prefix, shape):
    placement = _placement_for(archive, placement)
    reader = reader or archive_reader(archive)
    records = _needed_records(archive, l, prefix)
    versions = tuple(range(1, l + 1)) if prefix else (l,)
    restart = archive.L if archive.mode is Mode.REVERSED else (1 if prefix else _restart_index(archive, l))
    report = IoReport(versions, restart)
    extra_dead = {}
    objects = {}
    shape = shape or _object_shape(archive)
    for j in records:
        rec = archive.record(j)
        dead = extra_dead.setdefault(j, set())
        while True:
            alive = [i for i in placement.alive_shares(j, failed) if i not in dead]
            step = _plan_object(archive.params, rec, alive)
            got = []
            for i in step.shares:
                v = reader(j, i)
                if v is None:
                    dead.add(i)
                    break
                got.append((i, v))
            else:
                break
        report.steps.append(step)
        if step.path == "zero":
            objects[j] = np.zeros(shape, dtype=np.int64)
        elif step.path == "sparse":
            objects[j] = decode_sparse(got, rec.gamma, archive.params)
        else:
            objects[j] = decode_full(got, archive.params)
    return objects, report


def retrieve(archive: VersionedArchive, l: int, failed=None, placement: PlacementMap | None = None,
             reader=None, shape=None) -> tuple[np.ndarray, IoReport]:
    """Rebuild version ``l``; returns the version and the reads actually made.

    ``reader(record, share)`` returns the share payload or ``None`` if it
    is unavailable; by default shares come from the in-memory codewords.
    """
    objects, report = _execute(archive, l, failed, placement, reader, False, shape)
    return _assemble(archive, objects, [l])[0], report


def retrieve_prefix(archive: VersionedArchive, l: int, failed=None, placement: PlacementMap | None = None,
                    reader=None, shape=None) -> tuple[list, IoReport]:
    """Rebuild versions ``1..l`` reading every needed object once."""
    objects, report = _execute(archive, l, failed, placement, reader, True, shape)
    return _assemble(archive, objects, range(1, l + 1)), report


def _assemble(archive, objects, wanted) -> list:
    wanted = list(wanted)
    out = {}
    if archive.mode is Mode.REVERSED:
        x = objects[archive.L]
        out[archive.L] = x
        for j in range(archive.L - 1, min(wanted) - 1, -1):
            x = x ^ objects[j]
            out[j] = x
    else:
        x = None
        for j in range(min(objects), max(wanted) + 1):
            rec = archive.record(j)
            x = objects[j] if rec.stored_as is StoredAs.FULL or x is None else x ^ objects[j]
            out[j] = x
    return [out[j] for j in wanted]
