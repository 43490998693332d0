"""On-disk archives: one directory per archive, one share file per (version, node).

Layout::

    <root>/<archive-id>/manifest
    <root>/<archive-id>/node-<i>/v<j>.share

The manifest is JSON.  A share file is a fixed header followed by the
payload symbols, little-endian, one byte per symbol for ``w <= 8`` and
two bytes otherwise.  A missing share file (or node directory) counts
as a failed node.
"""

from __future__ import annotations

import json
import os
import re
import struct
import tempfile
import zlib
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .codec import CodeParams, EncodedVersion, Mode, StoredAs, VersionedArchive, _object_shape
from .errors import ArchiveExistsError, CorruptShareError
from .placement import Placement, PlacementMap

FORMAT_VERSION = 1
MAGIC = b"SECSHARE"
# magic, format version, archive id, version index, node index, share index,
# symbol width, pad, symbol count, payload crc32
HEADER = struct.Struct("<8sH64sIIHBxII")
MANIFEST_NAME = "manifest"
_ID_RE = re.compile(r"^[A-Za-z0-9._-]{1,64}$")


def symbol_bytes(width: int) -> int:
    return 1 if width <= 8 else 2


def _dtype(width: int):
    return np.dtype("<u1") if width <= 8 else np.dtype("<u2")


def _check_id(archive_id: str):
    if not _ID_RE.match(archive_id) or archive_id in (".", ".."):
        raise ValueError(f"archive id {archive_id!r} must be 1-64 characters of [A-Za-z0-9._-]")


@dataclass
class VersionEntry:
    index: int
    gamma: int
    stored_as: StoredAs
    checksums: list  # crc32 of each share payload, by share index

    def to_dict(self):
        return {"index": self.index, "gamma": self.gamma, "stored_as": self.stored_as.value,
                "checksums": list(self.checksums)}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["index"]), int(d["gamma"]), StoredAs(d["stored_as"]), [int(c) for c in d["checksums"]])


@dataclass
class Manifest:
    archive_id: str
    params: CodeParams
    mode: Mode
    placement: PlacementMap
    versions: list
    object_shape: tuple
    format_version: int = FORMAT_VERSION
    extra: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if [v.index for v in self.versions] != list(range(1, len(self.versions) + 1)):
            raise ValueError("manifest version records must be contiguous from 1")
        if self.placement.n != self.params.n or self.placement.records != len(self.versions):
            raise ValueError("placement map does not match the code and version count")

    @property
    def L(self) -> int:
        return len(self.versions)

    def to_dict(self):
        return {
            "format_version": self.format_version,
            "archive_id": self.archive_id,
            "code": self.params.to_dict(),
            "mode": self.mode.value,
            "placement": self.placement.to_dict(),
            "object_shape": list(self.object_shape),
            "versions": [v.to_dict() for v in self.versions],
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d) -> "Manifest":
        if d.get("format_version") != FORMAT_VERSION:
            raise CorruptShareError(f"unsupported manifest format {d.get('format_version')!r}")
        return cls(d["archive_id"], CodeParams.from_dict(d["code"]), Mode(d["mode"]),
                   PlacementMap.from_dict(d["placement"]),
                   [VersionEntry.from_dict(v) for v in d["versions"]],
                   tuple(int(s) for s in d["object_shape"]), int(d["format_version"]), dict(d.get("extra", {})))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Manifest":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        return isinstance(other, Manifest) and self.to_dict() == other.to_dict() and self.params == other.params


def share_path(root, archive_id: str, node: int, version: int) -> Path:
    return Path(root) / archive_id / f"node-{node}" / f"v{version}.share"


def encode_share(archive_id: str, version: int, node: int, share: int, width: int, payload) -> bytes:
    body = np.ascontiguousarray(np.asarray(payload).ravel(), dtype=_dtype(width)).tobytes()
    count = np.asarray(payload).size
    head = HEADER.pack(MAGIC, FORMAT_VERSION, archive_id.encode(), version, node, share, width,
                       count, zlib.crc32(body))
    return head + body


def decode_share(blob: bytes, width: int | None = None):
    """Parse a share file; returns ``(header fields dict, flat symbol array)``."""
    if len(blob) < HEADER.size:
        raise CorruptShareError("share file shorter than its header")
    magic, fmt, aid, version, node, share, w, count, crc = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CorruptShareError("bad share magic")
    if fmt != FORMAT_VERSION:
        raise CorruptShareError(f"unsupported share format {fmt}")
    if width is not None and w != width:
        raise CorruptShareError(f"share symbol width {w} does not match the code width {width}")
    body = blob[HEADER.size:]
    if len(body) != count * symbol_bytes(w):
        raise CorruptShareError(f"payload is {len(body)} bytes, header declares {count} symbols")
    if zlib.crc32(body) != crc:
        raise CorruptShareError("payload checksum mismatch")
    values = np.frombuffer(body, dtype=_dtype(w)).astype(np.int64)
    if values.size and values.max() >= 1 << w:
        raise CorruptShareError("payload symbol out of range for the field")
    head = {"archive_id": aid.rstrip(b"\0").decode(), "version": version, "node": node,
            "share": share, "width": w, "count": count, "crc": crc}
    return head, values


def _atomic_write(path: Path, data: bytes):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_archive(archive: VersionedArchive, root, archive_id: str,
                  placement: Placement | str = Placement.COLOCATED, extra: dict | None = None) -> Manifest:
    """Write every share of every stored object, then commit the manifest.

    Raises :class:`ArchiveExistsError` if ``archive_id`` already exists
    under ``root``.
    """
    _check_id(archive_id)
    params = archive.params
    if any(r.codeword is None for r in archive.records):
        raise ValueError("archive has records without codewords; nothing to write")
    base = Path(root) / archive_id
    try:
        base.mkdir(parents=True, exist_ok=False)
    except FileExistsError:
        raise ArchiveExistsError(f"archive {archive_id!r} already exists under {root}") from None
    pmap = PlacementMap(Placement(placement), params.n, archive.L)
    w = params.field.width
    entries = []
    for rec in archive.records:
        sums = []
        for i in range(params.n):
            node = pmap.node(rec.index, i)
            path = share_path(root, archive_id, node, rec.index)
            path.parent.mkdir(exist_ok=True)
            blob = encode_share(archive_id, rec.index, node, i, w, rec.codeword[i])
            path.write_bytes(blob)
            sums.append(HEADER.unpack_from(blob)[-1])
        entries.append(VersionEntry(rec.index, rec.gamma, rec.stored_as, sums))
    manifest = Manifest(archive_id, params, archive.mode, pmap, entries, tuple(_object_shape(archive)),
                        extra=dict(extra or {}))
    _atomic_write(base / MANIFEST_NAME, manifest.dumps().encode())
    return manifest


def load_manifest(root, archive_id: str) -> Manifest:
    _check_id(archive_id)
    return Manifest.loads((Path(root) / archive_id / MANIFEST_NAME).read_text())


def read_share(root, manifest: Manifest, version: int, share: int) -> Optional[np.ndarray]:
    """One share of one stored object, or ``None`` if its file is gone."""
    node = manifest.placement.node(version, share)
    path = share_path(root, manifest.archive_id, node, version)
    try:
        blob = path.read_bytes()
    except FileNotFoundError:
        return None
    head, values = decode_share(blob, manifest.params.field.width)
    expect = (manifest.archive_id, version, node, share)
    if (head["archive_id"], head["version"], head["node"], head["share"]) != expect:
        raise CorruptShareError(f"{path}: header does not match its location")
    if head["crc"] != manifest.versions[version - 1].checksums[share]:
        raise CorruptShareError(f"{path}: checksum differs from the manifest")
    inner = manifest.object_shape[1:]
    if values.size != int(np.prod(inner, dtype=np.int64)):
        raise CorruptShareError(f"{path}: {values.size} symbols, expected shape {inner}")
    return values.reshape(inner) if inner else values.reshape(())


def read_shares(root, archive_id: str, version: int, shares: Iterable[int], failed: Iterable[int] = ()):
    """Read shares of stored object ``version``.

    Returns ``[(share index, payload or None)]``; ``None`` marks an erased
    share (failed node or missing file).
    """
    manifest = load_manifest(root, archive_id)
    dead = set(int(f) for f in failed)
    out = []
    for i in shares:
        if manifest.placement.node(version, i) in dead:
            out.append((i, None))
        else:
            out.append((i, read_share(root, manifest, version, i)))
    return out


@dataclass
class OpenArchive:
    manifest: Manifest
    archive: VersionedArchive
    root: Path
    reads: int = 0

    def reader(self, version: int, share: int):
        self.reads += 1
        return read_share(self.root, self.manifest, version, share)

    @property
    def shape(self):
        return self.manifest.object_shape

    @property
    def placement(self) -> PlacementMap:
        return self.manifest.placement


def open_archive(root, archive_id: str) -> OpenArchive:
    """Load a manifest as a codeword-free archive plus a share reader for ``codec.retrieve``."""
    manifest = load_manifest(root, archive_id)
    records = [EncodedVersion(v.index, v.gamma, v.stored_as) for v in manifest.versions]
    archive = VersionedArchive(manifest.params, manifest.mode, records)
    return OpenArchive(manifest, archive, Path(root))
