"""Mapping of encoded shares onto storage nodes, and node failure patterns."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable


class Placement(str, Enum):
    COLOCATED = "colocated"
    DISPERSED = "dispersed"


@dataclass(frozen=True)
class PlacementMap:
    """Which node stores share ``i`` of stored object ``j`` (both 0/1-based resp.).

    Colocated placement reuses nodes ``0..n-1`` for every object; dispersed
    placement gives object ``j`` its own range ``(j-1)*n .. j*n-1``.
    """

    strategy: Placement
    n: int
    records: int

    def __post_init__(self):
        object.__setattr__(self, "strategy", Placement(self.strategy))
        if self.n < 1 or self.records < 1:
            raise ValueError("placement needs n >= 1 and at least one record")

    @property
    def node_count(self) -> int:
        return self.n if self.strategy is Placement.COLOCATED else self.n * self.records

    def node(self, record: int, share: int) -> int:
        if not 1 <= record <= self.records or not 0 <= share < self.n:
            raise IndexError(f"no share {share} of record {record}")
        if self.strategy is Placement.COLOCATED:
            return share
        return (record - 1) * self.n + share

    def nodes(self, record: int) -> list[int]:
        return [self.node(record, i) for i in range(self.n)]

    def alive_shares(self, record: int, failed: "FailurePattern | Iterable[int] | None") -> list[int]:
        dead = _failed_set(failed)
        return [i for i in range(self.n) if self.node(record, i) not in dead]

    def to_dict(self):
        return {"strategy": self.strategy.value, "n": self.n, "records": self.records}

    @classmethod
    def from_dict(cls, d):
        return cls(Placement(d["strategy"]), int(d["n"]), int(d["records"]))


@dataclass(frozen=True)
class FailurePattern:
    """Set of failed node ids out of ``node_count`` nodes."""

    failed: frozenset
    node_count: int

    def __post_init__(self):
        object.__setattr__(self, "failed", frozenset(int(i) for i in self.failed))
        if any(not 0 <= i < self.node_count for i in self.failed):
            raise ValueError(f"failed node id out of range [0, {self.node_count})")

    @classmethod
    def from_bitmap(cls, bitmap: int, node_count: int) -> "FailurePattern":
        return cls(frozenset(i for i in range(node_count) if bitmap >> i & 1), node_count)

    @classmethod
    def none(cls, node_count: int) -> "FailurePattern":
        return cls(frozenset(), node_count)

    @property
    def bitmap(self) -> int:
        return sum(1 << i for i in self.failed)

    @property
    def alive(self) -> list[int]:
        return [i for i in range(self.node_count) if i not in self.failed]

    def __contains__(self, node):
        return node in self.failed

    def __len__(self):
        return len(self.failed)


def _failed_set(failed) -> frozenset:
    if failed is None:
        return frozenset()
    if isinstance(failed, FailurePattern):
        return failed.failed
    return frozenset(int(i) for i in failed)
