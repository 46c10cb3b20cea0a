"""Stream symbols and their integer encoding.

A state is either an atom (a point of positive mass, identified by its
index) or a fresh draw from the diffuse part, which never coincides with
any other state.  Internally every state is an ``int`` code: atoms map to
``index >= 0`` and fresh draws to ``-1 - id``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union


@dataclass(frozen=True)
class Atom:
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"atom index must be nonnegative, got {self.index}")

    @property
    def code(self) -> int:
        return self.index


@dataclass(frozen=True)
class Fresh:
    id: int

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"fresh id must be nonnegative, got {self.id}")

    @property
    def code(self) -> int:
        return -1 - self.id


Symbol = Union[Atom, Fresh]


def encode(s: Symbol | int) -> int:
    if isinstance(s, (Atom, Fresh)):
        return s.code
    return int(s)


def decode(code: int) -> Symbol:
    code = int(code)
    return Atom(code) if code >= 0 else Fresh(-1 - code)


def is_fresh_code(code: int) -> bool:
    return code < 0


class FreshIdAllocator:
    """Hands out fresh ids so that shards never collide.

    Shard ``s`` of ``num_shards`` draws ids congruent to ``s`` modulo
    ``num_shards``; ids from one allocator are strictly increasing.
    """

    def __init__(self, shard: int = 0, num_shards: int = 1, start: int = 0):
        if num_shards < 1 or not 0 <= shard < num_shards:
            raise ValueError(f"invalid shard {shard} of {num_shards}")
        self.shard = shard
        self.num_shards = num_shards
        self._next = start

    def take(self, count: int) -> range:
        """Reserve ``count`` consecutive ids of this shard."""
        first = self._next
        self._next += count
        step = self.num_shards
        return range(first * step + self.shard, self._next * step + self.shard, step)

    def __iter__(self) -> Iterator[int]:
        while True:
            yield self.take(1)[0]

    @property
    def issued(self) -> int:
        return self._next
