"""Exact visit counts and the occupancy spectrum of a symbol stream.

``OccupancyCounter`` keeps, for every state seen so far, its number of
visits, and alongside it the count-of-counts histogram ``k -> #{states
visited exactly k times}``.  Each observation moves one state from bucket
``k`` to bucket ``k + 1``, so updates are O(1).
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .symbols import Symbol, encode, is_fresh_code


class FreshCollisionError(ValueError):
    """Two shards reused the same fresh id."""


@dataclass(frozen=True)
class OccupancySpectrum:
    """Immutable snapshot: ``n``, ``R_n`` and the nonzero entries of ``k -> R_{n,k}``."""

    n: int
    distinct: int
    spectrum: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "spectrum", dict(sorted(
            (int(k), int(v)) for k, v in self.spectrum.items() if v)))

    def count(self, k: int) -> int:
        """R_{n,k}, the number of states seen exactly ``k`` times."""
        return self.spectrum.get(k, 0)

    def tail(self, k: int) -> int:
        return tail_count(self, k)

    @property
    def singletons(self) -> int:
        return self.count(1)

    def check(self) -> None:
        """Raise AssertionError unless the counting identities hold."""
        if sum(self.spectrum.values()) != self.distinct:
            raise AssertionError(f"sum_k R_nk = {sum(self.spectrum.values())} != R_n = {self.distinct}")
        mass = sum(k * v for k, v in self.spectrum.items())
        if mass != self.n:
            raise AssertionError(f"sum_k k R_nk = {mass} != n = {self.n}")

    def scaled(self, c: int) -> OccupancySpectrum:
        """Every bucket multiplied by ``c``; a synthetic input for scale checks."""
        return OccupancySpectrum(self.n * c, self.distinct * c,
                                 {k: v * c for k, v in self.spectrum.items()})

    def to_dict(self) -> dict:
        return {"n": self.n, "distinct": self.distinct,
                "spectrum": {str(k): v for k, v in self.spectrum.items()}}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: Mapping) -> OccupancySpectrum:
        try:
            spectrum = {int(k): int(v) for k, v in data["spectrum"].items()}
            n = int(data["n"])
            distinct = int(data.get("distinct", sum(spectrum.values())))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ValueError(f"malformed spectrum: {exc}") from exc
        if any(k < 1 or v < 0 for k, v in spectrum.items()):
            raise ValueError("spectrum keys must be >= 1 and counts >= 0")
        spec = cls(n, distinct, spectrum)
        try:
            spec.check()
        except AssertionError as exc:
            raise ValueError(f"inconsistent spectrum: {exc}") from exc
        return spec

    @classmethod
    def from_json(cls, text: str) -> OccupancySpectrum:
        return cls.from_dict(json.loads(text))


def tail_count(spec: OccupancySpectrum, k: int) -> int:
    """R_{n,k+}: number of states visited at least ``k`` times."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k == 1:
        return spec.distinct
    return sum(v for j, v in spec.spectrum.items() if j >= k)


class OccupancyCounter:
    """Running visit counts ``N_n(x)`` of a stream.

    States are integer codes (see ``symbols``); ``observe`` also accepts
    ``Atom``/``Fresh`` instances.  Single writer only.
    """

    def __init__(self, stream: Iterable[Symbol | int] = ()):
        self.n = 0
        self.visits: dict[int, int] = {}
        self.count_of_counts: Counter[int] = Counter()
        for s in stream:
            self.observe(s)

    def observe(self, s: Symbol | int) -> OccupancyCounter:
        code = encode(s)
        visits = self.visits
        cc = self.count_of_counts
        old = visits.get(code, 0)
        visits[code] = old + 1
        if old:
            if cc[old] == 1:
                del cc[old]
            else:
                cc[old] -= 1
        cc[old + 1] += 1
        self.n += 1
        return self

    def observe_many(self, codes) -> OccupancyCounter:
        """Observe a batch of integer codes; same result as observing them one by one."""
        codes = np.asarray(codes, dtype=np.int64).ravel()
        if codes.size == 0:
            return self
        keys, cnts = np.unique(codes, return_counts=True)
        self._add_counts(keys.tolist(), cnts.tolist())
        self.n += int(codes.size)
        return self

    def _add_counts(self, keys: list[int], cnts: list[int]) -> None:
        get = self.visits.get
        old = [get(k, 0) for k in keys]
        new = [o + c for o, c in zip(old, cnts)]
        self.visits.update(zip(keys, new))
        cc = self.count_of_counts
        cc.subtract(o for o in old if o)
        cc.update(new)
        for k in [k for k, v in cc.items() if v == 0]:
            del cc[k]

    @property
    def distinct(self) -> int:
        return len(self.visits)

    def spectrum(self) -> OccupancySpectrum:
        return OccupancySpectrum(self.n, len(self.visits), dict(self.count_of_counts))

    def copy(self) -> OccupancyCounter:
        c = OccupancyCounter()
        c.n = self.n
        c.visits = dict(self.visits)
        c.count_of_counts = Counter(self.count_of_counts)
        return c

    def __eq__(self, other):
        if not isinstance(other, OccupancyCounter):
            return NotImplemented
        return (self.n == other.n and self.visits == other.visits
                and self.count_of_counts == other.count_of_counts)

    def __repr__(self):
        return f"OccupancyCounter(n={self.n}, distinct={self.distinct})"


def observe(counter: OccupancyCounter, s: Symbol | int) -> OccupancyCounter:
    return counter.observe(s)


def spectrum(counter: OccupancyCounter) -> OccupancySpectrum:
    return counter.spectrum()


def merge(a: OccupancyCounter, b: OccupancyCounter) -> OccupancyCounter:
    """Counter of the concatenated streams of ``a`` and ``b``.

    Fresh ids of the two counters must be disjoint, otherwise the merged
    counter would report a repeat that never happened.
    """
    if len(b.visits) > len(a.visits):
        a, b = b, a
    shared_fresh = [code for code in b.visits if is_fresh_code(code) and code in a.visits]
    if shared_fresh:
        raise FreshCollisionError(
            f"{len(shared_fresh)} fresh id(s) appear in both counters, e.g. id {-1 - shared_fresh[0]}")
    out = a.copy()
    out._add_counts(list(b.visits), list(b.visits.values()))
    out.n += b.n
    return out


def brute_force_spectrum(stream: Iterable[Symbol | int]) -> OccupancySpectrum:
    """Recount from scratch; used as an oracle for the incremental counter."""
    visits = Counter(encode(s) for s in stream)
    return OccupancySpectrum(sum(visits.values()), len(visits), Counter(visits.values()))


def prefix_spectra(codes, max_k: int) -> tuple[np.ndarray, np.ndarray]:
    """Range and low spectrum of every prefix of ``codes`` in one vectorized pass.

    Returns ``(distinct, table)`` where ``distinct[i]`` is R_{i+1} and
    ``table[i, k - 1]`` is R_{i+1,k} for ``k = 1..max_k``.  Each step where
    a state reaches its ``c``-th visit adds one to bucket ``c`` and removes
    one from bucket ``c - 1``; the table is the running sum of those moves.
    """
    codes = np.asarray(codes, dtype=np.int64).ravel()
    n = codes.size
    order = np.argsort(codes, kind="stable")
    sorted_codes = codes[order]
    starts = np.ones(n, dtype=bool)
    starts[1:] = sorted_codes[1:] != sorted_codes[:-1]
    run_start = np.maximum.accumulate(np.where(starts, np.arange(n), 0))
    visit_no = np.empty(n, dtype=np.int64)
    visit_no[order] = np.arange(n) - run_start + 1

    distinct = np.cumsum(visit_no == 1)
    table = np.zeros((n, max_k), dtype=np.int64)
    rows = np.arange(n)
    enter = visit_no <= max_k
    table[rows[enter], visit_no[enter] - 1] += 1
    leave = (visit_no >= 2) & (visit_no - 1 <= max_k)
    table[rows[leave], visit_no[leave] - 2] -= 1
    np.cumsum(table, axis=0, out=table)
    return distinct, table
