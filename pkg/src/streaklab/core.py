"""Hit/miss sequences and the per-sequence streak statistics.

A sequence is a record of binary outcomes, written as a string of ``H``
(hit) and ``T`` (miss) characters.  Sequences of up to 64 flips are packed
into a single integer word: bit ``i`` holds flip ``i`` (0-based, in reading
order), so ``"HHTT"`` has bits 0 and 1 set.  Longer records, up to 65536
flips, use :class:`LongSequence`, an unpacked boolean array with the same
statistics interface.

All per-sequence statistics are exact :class:`fractions.Fraction` values.
A statistic with no eligible position is *undefined* and is returned as
``None``; deciding what to do with it is left to the caller.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence as Seq, Union

import numpy as np

from .errors import (
    EmptyInput,
    EmptyList,
    InvalidCharacter,
    RunTooLong,
    TooLong,
)

__all__ = [
    "MAX_PACKED_LENGTH",
    "MAX_UNPACKED_LENGTH",
    "Run",
    "StatKind",
    "Sequence",
    "LongSequence",
    "GroupSummary",
    "parse_sequence",
    "parse_flips",
    "run_counts",
    "eligible_trials",
    "conditional_freq",
    "d_statistic",
    "statistic",
    "pooled_mean",
    "unweighted_mean",
    "contains_pattern",
]

MAX_PACKED_LENGTH = 64
MAX_UNPACKED_LENGTH = 1 << 16

_HIT_CHARS = frozenset("Hh")
_MISS_CHARS = frozenset("Tt")


class Run(enum.Enum):
    """Which conditioning run a statistic looks at."""

    HIT = "hit"
    MISS = "miss"
    DIFF = "diff"


@dataclass(frozen=True)
class StatKind:
    """A conditional statistic: hit frequency after a run of ``m`` hits,
    after a run of ``m`` misses, or the difference of the two.

    ``StatKind.after_hit_run(1)`` is the HH-percentage,
    ``StatKind.after_miss_run(1)`` the TH-percentage and
    ``StatKind.difference(1)`` the D statistic.
    """

    run: Run
    m: int = 1

    def __post_init__(self):
        if not isinstance(self.m, int) or self.m < 1:
            raise ValueError(f"run length must be an integer >= 1, got {self.m!r}")

    @classmethod
    def after_hit_run(cls, m: int = 1) -> "StatKind":
        return cls(Run.HIT, m)

    @classmethod
    def after_miss_run(cls, m: int = 1) -> "StatKind":
        return cls(Run.MISS, m)

    @classmethod
    def difference(cls, m: int = 1) -> "StatKind":
        return cls(Run.DIFF, m)

    @classmethod
    def parse(cls, name: str, m: int = 1) -> "StatKind":
        """Build a kind from a short name: ``hh``, ``th`` or ``d``."""
        key = name.strip().lower()
        table = {
            "hh": Run.HIT, "hit": Run.HIT,
            "th": Run.MISS, "miss": Run.MISS,
            "d": Run.DIFF, "diff": Run.DIFF,
        }
        if key not in table:
            raise ValueError(f"unknown statistic {name!r}; expected hh, th or d")
        return cls(table[key], m)

    @property
    def is_difference(self) -> bool:
        return self.run is Run.DIFF

    @property
    def label(self) -> str:
        if self.m == 1:
            return {Run.HIT: "HH", Run.MISS: "TH", Run.DIFF: "D"}[self.run]
        return {Run.HIT: f"H{self.m}H", Run.MISS: f"T{self.m}H", Run.DIFF: f"D{self.m}"}[self.run]

    def sides(self) -> tuple["StatKind", "StatKind"]:
        """The hit-run and miss-run kinds a difference is built from."""
        return StatKind(Run.HIT, self.m), StatKind(Run.MISS, self.m)


@dataclass(frozen=True)
class Sequence:
    """A packed hit/miss record of 1 to 64 flips."""

    bits: int
    length: int

    def __post_init__(self):
        if not 1 <= self.length <= MAX_PACKED_LENGTH:
            raise TooLong(f"sequence length must be in 1..{MAX_PACKED_LENGTH}, got {self.length}")
        if self.bits < 0 or self.bits >> self.length:
            raise ValueError("bits set beyond the sequence length")

    @classmethod
    def from_flips(cls, flips: Iterable[bool]) -> "Sequence":
        bits = 0
        n = 0
        for i, hit in enumerate(flips):
            if hit:
                bits |= 1 << i
            n = i + 1
        return cls(bits, n)

    @property
    def mask(self) -> int:
        return (1 << self.length) - 1

    @property
    def hits(self) -> int:
        return self.bits.bit_count()

    def flip(self, i: int) -> bool:
        """Outcome of flip ``i`` (0-based)."""
        if not 0 <= i < self.length:
            raise IndexError(i)
        return bool(self.bits >> i & 1)

    def flips(self) -> tuple[bool, ...]:
        return tuple(bool(self.bits >> i & 1) for i in range(self.length))

    def complement(self) -> "Sequence":
        return Sequence(~self.bits & self.mask, self.length)

    def text(self) -> str:
        return "".join("H" if self.bits >> i & 1 else "T" for i in range(self.length))

    def __str__(self) -> str:
        return self.text()

    def __len__(self) -> int:
        return self.length


class LongSequence:
    """An unpacked hit/miss record for lengths beyond one machine word."""

    __slots__ = ("_flips",)

    def __init__(self, flips):
        arr = np.asarray(flips, dtype=bool)
        if arr.ndim != 1:
            raise ValueError("flips must be one-dimensional")
        if not 1 <= arr.size <= MAX_UNPACKED_LENGTH:
            raise TooLong(f"sequence length must be in 1..{MAX_UNPACKED_LENGTH}, got {arr.size}")
        arr.setflags(write=False)
        self._flips = arr

    @property
    def length(self) -> int:
        return int(self._flips.size)

    @property
    def hits(self) -> int:
        return int(self._flips.sum())

    @property
    def array(self) -> np.ndarray:
        return self._flips

    def flips(self) -> tuple[bool, ...]:
        return tuple(bool(x) for x in self._flips)

    def complement(self) -> "LongSequence":
        return LongSequence(~self._flips)

    def text(self) -> str:
        return np.where(self._flips, ord("H"), ord("T")).astype(np.uint8).tobytes().decode()

    def __str__(self) -> str:
        return self.text()

    def __len__(self) -> int:
        return self.length

    def __eq__(self, other):
        if isinstance(other, LongSequence):
            return np.array_equal(self._flips, other._flips)
        return NotImplemented

    def __hash__(self):
        return hash(self._flips.tobytes())

    def __repr__(self):
        return f"LongSequence(length={self.length})"


AnySequence = Union[Sequence, LongSequence]


def _scan(text: str, limit: int) -> list[bool]:
    body = text.strip()
    if not body:
        raise EmptyInput("empty sequence")
    flips = []
    for pos, ch in enumerate(body, start=1):
        if ch in _HIT_CHARS:
            flips.append(True)
        elif ch in _MISS_CHARS:
            flips.append(False)
        else:
            raise InvalidCharacter(pos, ch)
    if len(flips) > limit:
        raise TooLong(f"sequence has {len(flips)} flips; limit is {limit}")
    return flips


def parse_sequence(text: str) -> Sequence:
    """Parse an ``H``/``T`` string (case-insensitive) into a packed sequence.

    >>> parse_sequence("hTtH").text()
    'HTTH'
    """
    return Sequence.from_flips(_scan(text, MAX_PACKED_LENGTH))


def parse_flips(text: str) -> AnySequence:
    """Parse a record of any supported length, packing it when it fits."""
    flips = _scan(text, MAX_UNPACKED_LENGTH)
    if len(flips) <= MAX_PACKED_LENGTH:
        return Sequence.from_flips(flips)
    return LongSequence(flips)


def _check_run(seq: AnySequence, m: int) -> None:
    if m >= seq.length:
        raise RunTooLong(f"run length {m} needs a sequence longer than {seq.length}")


def _eligible_mask(seq: Sequence, kind: StatKind) -> int:
    base = seq.bits if kind.run is Run.HIT else ~seq.bits & seq.mask
    # bit t of (base << j) is flip t-j; AND over j = 1..m marks positions
    # preceded by a full run.
    eligible = seq.mask
    for j in range(1, kind.m + 1):
        eligible &= base << j
    return eligible


def _eligible_array(flips: np.ndarray, kind: StatKind) -> np.ndarray:
    m = kind.m
    base = flips if kind.run is Run.HIT else ~flips
    csum = np.concatenate(([0], np.cumsum(base, dtype=np.int64)))
    return csum[m:-1] - csum[:-m - 1] == m


def run_counts(seq: AnySequence, kind: StatKind) -> tuple[int, int]:
    """Return ``(successes, eligible)`` for a hit-run or miss-run statistic."""
    if kind.is_difference:
        raise ValueError("run_counts needs a hit-run or miss-run kind")
    _check_run(seq, kind.m)
    if isinstance(seq, Sequence):
        eligible = _eligible_mask(seq, kind)
        return (eligible & seq.bits).bit_count(), eligible.bit_count()
    mask = _eligible_array(seq.array, kind)
    return int(np.count_nonzero(mask & seq.array[kind.m:])), int(np.count_nonzero(mask))


def eligible_trials(seq: AnySequence, kind: StatKind) -> list[int]:
    """1-based positions whose preceding ``m`` flips form the conditioning run."""
    if kind.is_difference:
        raise ValueError("eligible_trials needs a hit-run or miss-run kind")
    _check_run(seq, kind.m)
    if isinstance(seq, Sequence):
        eligible = _eligible_mask(seq, kind)
        return [t + 1 for t in range(seq.length) if eligible >> t & 1]
    mask = _eligible_array(seq.array, kind)
    return (np.flatnonzero(mask) + kind.m + 1).tolist()


def conditional_freq(seq: AnySequence, kind: StatKind) -> Optional[Fraction]:
    """Fraction of eligible positions that are hits, or ``None`` if there are none."""
    successes, eligible = run_counts(seq, kind)
    if eligible == 0:
        return None
    return Fraction(successes, eligible)


def d_statistic(seq: AnySequence, m: int = 1) -> Optional[Fraction]:
    """Hit-run frequency minus miss-run frequency; ``None`` unless both exist."""
    hit_side, miss_side = StatKind.difference(m).sides()
    a = conditional_freq(seq, hit_side)
    b = conditional_freq(seq, miss_side)
    if a is None or b is None:
        return None
    return a - b


def statistic(seq: AnySequence, kind: StatKind) -> Optional[Fraction]:
    if kind.is_difference:
        return d_statistic(seq, kind.m)
    return conditional_freq(seq, kind)


def contains_pattern(seq: AnySequence, pattern: AnySequence) -> bool:
    return pattern.text() in seq.text()


@dataclass(frozen=True)
class GroupSummary:
    """Mean of some quantity over a group, together with the group size."""

    mean: Union[float, Fraction]
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"group count must be >= 1, got {self.count}")


def _mean_of(values: Seq) -> Union[float, Fraction]:
    if all(isinstance(v, (int, Fraction)) for v in values):
        return sum(values, Fraction(0))
    return math.fsum(values)


def pooled_mean(groups: Seq[GroupSummary]) -> Union[float, Fraction]:
    """Mean over all members: each group's mean weighted by its size."""
    if not groups:
        raise EmptyList("no groups to average")
    total = _mean_of([g.mean * g.count for g in groups])
    return total / sum(g.count for g in groups)


def unweighted_mean(groups: Seq[GroupSummary]) -> Union[float, Fraction]:
    """Mean of the group means, each group counted once regardless of size."""
    if not groups:
        raise EmptyList("no groups to average")
    return _mean_of([g.mean for g in groups]) / len(groups)
