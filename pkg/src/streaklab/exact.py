"""Exhaustive enumeration of all 2**k hit/miss sequences under a Bernoulli(p) null.

Every sequence of length ``k`` is visited as an integer in ``[0, 2**k)`` and
reduced to a small tally key: its hit count (which fixes its probability
weight) and the success/eligible counts of the requested statistic.  The
number of distinct keys is polynomial in ``k``, so the final aggregation is
carried out in exact rational arithmetic and only converted to floating
point at the very end.  Blocks of the index space can be tallied on several
worker threads; tallies are plain integer counts, so the result does not
depend on how the work was split.
"""

from __future__ import annotations

import enum
import itertools
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .core import Run, Sequence, StatKind, parse_sequence, run_counts, AnySequence
from .errors import InvalidRange, KTooLarge, PatternTooLong, PolicyNotAllowed, RunTooLong

__all__ = [
    "DEFAULT_ENUMERATION_LIMIT",
    "ENUMERATION_LIMIT_ENV",
    "TABLE_LIMIT",
    "UndefinedPolicy",
    "NullModel",
    "BiasSummary",
    "TableRow",
    "TableOne",
    "enumeration_limit",
    "as_probability",
    "enumerate_summary",
    "bias_table",
    "count_sequences_containing",
    "table_one",
]

DEFAULT_ENUMERATION_LIMIT = 28
ENUMERATION_LIMIT_ENV = "STREAKLAB_ENUM_LIMIT"
TABLE_LIMIT = 16
_BLOCK_BITS = 20

Probability = Union[Fraction, float, int, str]


def enumeration_limit() -> int:
    """Largest ``k`` the engine will enumerate; overridable via the environment."""
    raw = os.environ.get(ENUMERATION_LIMIT_ENV)
    if raw is None or not raw.strip():
        return DEFAULT_ENUMERATION_LIMIT
    value = int(raw)
    if not 1 <= value <= 40:
        raise ValueError(f"{ENUMERATION_LIMIT_ENV} must be in 1..40, got {value}")
    return value


class UndefinedPolicy(enum.Enum):
    """What to do with sequences that have no eligible position."""

    EXCLUDE = "exclude"
    INCLUDE_AS_ZERO = "zero"

    @classmethod
    def parse(cls, name: str) -> "UndefinedPolicy":
        key = name.strip().lower().replace("_", "-")
        aliases = {"exclude": cls.EXCLUDE, "zero": cls.INCLUDE_AS_ZERO,
                   "include-as-zero": cls.INCLUDE_AS_ZERO}
        if key not in aliases:
            raise ValueError(f"unknown policy {name!r}; expected exclude or zero")
        return aliases[key]


def as_probability(p: Probability) -> Fraction:
    """Convert a hit probability to an exact fraction strictly inside (0, 1).

    Floats go through their shortest decimal repr, so ``0.3`` becomes
    exactly ``3/10`` rather than the nearest binary double.
    """
    if isinstance(p, Fraction):
        value = p
    elif isinstance(p, float):
        value = Fraction(repr(p))
    else:
        value = Fraction(str(p).strip())
    if not 0 < value < 1:
        raise ValueError(f"hit probability must lie strictly between 0 and 1, got {p}")
    return value


@dataclass(frozen=True)
class NullModel:
    """Memoryless shooter: ``k`` independent flips, each a hit with probability ``p``."""

    p: Fraction
    k: int

    def __post_init__(self):
        object.__setattr__(self, "p", as_probability(self.p))
        if not isinstance(self.k, int) or self.k < 1:
            raise ValueError(f"sequence length must be a positive integer, got {self.k!r}")


@dataclass(frozen=True)
class BiasSummary:
    """Exact expectation of a streak statistic over all length-``k`` sequences.

    ``histogram`` maps each attainable statistic value to its probability
    mass; only sequences where the statistic is defined appear in it.
    ``unweighted`` is ``None`` when no sequence has a defined statistic.
    """

    model: NullModel
    stat: StatKind
    policy: UndefinedPolicy
    unweighted: Optional[Fraction]
    pooled: Optional[Fraction]
    defined_count: int
    defined_mass: Fraction
    histogram: dict = field(repr=False)

    @property
    def unweighted_mean(self) -> Optional[float]:
        return None if self.unweighted is None else float(self.unweighted)

    @property
    def pooled_mean(self) -> Optional[float]:
        return None if self.pooled is None else float(self.pooled)

    @property
    def defined_probability(self) -> float:
        return float(self.defined_mass)

    def tail_mass(self, threshold: Fraction, upper: bool = True) -> Fraction:
        """Mass of defined values ``>= threshold`` (or ``<=`` for the lower tail)."""
        if upper:
            return sum((w for v, w in self.histogram.items() if v >= threshold), Fraction(0))
        return sum((w for v, w in self.histogram.items() if v <= threshold), Fraction(0))


def _check_k(k: int, limit: Optional[int] = None) -> int:
    limit = enumeration_limit() if limit is None else limit
    if k > limit:
        raise KTooLarge(f"k = {k} exceeds the enumeration limit {limit}; use the sampling engine")
    return limit


def _popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x).astype(np.int64)


def _eligible_words(words: np.ndarray, k: int, run: Run, m: int) -> np.ndarray:
    full = np.uint64((1 << k) - 1)
    base = words if run is Run.HIT else ~words & full
    eligible = np.full_like(words, full)
    for j in range(1, m + 1):
        eligible &= base << np.uint64(j)
    return eligible & full


def _tally_block(start: int, stop: int, k: int, stat: StatKind) -> Counter:
    words = np.arange(start, stop, dtype=np.uint64)
    hits = _popcount(words)
    radix = k + 1
    if stat.is_difference:
        parts = [hits]
        for run in (Run.HIT, Run.MISS):
            eligible = _eligible_words(words, k, run, stat.m)
            parts += [_popcount(eligible), _popcount(eligible & words)]
        keys = np.zeros_like(hits)
        for part in parts:
            keys = keys * radix + part
        uniq, counts = np.unique(keys, return_counts=True)
        return Counter(dict(zip(uniq.tolist(), counts.tolist())))
    eligible = _eligible_words(words, k, stat.run, stat.m)
    keys = (hits * radix + _popcount(eligible)) * radix + _popcount(eligible & words)
    counts = np.bincount(keys, minlength=radix ** 3)
    nz = np.flatnonzero(counts)
    return Counter(dict(zip(nz.tolist(), counts[nz].tolist())))


def _unpack_key(key: int, radix: int, width: int) -> list[int]:
    out = []
    for _ in range(width):
        key, digit = divmod(key, radix)
        out.append(digit)
    return out[::-1]


def _tally(k: int, stat: StatKind, workers: int) -> Counter:
    total = 1 << k
    block = 1 << _BLOCK_BITS
    bounds = [(lo, min(lo + block, total)) for lo in range(0, total, block)]
    tally: Counter = Counter()
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(lambda b: _tally_block(b[0], b[1], k, stat), bounds)
            for part in parts:
                tally.update(part)
    else:
        for lo, hi in bounds:
            tally.update(_tally_block(lo, hi, k, stat))
    return tally


def enumerate_summary(model: NullModel, stat: StatKind,
                      policy: UndefinedPolicy = UndefinedPolicy.EXCLUDE,
                      workers: int = 1) -> BiasSummary:
    """Exact unweighted and pooled means of ``stat`` over all 2**k sequences.

    Parameters
    ----------
    model : NullModel
        Hit probability and sequence length.
    stat : StatKind
        Statistic to evaluate on each sequence.
    policy : UndefinedPolicy
        ``EXCLUDE`` averages over sequences where the statistic is defined,
        normalizing by their total probability.  ``INCLUDE_AS_ZERO`` scores
        undefined sequences as 0 and averages over the full mass.
    workers : int
        Threads used to tally blocks of the index space.

    Returns
    -------
    BiasSummary
    """
    k, p = model.k, model.p
    _check_k(k)
    if stat.m >= k:
        raise RunTooLong(f"run length {stat.m} needs k > {stat.m}, got k = {k}")
    if stat.is_difference and policy is UndefinedPolicy.INCLUDE_AS_ZERO:
        raise PolicyNotAllowed("the difference statistic only supports the exclude policy")

    q = 1 - p
    weights = [p ** h * q ** (k - h) for h in range(k + 1)]
    radix = k + 1
    width = 5 if stat.is_difference else 3

    histogram: dict = {}
    defined_count = 0
    defined_mass = Fraction(0)
    # pooled numerators/denominators; the difference uses both pairs
    succ = [Fraction(0), Fraction(0)]
    elig = [Fraction(0), Fraction(0)]

    for key, count in sorted(_tally(k, stat, max(1, workers)).items()):
        digits = _unpack_key(key, radix, width)
        mass = weights[digits[0]] * count
        if stat.is_difference:
            _, e_hit, s_hit, e_miss, s_miss = digits
            succ[0] += mass * s_hit
            elig[0] += mass * e_hit
            succ[1] += mass * s_miss
            elig[1] += mass * e_miss
            if e_hit == 0 or e_miss == 0:
                continue
            value = Fraction(s_hit, e_hit) - Fraction(s_miss, e_miss)
        else:
            _, e, s = digits
            succ[0] += mass * s
            elig[0] += mass * e
            if e == 0:
                continue
            value = Fraction(s, e)
        histogram[value] = histogram.get(value, Fraction(0)) + mass
        defined_count += count
        defined_mass += mass

    weighted_sum = sum((v * w for v, w in histogram.items()), Fraction(0))
    if policy is UndefinedPolicy.INCLUDE_AS_ZERO:
        unweighted = weighted_sum
    else:
        unweighted = weighted_sum / defined_mass if defined_mass else None

    if stat.is_difference:
        pooled = (succ[0] / elig[0] - succ[1] / elig[1]) if elig[0] and elig[1] else None
    else:
        pooled = succ[0] / elig[0] if elig[0] else None

    return BiasSummary(
        model=model,
        stat=stat,
        policy=policy,
        unweighted=unweighted,
        pooled=pooled,
        defined_count=defined_count,
        defined_mass=defined_mass,
        histogram=dict(sorted(histogram.items())),
    )


def bias_table(k_min: int, k_max: int, p: Probability, stat: StatKind,
               policy: UndefinedPolicy = UndefinedPolicy.EXCLUDE,
               workers: int = 1) -> list[tuple[int, BiasSummary]]:
    """One :func:`enumerate_summary` per ``k`` in ``k_min..k_max``, ascending."""
    if not 1 <= k_min <= k_max:
        raise InvalidRange(f"need 1 <= k_min <= k_max, got {k_min}..{k_max}")
    _check_k(k_max)
    return [(k, enumerate_summary(NullModel(p, k), stat, policy, workers))
            for k in range(k_min, k_max + 1)]


def count_sequences_containing(k: int, pattern: Union[AnySequence, str]) -> int:
    """Number of length-``k`` sequences containing ``pattern`` as a contiguous run."""
    if isinstance(pattern, str):
        pattern = parse_sequence(pattern)
    if pattern.length > k:
        raise PatternTooLong(f"pattern of length {pattern.length} cannot fit in k = {k}")
    _check_k(k)
    width = pattern.length
    pmask = np.uint64((1 << width) - 1)
    pbits = np.uint64(pattern.bits)
    total = 0
    block = 1 << _BLOCK_BITS
    for lo in range(0, 1 << k, block):
        words = np.arange(lo, min(lo + block, 1 << k), dtype=np.uint64)
        found = np.zeros(words.shape, dtype=bool)
        for offset in range(k - width + 1):
            found |= (words >> np.uint64(offset)) & pmask == pbits
        total += int(np.count_nonzero(found))
    return total


@dataclass(frozen=True)
class TableRow:
    sequence: Sequence
    eligible: int
    successes: int
    value: Optional[Fraction]


@dataclass(frozen=True)
class TableOne:
    """Per-sequence listing of every length-``k`` sequence, hits-first order."""

    k: int
    stat: StatKind
    rows: list
    total_eligible: int
    total_successes: int
    average: Optional[Fraction]

    @property
    def defined_rows(self) -> int:
        return sum(1 for r in self.rows if r.value is not None)

    @property
    def pooled(self) -> Optional[Fraction]:
        if self.total_eligible == 0:
            return None
        return Fraction(self.total_successes, self.total_eligible)


def table_one(k: int, stat: StatKind = StatKind.after_hit_run(1)) -> TableOne:
    if k > TABLE_LIMIT:
        raise KTooLarge(f"k exceeds presentation limit {TABLE_LIMIT}")
    if k < 1:
        raise ValueError("k must be positive")
    if stat.is_difference:
        raise ValueError("the per-sequence table lists hit-run or miss-run statistics")
    rows = []
    for flips in itertools.product((True, False), repeat=k):
        seq = Sequence.from_flips(flips)
        if stat.m >= k:
            succ, elig = 0, 0
        else:
            succ, elig = run_counts(seq, stat)
        rows.append(TableRow(seq, elig, succ, Fraction(succ, elig) if elig else None))
    defined = [r.value for r in rows if r.value is not None]
    average = sum(defined, Fraction(0)) / len(defined) if defined else None
    return TableOne(
        k=k,
        stat=stat,
        rows=rows,
        total_eligible=sum(r.eligible for r in rows),
        total_successes=sum(r.successes for r in rows),
        average=average,
    )
