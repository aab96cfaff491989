"""Hot-hand tests on observed hit/miss records.

A record's pooled statistic is compared with a *reference number*, the value
expected from a shooter without a hot hand, under one of two conventions:

``POOLED``
    the flip is the unit of analysis; the reference is the long-run
    conditional hit rate, which for a memoryless shooter is just ``p``.
``PER_SEQUENCE``
    the whole sequence is the unit of analysis; the reference is the
    unweighted mean of the statistic over all sequences of the unit's
    length, which sits below ``p`` for short sequences.

Records with several units of different lengths use the length-weighted
mean of the per-length references.  This mixing rule is a convention of this
package and is flagged in every report it affects.
"""

from __future__ import annotations

import enum
import functools
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, TextIO, Union

import numpy as np

from .core import AnySequence, StatKind, parse_flips, run_counts
from .errors import (
    AllUndefined,
    DegenerateHitRate,
    EmptyFile,
    ParseError,
    RunTooLong,
    StreakError,
    ZeroDefinedDraws,
)
from .exact import BiasSummary, NullModel, UndefinedPolicy, enumerate_summary, enumeration_limit
from .sampling import SeededStream, map_chunks, rows_per_batch, draw_flips, row_counts, sample_unweighted_mean

__all__ = [
    "EXACT_PVALUE_MAX_LENGTH",
    "Convention",
    "Record",
    "ReferenceSpec",
    "UnitStat",
    "HotHandReport",
    "ingest",
    "reference_number",
    "hot_hand_report",
]

EXACT_PVALUE_MAX_LENGTH = 12
MIXING_NOTE = "multi-unit record: pooled counts across units, length-weighted reference"


class Convention(enum.Enum):
    POOLED = "pooled"
    PER_SEQUENCE = "per-sequence"

    @classmethod
    def parse(cls, name: str) -> "Convention":
        key = name.strip().lower()
        for c in cls:
            if c.value == key:
                return c
        raise ValueError(f"unknown convention {name!r}; expected pooled or per-sequence")


@dataclass
class Record:
    player_id: Optional[str]
    units: list = field(default_factory=list)

    @property
    def hits(self) -> int:
        return sum(u.hits for u in self.units)

    @property
    def flips(self) -> int:
        return sum(u.length for u in self.units)

    def hit_rate(self) -> Fraction:
        return Fraction(self.hits, self.flips)


def ingest(source: Union[str, TextIO, Iterable[str]]) -> list[Record]:
    """Read records from text: one unit per line, optional ``player_id,`` prefix.

    Blank lines and lines starting with ``#`` are skipped.  Units without a
    player id are gathered into a single anonymous record.  Records appear
    in order of first appearance and keep their units in file order.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    records: dict = {}
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        player, sep, body = line.partition(",")
        if sep:
            player_id = player.strip() or None
        else:
            player_id, body = None, player
        try:
            unit = parse_flips(body)
        except StreakError as exc:
            raise ParseError(lineno, str(exc)) from exc
        records.setdefault(player_id, Record(player_id)).units.append(unit)
    if not records:
        raise EmptyFile("input contains no sequences")
    return list(records.values())


@dataclass(frozen=True)
class ReferenceSpec:
    convention: Convention
    stat: StatKind = StatKind.after_hit_run(1)
    policy: UndefinedPolicy = UndefinedPolicy.EXCLUDE
    p: Optional[Fraction] = None  # None: use the record's own hit rate


@functools.lru_cache(maxsize=256)
def _summary(model: NullModel, stat: StatKind, policy: UndefinedPolicy) -> BiasSummary:
    return enumerate_summary(model, stat, policy)


def reference_number(spec: ReferenceSpec, unit_length: int, p=None,
                     trials: int = 200_000, stream: Optional[SeededStream] = None,
                     workers: int = 1) -> float:
    """Value a memoryless shooter's statistic is compared against.

    ``p`` overrides ``spec.p``; one of the two must be given.  Lengths above
    the enumeration limit are handled by Monte Carlo with ``trials`` draws
    from ``stream``.
    """
    p = spec.p if p is None else p
    if p is None:
        raise ValueError("a hit probability is required")
    model = NullModel(p, unit_length)
    if unit_length <= spec.stat.m:
        raise RunTooLong(f"run length {spec.stat.m} needs units longer than {unit_length}")
    if spec.convention is Convention.POOLED:
        return 0.0 if spec.stat.is_difference else float(model.p)
    if unit_length <= enumeration_limit():
        summary = _summary(model, spec.stat, spec.policy)
        if summary.unweighted is None:
            raise AllUndefined(f"no sequence of length {unit_length} has a defined {spec.stat.label}")
        return float(summary.unweighted)
    stream = SeededStream(0) if stream is None else stream
    return sample_unweighted_mean(model, spec.stat, spec.policy, trials, stream, workers).estimate


@dataclass(frozen=True)
class UnitStat:
    """One unit's statistic plus the raw counts behind it.

    ``sides`` holds ``(successes, eligible)`` for a hit-run or miss-run
    statistic, and one such pair per side for a difference.
    """

    sequence: AnySequence
    value: Optional[Fraction]
    sides: tuple


def _unit_stat(seq: AnySequence, stat: StatKind) -> UnitStat:
    kinds = stat.sides() if stat.is_difference else (stat,)
    if seq.length <= stat.m:
        sides = tuple((0, 0) for _ in kinds)
    else:
        sides = tuple(run_counts(seq, kind) for kind in kinds)
    return UnitStat(seq, _ratio(sides), sides)


def _ratio(sides) -> Optional[Fraction]:
    if any(e == 0 for _, e in sides):
        return None
    if len(sides) == 1:
        return Fraction(*sides[0])
    return Fraction(*sides[0]) - Fraction(*sides[1])


def _pool(units: list) -> tuple:
    width = len(units[0].sides)
    return tuple((sum(u.sides[i][0] for u in units), sum(u.sides[i][1] for u in units))
                 for i in range(width))


@dataclass(frozen=True)
class HotHandReport:
    player_id: Optional[str]
    convention: Convention
    stat: StatKind
    policy: UndefinedPolicy
    p: Fraction
    per_unit: list
    pooled_counts: tuple
    aggregate: Fraction
    reference_number: float
    p_value: float
    tail: str
    method: dict
    notes: list = field(default_factory=list)

    @property
    def aggregate_observed(self) -> float:
        return float(self.aggregate)

    @property
    def excess(self) -> float:
        return float(self.aggregate) - self.reference_number


def _exact_pvalue(observed: Fraction, p: Fraction, length: int, stat: StatKind, upper: bool) -> float:
    summary = _summary(NullModel(p, length), stat, UndefinedPolicy.EXCLUDE)
    return float(summary.tail_mass(observed, upper) / summary.defined_mass)


def _tail_hits(pools: list, observed: Fraction, upper: bool) -> tuple[int, int]:
    """Count synthetic records at or beyond ``observed``; compare exactly."""
    a, b = observed.numerator, observed.denominator
    if len(pools) == 1:
        s, e = pools[0]
        defined = e > 0
        lhs, rhs = b * s, a * e
    else:
        (sh, eh), (st, et) = pools
        defined = (eh > 0) & (et > 0)
        lhs = b * (sh * et - st * eh)
        rhs = a * eh * et
    ge = lhs >= rhs if upper else lhs <= rhs
    return int(np.count_nonzero(ge & defined)), int(np.count_nonzero(defined))


def _mc_pvalue(observed: Fraction, p: Fraction, lengths: list, stat: StatKind, upper: bool,
               trials: int, stream: SeededStream, workers: int) -> tuple[float, int]:
    kinds = stat.sides() if stat.is_difference else (stat,)
    p_float = float(p)
    # exact integer tail test; fall back to Python ints if products could overflow
    dtype = np.int64 if sum(lengths) ** 4 * 4 < 2 ** 62 else object

    def chunk(rng, n):
        pools = [[np.zeros(n, dtype=dtype), np.zeros(n, dtype=dtype)] for _ in kinds]
        for length in lengths:
            if length <= stat.m:
                continue
            step = rows_per_batch(length)
            for lo in range(0, n, step):
                flips = draw_flips(rng, min(step, n - lo), length, p_float)
                for pool, kind in zip(pools, kinds):
                    s, e = row_counts(flips, kind)
                    pool[0][lo:lo + len(flips)] += s.astype(dtype)
                    pool[1][lo:lo + len(flips)] += e.astype(dtype)
        return _tail_hits([tuple(x) for x in pools], observed, upper)

    tallies = list(map_chunks(stream, trials, chunk, workers))
    tail = sum(t for t, _ in tallies)
    defined = sum(d for _, d in tallies)
    if defined == 0:
        raise ZeroDefinedDraws("no synthetic record had a defined statistic")
    return tail / defined, defined


def hot_hand_report(record: Record, spec: ReferenceSpec, pvalue_trials: int = 100_000,
                    stream: Optional[SeededStream] = None, tail: str = "upper",
                    workers: int = 1) -> HotHandReport:
    """Observed pooled statistic, reference number and one-sided p-value.

    Parameters
    ----------
    record : Record
        Units (games or seasons) of one player.
    spec : ReferenceSpec
        Convention, statistic, undefined policy and optional fixed ``p``.
        Without ``p`` the record's own hit rate is used.
    pvalue_trials : int
        Synthetic records drawn when the p-value is not computed exactly.
    stream : SeededStream
        Source of randomness for Monte Carlo steps.
    tail : {"upper", "lower"}
        ``upper`` looks for a hot hand (high statistic); ``lower`` for the
        gambler's-fallacy direction.

    Returns
    -------
    HotHandReport
        The p-value is conditional on the synthetic statistic being defined.
        It is exact for a single unit of at most 12 flips and Monte Carlo
        otherwise.
    """
    if tail not in ("upper", "lower"):
        raise ValueError("tail must be 'upper' or 'lower'")
    if not record.units:
        raise AllUndefined("record has no units")
    upper = tail == "upper"
    stream = SeededStream(0) if stream is None else stream
    stat = spec.stat

    if spec.p is not None:
        p = spec.p
    else:
        p = record.hit_rate()
        if not 0 < p < 1:
            raise DegenerateHitRate(
                f"empirical hit rate is {p}; the null model needs 0 < p < 1 (set p explicitly)")
    p = NullModel(p, 1).p

    per_unit = [_unit_stat(u, stat) for u in record.units]
    pooled = _pool(per_unit)
    aggregate = _ratio(pooled)
    if aggregate is None:
        raise AllUndefined(f"no unit has a defined {stat.label}")

    usable = [u.length for u in record.units if u.length > stat.m]
    by_length = {n: reference_number(spec, n, p, pvalue_trials, stream.substream(n), workers)
                 for n in sorted(set(usable))}
    # exact rational mixing so a single length returns its reference unchanged
    reference = float(sum(n * Fraction(by_length[n]) for n in usable) / sum(usable))

    notes = [f"p-value conditioned on a defined {stat.label} in the synthetic record"]
    lengths = [u.length for u in record.units]
    if len(lengths) == 1 and lengths[0] <= EXACT_PVALUE_MAX_LENGTH:
        p_value = _exact_pvalue(aggregate, p, lengths[0], stat, upper)
        method = {"name": "exact"}
    else:
        p_value, defined = _mc_pvalue(aggregate, p, lengths, stat, upper,
                                      pvalue_trials, stream.substream(0), workers)
        method = {"name": "monte-carlo", "defined_draws": defined, **stream.substream(0).metadata(pvalue_trials)}
    if len(lengths) > 1:
        notes.append(MIXING_NOTE)
    if spec.convention is Convention.PER_SEQUENCE and any(n > enumeration_limit() for n in usable):
        notes.append("reference number estimated by Monte Carlo for units above the enumeration limit")

    return HotHandReport(
        player_id=record.player_id,
        convention=spec.convention,
        stat=stat,
        policy=spec.policy,
        p=p,
        per_unit=per_unit,
        pooled_counts=pooled,
        aggregate=aggregate,
        reference_number=reference,
        p_value=min(1.0, max(0.0, p_value)),
        tail=tail,
        method=method,
        notes=notes,
    )
