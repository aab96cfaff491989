"""Seeded Monte Carlo for streak statistics, selection games and belief learning.

Reproducibility
---------------
Work is cut into fixed chunks of ``chunk_size`` trials.  Chunk ``i`` draws
from its own generator, ``Philox4x32-10`` keyed by
``SeedSequence(seed, spawn_key=(*key, i))``, where ``key`` is empty except
for the substreams of multi-stage computations.  Philox is counter based,
so chunk streams are independent and a chunk's draws do not depend on
which worker runs it or when.  Chunk tallies are combined in chunk order, which makes
every result bit-identical for any worker count.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from .core import Run, StatKind
from .errors import PolicyNotAllowed, RunTooLong, ZeroDefinedDraws
from .exact import NullModel, UndefinedPolicy

__all__ = [
    "GENERATOR_ID",
    "SeededStream",
    "SampleEstimate",
    "GameMode",
    "GameConfig",
    "GameResult",
    "LearningTrace",
    "draw_flips",
    "row_counts",
    "row_values",
    "sample_unweighted_mean",
    "play_selection_game",
    "run_gambler_learning",
]

GENERATOR_ID = f"numpy-{np.__version__}/Philox4x32-10/SeedSequence(seed,spawn_key=(*key,chunk))"
DEFAULT_CHUNK_SIZE = 65536
# cap on flips materialized at once (rows * k)
_MAX_CELLS = 1 << 22


@dataclass(frozen=True)
class SeededStream:
    seed: int
    chunk_size: int = DEFAULT_CHUNK_SIZE
    key: tuple = ()

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")

    def rng(self, chunk: int) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(*self.key, chunk))
        return np.random.Generator(np.random.Philox(seq))

    def substream(self, label: int) -> "SeededStream":
        """An independent stream for a separate stage of the same computation."""
        return SeededStream(self.seed, self.chunk_size, (*self.key, label))

    def chunks(self, total: int) -> list[tuple[int, int]]:
        """``(chunk index, trials in chunk)`` pairs covering ``total`` trials."""
        return [(i, min(self.chunk_size, total - lo))
                for i, lo in enumerate(range(0, total, self.chunk_size))]

    def metadata(self, trials: int) -> dict:
        meta = {
            "seed": self.seed,
            "chunk_size": self.chunk_size,
            "generator": GENERATOR_ID,
            "trials": trials,
        }
        if self.key:
            meta["key"] = list(self.key)
        return meta


def map_chunks(stream: SeededStream, total: int, fn: Callable, workers: int = 1) -> Iterator:
    """Yield ``fn(rng, n)`` for every chunk, always in chunk order."""
    chunks = stream.chunks(total)
    if workers <= 1 or len(chunks) == 1:
        for i, n in chunks:
            yield fn(stream.rng(i), n)
        return
    window = 2 * workers
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for lo in range(0, len(chunks), window):
            batch = chunks[lo:lo + window]
            yield from pool.map(lambda c: fn(stream.rng(c[0]), c[1]), batch)


def rows_per_batch(k: int) -> int:
    return max(1, _MAX_CELLS // k)


def draw_flips(rng: np.random.Generator, n: int, k: int, p: float) -> np.ndarray:
    """``n`` independent length-``k`` sequences as a boolean ``(n, k)`` array."""
    return rng.random((n, k)) < p


def _eligible_matrix(flips: np.ndarray, run: Run, m: int) -> np.ndarray:
    n, k = flips.shape
    base = flips if run is Run.HIT else ~flips
    csum = np.zeros((n, k + 1), dtype=np.int32)
    np.cumsum(base, axis=1, out=csum[:, 1:])
    # column j is trial m + j (0-based); its window is flips m+j-m .. m+j-1
    return csum[:, m:k] - csum[:, :k - m] == m


def row_counts(flips: np.ndarray, kind: StatKind) -> tuple[np.ndarray, np.ndarray]:
    """Per-row ``(successes, eligible)`` for a hit-run or miss-run statistic."""
    eligible = _eligible_matrix(flips, kind.run, kind.m)
    successes = np.count_nonzero(eligible & flips[:, kind.m:], axis=1)
    return successes, np.count_nonzero(eligible, axis=1)


def row_values(flips: np.ndarray, stat: StatKind) -> tuple[np.ndarray, np.ndarray]:
    """Per-row statistic values and a mask of rows where it is defined.

    Undefined rows carry the value 0.
    """
    if stat.is_difference:
        hit_side, miss_side = stat.sides()
        s_hit, e_hit = row_counts(flips, hit_side)
        s_miss, e_miss = row_counts(flips, miss_side)
        defined = (e_hit > 0) & (e_miss > 0)
        values = np.zeros(len(flips))
        values[defined] = s_hit[defined] / e_hit[defined] - s_miss[defined] / e_miss[defined]
        return values, defined
    succ, elig = row_counts(flips, stat)
    defined = elig > 0
    values = np.zeros(len(flips))
    values[defined] = succ[defined] / elig[defined]
    return values, defined


def _check(model: NullModel, stat: StatKind, policy: UndefinedPolicy) -> None:
    if stat.m >= model.k:
        raise RunTooLong(f"run length {stat.m} needs k > {stat.m}, got k = {model.k}")
    if stat.is_difference and policy is UndefinedPolicy.INCLUDE_AS_ZERO:
        raise PolicyNotAllowed("the difference statistic only supports the exclude policy")


@dataclass(frozen=True)
class SampleEstimate:
    estimate: float
    std_error: float
    trials: int
    defined_draws: int
    metadata: dict = field(default_factory=dict)


def _values_chunk(rng, n, k, p, stat):
    values = []
    defined = []
    step = rows_per_batch(k)
    for lo in range(0, n, step):
        v, d = row_values(draw_flips(rng, min(step, n - lo), k, p), stat)
        values.append(v)
        defined.append(d)
    return np.concatenate(values), np.concatenate(defined)


def _moments(values: np.ndarray, defined: np.ndarray) -> tuple[float, float, int, int]:
    v = values[defined]
    return float(v.sum()), float(np.dot(v, v)), int(v.size), int(values.size)


def sample_unweighted_mean(model: NullModel, stat: StatKind, policy: UndefinedPolicy,
                           trials: int, stream: SeededStream, workers: int = 1) -> SampleEstimate:
    """Monte Carlo estimate of the per-sequence (unweighted) mean of ``stat``.

    Works for any ``k`` up to 65536; unlike the exact engine there is no
    enumeration limit.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    _check(model, stat, policy)
    k, p = model.k, float(model.p)

    def chunk(rng, n):
        return _moments(*_values_chunk(rng, n, k, p, stat))

    parts = list(map_chunks(stream, trials, chunk, workers))
    total = math.fsum(s for s, _, _, _ in parts)
    total_sq = math.fsum(q for _, q, _, _ in parts)
    n_defined = sum(d for _, _, d, _ in parts)
    n = n_defined if policy is UndefinedPolicy.EXCLUDE else trials
    if n_defined == 0 or n == 0:
        raise ZeroDefinedDraws("no draw had a defined statistic")
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return SampleEstimate(mean, math.sqrt(var / n), trials, n_defined, stream.metadata(trials))


class GameMode(enum.Enum):
    """How the position the bettor wagers on is chosen.

    ``TWO_STAGE`` draws a qualifying sequence first and a position inside it
    second, so every qualifying sequence is equally likely.  ``ONE_STAGE``
    picks uniformly among all qualifying positions of all sequences.
    """

    TWO_STAGE = "two-stage"
    ONE_STAGE = "one-stage"


@dataclass(frozen=True)
class GameConfig:
    mode: GameMode
    model: NullModel
    bet: bool  # True bets on a hit
    trials: int
    stream: SeededStream
    m: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.m < 1:
            raise ValueError("run length must be >= 1")
        if self.m >= self.model.k:
            raise RunTooLong(f"run length {self.m} needs k > {self.m}, got k = {self.model.k}")


@dataclass(frozen=True)
class GameResult:
    trials: int
    wins: int
    win_freq: float
    std_error: float
    rejected_draws: int
    metadata: dict = field(default_factory=dict)


def _game_chunk(rng: np.random.Generator, n: int, cfg: GameConfig) -> tuple[int, int]:
    k, m, p = cfg.model.k, cfg.m, float(cfg.model.p)
    slots = k - m
    cap = rows_per_batch(k)
    wins = rejected = 0
    needed = n
    while needed:
        batch = min(cap, needed + needed // 2 + 16)
        flips = draw_flips(rng, batch, k, p)
        u_accept = rng.random(batch)
        u_pick = rng.random(batch)
        eligible = _eligible_matrix(flips, Run.HIT, m)
        counts = np.count_nonzero(eligible, axis=1)
        if cfg.mode is GameMode.TWO_STAGE:
            accept = counts > 0
        else:
            # keep a sequence with probability proportional to its eligible positions
            accept = u_accept * slots < counts
        rows = np.flatnonzero(accept)[:needed]
        if rows.size == needed:
            rejected += int(rows[-1]) + 1 - rows.size
        else:
            rejected += batch - rows.size
        if rows.size:
            pick = np.minimum((u_pick[rows] * counts[rows]).astype(np.int64), counts[rows] - 1)
            ranks = np.cumsum(eligible[rows], axis=1)
            column = np.argmax(ranks > pick[:, None], axis=1)
            outcome = flips[rows, m + column]
            wins += int(np.count_nonzero(outcome == cfg.bet))
            needed -= rows.size
    return wins, rejected


def play_selection_game(config: GameConfig, workers: int = 1) -> GameResult:
    """Simulate bets on the flip that follows a randomly chosen run of hits."""
    tallies = list(map_chunks(config.stream, config.trials,
                               lambda rng, n: _game_chunk(rng, n, config), workers))
    wins = sum(w for w, _ in tallies)
    rejected = sum(r for _, r in tallies)
    freq = wins / config.trials
    meta = config.stream.metadata(config.trials)
    meta.update(mode=config.mode.value, k=config.model.k, p=str(config.model.p),
                m=config.m, bet="H" if config.bet else "T")
    return GameResult(
        trials=config.trials,
        wins=wins,
        win_freq=freq,
        std_error=math.sqrt(freq * (1 - freq) / config.trials),
        rejected_draws=rejected,
        metadata=meta,
    )


@dataclass(frozen=True)
class LearningTrace:
    """Running per-sequence average seen by an agent watching whole sequences.

    ``snapshots`` holds ``(episodes seen, running estimate)`` every stride
    episodes; the estimate is ``None`` until a defined episode has occurred.
    """

    episodes: int
    snapshots: list
    final_estimate: float
    std_error: float
    skipped_episodes: int
    metadata: dict = field(default_factory=dict)

    @property
    def running_estimate(self) -> list:
        return self.snapshots


def run_gambler_learning(model: NullModel, stat: StatKind, episodes: int,
                         stream: SeededStream, trace_stride: int,
                         policy: UndefinedPolicy = UndefinedPolicy.EXCLUDE,
                         workers: int = 1) -> LearningTrace:
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if trace_stride < 1:
        raise ValueError("trace_stride must be >= 1")
    _check(model, stat, policy)
    k, p = model.k, float(model.p)
    include_zero = policy is UndefinedPolicy.INCLUDE_AS_ZERO

    snapshots = []
    seen = 0
    count = 0
    total = 0.0
    total_sq = 0.0
    skipped = 0
    chunks = map_chunks(stream, episodes, lambda rng, n: _values_chunk(rng, n, k, p, stat), workers)
    for values, defined in chunks:
        weight = np.ones_like(defined) if include_zero else defined
        run_sum = total + np.cumsum(np.where(weight, values, 0.0))
        run_cnt = count + np.cumsum(weight, dtype=np.int64)
        marks = np.arange((-seen - 1) % trace_stride, values.size, trace_stride)
        for j, s, c in zip(marks.tolist(), run_sum[marks].tolist(), run_cnt[marks].tolist()):
            snapshots.append((seen + j + 1, s / c if c else None))
        picked = values[weight]
        total = float(run_sum[-1])
        total_sq += float(np.dot(picked, picked))
        count = int(run_cnt[-1])
        skipped += int(np.count_nonzero(~defined))
        seen += values.size

    if count == 0 or (not include_zero and skipped == episodes):
        raise ZeroDefinedDraws("no episode had a defined statistic")
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0) * count / max(count - 1, 1)
    meta = stream.metadata(episodes)
    meta.update(k=k, p=str(model.p), stat=stat.label, policy=policy.value, stride=trace_stride)
    return LearningTrace(
        episodes=episodes,
        snapshots=snapshots,
        final_estimate=mean,
        std_error=math.sqrt(var / count),
        skipped_episodes=skipped,
        metadata=meta,
    )
