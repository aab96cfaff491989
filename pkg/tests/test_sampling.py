from fractions import Fraction

import numpy as np
import pytest

from streaklab.core import StatKind
from streaklab.errors import PolicyNotAllowed, RunTooLong, ZeroDefinedDraws
from streaklab.exact import NullModel, UndefinedPolicy, enumerate_summary
from streaklab.sampling import (
    GENERATOR_ID,
    GameConfig,
    GameMode,
    SeededStream,
    play_selection_game,
    row_values,
    run_gambler_learning,
    sample_unweighted_mean,
)

HH = StatKind.after_hit_run(1)
EXCLUDE = UndefinedPolicy.EXCLUDE
HALF = Fraction(1, 2)
MILLION = 10 ** 6


def game(mode, bet=True, k=4, trials=MILLION, seed=1, p=HALF, m=1, workers=1):
    cfg = GameConfig(GameMode(mode), NullModel(p, k), bet, trials, SeededStream(seed), m)
    return play_selection_game(cfg, workers)


class TestStream:
    def test_chunks_cover_total(self):
        stream = SeededStream(5, chunk_size=10)
        assert stream.chunks(25) == [(0, 10), (1, 10), (2, 5)]

    def test_chunk_generators_are_keyed(self):
        stream = SeededStream(5)
        a = stream.rng(0).random(4)
        assert np.array_equal(a, stream.rng(0).random(4))
        assert not np.array_equal(a, stream.rng(1).random(4))
        assert not np.array_equal(a, stream.substream(1).rng(0).random(4))

    def test_metadata(self):
        meta = SeededStream(9).metadata(100)
        assert meta == {"seed": 9, "chunk_size": 65536, "generator": GENERATOR_ID, "trials": 100}

    def test_seed_range(self):
        with pytest.raises(ValueError):
            SeededStream(-1)
        with pytest.raises(ValueError):
            SeededStream(2 ** 64)


class TestRowValues:
    def test_against_core(self):
        from streaklab.core import Sequence, statistic
        rng = np.random.default_rng(0)
        flips = rng.random((200, 9)) < 0.5
        for stat in (HH, StatKind.after_miss_run(2), StatKind.difference(1)):
            values, defined = row_values(flips, stat)
            for row, v, d in zip(flips, values, defined):
                exact = statistic(Sequence.from_flips(row), stat)
                assert d == (exact is not None)
                if d:
                    assert v == pytest.approx(float(exact), abs=1e-15)


class TestSampleUnweightedMean:
    def test_length_four(self):
        est = sample_unweighted_mean(NullModel(HALF, 4), HH, EXCLUDE, MILLION, SeededStream(42))
        assert abs(est.estimate - 17 / 42) < 3 * est.std_error

    def test_length_two(self):
        est = sample_unweighted_mean(NullModel(HALF, 2), HH, EXCLUDE, 10 ** 5, SeededStream(11))
        assert abs(est.estimate - 0.5) < 4 * est.std_error

    def test_length_six(self):
        est = sample_unweighted_mean(NullModel(HALF, 6), HH, EXCLUDE, MILLION, SeededStream(7))
        assert abs(est.estimate - 129 / 310) < 3 * est.std_error

    def test_long_sequences(self):
        est = sample_unweighted_mean(NullModel(HALF, 5000), HH, EXCLUDE, 400, SeededStream(2))
        assert abs(est.estimate - 0.5) < 4 * est.std_error + 1e-3

    def test_errors(self):
        with pytest.raises(RunTooLong):
            sample_unweighted_mean(NullModel(HALF, 2), StatKind.after_hit_run(2), EXCLUDE, 10, SeededStream(0))
        with pytest.raises(ZeroDefinedDraws):
            # length-2 records never have both a hit-run and a miss-run position
            sample_unweighted_mean(NullModel(HALF, 2), StatKind.difference(), EXCLUDE, 100, SeededStream(0))
        with pytest.raises(PolicyNotAllowed):
            sample_unweighted_mean(NullModel(HALF, 4), StatKind.difference(),
                                   UndefinedPolicy.INCLUDE_AS_ZERO, 10, SeededStream(0))

    @pytest.mark.parametrize("k", range(2, 11))
    @pytest.mark.parametrize("seed", [101, 202, 303])
    def test_oracle_agreement(self, k, seed):
        exact = enumerate_summary(NullModel(HALF, k), HH, EXCLUDE).unweighted_mean
        est = sample_unweighted_mean(NullModel(HALF, k), HH, EXCLUDE, MILLION, SeededStream(seed))
        assert abs(est.estimate - exact) < 4 * est.std_error

    def test_include_as_zero(self):
        est = sample_unweighted_mean(NullModel(HALF, 4), HH, UndefinedPolicy.INCLUDE_AS_ZERO,
                                     200_000, SeededStream(8))
        expected = 17 / 42 * 14 / 16
        assert abs(est.estimate - expected) < 4 * est.std_error

    def test_workers_do_not_change_result(self):
        model = NullModel(Fraction(3, 10), 7)
        a = sample_unweighted_mean(model, HH, EXCLUDE, 300_000, SeededStream(4), workers=1)
        b = sample_unweighted_mean(model, HH, EXCLUDE, 300_000, SeededStream(4), workers=8)
        assert a == b


class TestSelectionGame:
    def test_two_stage(self):
        r = game("two-stage")
        assert abs(r.win_freq - 17 / 42) < 3 * r.std_error

    def test_one_stage(self):
        r = game("one-stage")
        assert abs(r.win_freq - 0.5) < 3 * r.std_error

    def test_two_stage_bet_on_miss(self):
        r = game("two-stage", bet=False)
        assert abs(r.win_freq - 25 / 42) < 3 * r.std_error

    @pytest.mark.parametrize("mode", ["two-stage", "one-stage"])
    def test_bet_complement(self, mode):
        h = game(mode, True, trials=100_000, seed=9)
        t = game(mode, False, trials=100_000, seed=9)
        assert h.wins + t.wins == h.trials
        assert h.rejected_draws == t.rejected_draws

    def test_rejection_rate(self):
        r = game("two-stage", seed=5)
        rate = r.rejected_draws / (r.trials + r.rejected_draws)
        se = (2 / 16 * 14 / 16 / (r.trials + r.rejected_draws)) ** 0.5
        assert abs(rate - 2 / 16) < 4 * se

    def test_result_fields(self):
        r = game("two-stage", trials=1000)
        assert r.wins <= r.trials
        assert r.win_freq == r.wins / r.trials
        assert r.std_error == pytest.approx((r.win_freq * (1 - r.win_freq) / r.trials) ** 0.5)
        assert r.metadata["seed"] == 1 and r.metadata["generator"] == GENERATOR_ID

    @pytest.mark.parametrize("mode", ["two-stage", "one-stage"])
    def test_deterministic_across_workers(self, mode):
        a = game(mode, trials=300_000, seed=3, workers=1)
        b = game(mode, trials=300_000, seed=3, workers=2)
        c = game(mode, trials=300_000, seed=3, workers=8)
        assert a == b == c

    def test_one_stage_tracks_p(self):
        p = Fraction(3, 10)
        r = game("one-stage", k=6, p=p, trials=300_000, seed=12)
        assert abs(r.win_freq - 0.3) < 4 * r.std_error

    def test_two_stage_longer_runs(self):
        stat = StatKind.after_hit_run(2)
        exact = enumerate_summary(NullModel(HALF, 6), stat).unweighted_mean
        r = game("two-stage", k=6, m=2, trials=300_000, seed=13)
        assert abs(r.win_freq - exact) < 4 * r.std_error

    def test_invalid_config(self):
        with pytest.raises(RunTooLong):
            GameConfig(GameMode.TWO_STAGE, NullModel(HALF, 3), True, 10, SeededStream(0), m=3)
        with pytest.raises(ValueError):
            GameConfig(GameMode.TWO_STAGE, NullModel(HALF, 3), True, 0, SeededStream(0))


class TestLearning:
    def test_never_unlearns(self):
        trace = run_gambler_learning(NullModel(HALF, 4), HH, MILLION, SeededStream(3), 10 ** 4)
        assert abs(trace.final_estimate - 17 / 42) < 4 * trace.std_error
        for episode, estimate in trace.snapshots:
            se = trace.std_error * (trace.episodes / episode) ** 0.5
            assert 0.5 - estimate > 3 * se
        assert trace.snapshots[-1] == (MILLION, trace.final_estimate)

    def test_length_two(self):
        trace = run_gambler_learning(NullModel(HALF, 2), HH, 10 ** 5, SeededStream(3), 10 ** 4)
        assert abs(trace.final_estimate - 0.5) < 4 * trace.std_error

    def test_difference(self):
        stat = StatKind.difference(1)
        trace = run_gambler_learning(NullModel(HALF, 4), stat, MILLION, SeededStream(3), 10 ** 4)
        assert abs(trace.final_estimate + 1 / 3) < 4 * trace.std_error

    def test_trace_is_cumulative_mean(self):
        stream = SeededStream(21, chunk_size=7)
        trace = run_gambler_learning(NullModel(HALF, 4), HH, 50, stream, 5)
        values = []
        defined = []
        for i, n in stream.chunks(50):
            rng = stream.rng(i)
            v, d = row_values(rng.random((n, 4)) < 0.5, HH)
            values.append(v)
            defined.append(d)
        values = np.concatenate(values)
        defined = np.concatenate(defined)
        assert [e for e, _ in trace.snapshots] == list(range(5, 51, 5))
        for episode, estimate in trace.snapshots:
            picked = values[:episode][defined[:episode]]
            assert estimate == pytest.approx(picked.mean(), abs=1e-12)
        assert trace.skipped_episodes == int((~defined).sum())

    def test_deterministic_across_workers(self):
        runs = [run_gambler_learning(NullModel(HALF, 5), HH, 200_000, SeededStream(17), 1000, workers=w)
                for w in (1, 2, 8)]
        assert runs[0] == runs[1] == runs[2]

    def test_errors(self):
        with pytest.raises(ValueError):
            run_gambler_learning(NullModel(HALF, 4), HH, 0, SeededStream(0), 1)
        with pytest.raises(ValueError):
            run_gambler_learning(NullModel(HALF, 4), HH, 10, SeededStream(0), 0)
        with pytest.raises(ZeroDefinedDraws):
            run_gambler_learning(NullModel(HALF, 2), StatKind.difference(), 100, SeededStream(0), 10)
