"""Command-line entry point: ``streaklab <command> [options]``.

Exit status is 0 on success, 1 for usage errors and 2 for data or limit
errors (unparseable input, enumeration limit exceeded, nothing defined).
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Optional, Sequence as Seq

from . import __version__
from .core import StatKind, parse_flips, run_counts, d_statistic
from .errors import (
    InvalidRange,
    PolicyNotAllowed,
    RunTooLong,
    StreakError,
)
from .exact import (
    TABLE_LIMIT,
    NullModel,
    UndefinedPolicy,
    as_probability,
    bias_table,
    table_one,
)
from .inference import Convention, ReferenceSpec, hot_hand_report, ingest
from .sampling import (
    GameConfig,
    GameMode,
    SeededStream,
    play_selection_game,
    run_gambler_learning,
)

USAGE_ERRORS = (InvalidRange, PolicyNotAllowed, RunTooLong)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("must be a 64-bit unsigned integer")
    return value


def _probability(text: str) -> Fraction:
    try:
        return as_probability(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"must be a number strictly between 0 and 1, got {text!r}")


def _stat_name(text: str) -> str:
    if text.lower() not in ("hh", "th", "d", "hit", "miss", "diff"):
        raise argparse.ArgumentTypeError(f"expected hh, th or d, got {text!r}")
    return text


def _policy(text: str) -> UndefinedPolicy:
    try:
        return UndefinedPolicy.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _bet(text: str) -> bool:
    if text.upper() not in ("H", "T"):
        raise argparse.ArgumentTypeError(f"expected H or T, got {text!r}")
    return text.upper() == "H"


# -- rendering ---------------------------------------------------------------

def _num(x) -> str:
    return "-" if x is None else f"{float(x):.6f}"


def _pct(x) -> str:
    return "-" if x is None else f"{float(x) * 100:.2f}"


def _exact(x) -> str:
    return "-" if x is None else f"{x.numerator}/{x.denominator}"


def _ratio_json(x) -> Optional[dict]:
    return None if x is None else {"num": x.numerator, "den": x.denominator}


def _float_json(x) -> Optional[float]:
    return None if x is None else float(x)


def _tsv(header: list, rows: list, trailer: Optional[dict] = None) -> str:
    lines = ["\t".join(header)]
    lines += ["\t".join(str(c) for c in row) for row in rows]
    if trailer:
        lines += [f"# {k}={v}" for k, v in trailer.items()]
    return "\n".join(lines) + "\n"


def _json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


# -- commands ----------------------------------------------------------------

def cmd_enumerate(args) -> str:
    if args.k > TABLE_LIMIT:
        raise UsageError(f"--k: k exceeds presentation limit {TABLE_LIMIT}")
    stat = StatKind.parse(args.stat, args.m)
    if stat.is_difference:
        raise UsageError("--stat: the table lists hh or th statistics")
    table = table_one(args.k, stat)
    if args.format == "json":
        return _json({
            "k": table.k,
            "stat": stat.label,
            "rows": [{"sequence": r.sequence.text(), "eligible": r.eligible,
                      "successes": r.successes, "value": _ratio_json(r.value)}
                     for r in table.rows],
            "total_eligible": table.total_eligible,
            "total_successes": table.total_successes,
            "pooled": _ratio_json(table.pooled),
            "unweighted_average": _ratio_json(table.average),
            "defined_rows": table.defined_rows,
        })
    rows = [[r.sequence.text(), r.eligible, r.successes, _pct(r.value), _exact(r.value)]
            for r in table.rows]
    rows.append(["TOTAL", table.total_eligible, table.total_successes,
                 _pct(table.pooled), _exact(table.pooled)])
    rows.append(["AVERAGE", "-", "-", _pct(table.average), _exact(table.average)])
    return _tsv(["sequence", "eligible", "successes", "percentage", "exact"], rows)


def cmd_bias(args) -> str:
    if args.k_min > args.k_max:
        raise UsageError(f"--k-min/--k-max: empty range {args.k_min}..{args.k_max}")
    stat = StatKind.parse(args.stat, args.m)
    table = bias_table(args.k_min, args.k_max, args.p, stat, args.policy, args.threads)
    if args.format == "json":
        return _json({
            "p": _ratio_json(args.p),
            "stat": stat.label,
            "policy": args.policy.value,
            "rows": [{"k": k, "unweighted_mean": _float_json(s.unweighted),
                      "unweighted_exact": _ratio_json(s.unweighted),
                      "pooled_mean": _float_json(s.pooled),
                      "pooled_exact": _ratio_json(s.pooled),
                      "defined_count": s.defined_count,
                      "defined_probability": s.defined_probability}
                     for k, s in table],
        })
    rows = [[k, _num(s.unweighted), _num(s.pooled), s.defined_count,
             _num(s.defined_mass), _exact(s.unweighted)] for k, s in table]
    return _tsv(["k", "unweighted_mean", "pooled_mean", "defined_count",
                 "defined_probability", "unweighted_exact"], rows)


def cmd_game(args) -> str:
    config = GameConfig(
        mode=GameMode(args.mode),
        model=NullModel(args.p, args.k),
        bet=args.bet,
        trials=args.trials,
        stream=SeededStream(args.seed),
        m=args.m,
    )
    result = play_selection_game(config, args.threads)
    meta = result.metadata
    if args.format == "json":
        return _json({
            "trials": result.trials,
            "wins": result.wins,
            "win_freq": result.win_freq,
            "std_error": result.std_error,
            "rejected_draws": result.rejected_draws,
            "metadata": meta,
        })
    header = ["mode", "k", "p", "m", "bet", "trials", "wins", "win_freq", "std_error",
              "rejected_draws", "seed", "chunk_size", "generator"]
    row = [meta["mode"], meta["k"], meta["p"], meta["m"], meta["bet"], result.trials,
           result.wins, _num(result.win_freq), _num(result.std_error), result.rejected_draws,
           meta["seed"], meta["chunk_size"], meta["generator"]]
    return _tsv(header, [row])


def cmd_learn(args) -> str:
    stat = StatKind.parse(args.stat, args.m)
    trace = run_gambler_learning(NullModel(args.p, args.k), stat, args.episodes,
                                 SeededStream(args.seed), args.stride, args.policy, args.threads)
    if args.format == "json":
        return _json({
            "episodes": trace.episodes,
            "snapshots": [{"episode": e, "estimate": v} for e, v in trace.snapshots],
            "final_estimate": trace.final_estimate,
            "std_error": trace.std_error,
            "skipped_episodes": trace.skipped_episodes,
            "metadata": trace.metadata,
        })
    rows = [[e, _num(v)] for e, v in trace.snapshots]
    rows.append(["final", _num(trace.final_estimate)])
    trailer = {"std_error": _num(trace.std_error), "skipped_episodes": trace.skipped_episodes}
    trailer.update(trace.metadata)
    return _tsv(["episode", "estimate"], rows, trailer)


def _read_input(path: str):
    if path == "-":
        return ingest(sys.stdin)
    try:
        with open(path, encoding="utf-8") as fh:
            return ingest(fh)
    except OSError as exc:
        raise UsageError(f"input: cannot read {path}: {exc.strerror}")


def _report_json(rep) -> dict:
    return {
        "player_id": rep.player_id,
        "convention": rep.convention.value,
        "stat": rep.stat.label,
        "policy": rep.policy.value,
        "tail": rep.tail,
        "p": _ratio_json(rep.p),
        "per_unit": [{"sequence": u.sequence.text(), "value": _ratio_json(u.value),
                      "counts": [list(side) for side in u.sides]} for u in rep.per_unit],
        "pooled_counts": [list(side) for side in rep.pooled_counts],
        "aggregate_observed": rep.aggregate_observed,
        "aggregate_exact": _ratio_json(rep.aggregate),
        "reference_number": rep.reference_number,
        "excess": rep.excess,
        "p_value": rep.p_value,
        "method": rep.method,
        "notes": rep.notes,
    }


def cmd_test(args) -> str:
    records = _read_input(args.input)
    spec = ReferenceSpec(
        convention=Convention.parse(args.convention),
        stat=StatKind.parse(args.stat, args.m),
        policy=args.policy,
        p=args.p,
    )
    stream = SeededStream(args.seed)
    reports = [hot_hand_report(r, spec, args.trials, stream, args.tail, args.threads)
               for r in records]
    if args.format == "json":
        return _json({"reports": [_report_json(r) for r in reports]})
    header = ["player", "units", "flips", "p", "observed", "observed_exact", "reference",
              "excess", "p_value", "method", "trials", "seed", "chunk_size", "generator"]
    rows = []
    for rep in reports:
        m = rep.method
        rows.append([
            rep.player_id or "-", len(rep.per_unit), sum(u.sequence.length for u in rep.per_unit),
            _num(rep.p), _num(rep.aggregate), _exact(rep.aggregate), _num(rep.reference_number),
            f"{rep.excess:+.6f}", _num(rep.p_value), m["name"],
            m.get("trials", "-"), m.get("seed", "-"), m.get("chunk_size", "-"),
            m.get("generator", "-"),
        ])
    return _tsv(header, rows)


def cmd_stat(args) -> str:
    out = []
    for text in args.sequences:
        seq = parse_flips(text)
        entry = {"sequence": seq.text(), "length": seq.length}
        for name, kind in (("hit_run", StatKind.after_hit_run(args.m)),
                           ("miss_run", StatKind.after_miss_run(args.m))):
            s, e = run_counts(seq, kind) if args.m < seq.length else (0, 0)
            entry[name] = (s, e, Fraction(s, e) if e else None)
        entry["difference"] = d_statistic(seq, args.m) if args.m < seq.length else None
        out.append(entry)
    if args.format == "json":
        return _json({"m": args.m, "sequences": [
            {"sequence": e["sequence"], "length": e["length"],
             "hit_run": {"successes": e["hit_run"][0], "eligible": e["hit_run"][1],
                         "value": _ratio_json(e["hit_run"][2])},
             "miss_run": {"successes": e["miss_run"][0], "eligible": e["miss_run"][1],
                          "value": _ratio_json(e["miss_run"][2])},
             "difference": _ratio_json(e["difference"])} for e in out]})
    rows = [[e["sequence"], e["length"],
             e["hit_run"][1], e["hit_run"][0], _num(e["hit_run"][2]),
             e["miss_run"][1], e["miss_run"][0], _num(e["miss_run"][2]),
             _num(e["difference"])] for e in out]
    return _tsv(["sequence", "length", "hit_run_eligible", "hit_run_successes", "hit_run",
                 "miss_run_eligible", "miss_run_successes", "miss_run", "difference"], rows)


# -- parser ------------------------------------------------------------------

def _common(suppress: bool) -> argparse.ArgumentParser:
    parent = _Parser(add_help=False)
    default = argparse.SUPPRESS
    parent.add_argument("--format", choices=("tsv", "json"),
                        default=default if suppress else "tsv")
    parent.add_argument("--seed", type=_seed, default=default if suppress else 0)
    parent.add_argument("--threads", type=_positive_int, default=default if suppress else 1)
    return parent


def _stat_args(p: argparse.ArgumentParser, policy: bool = True) -> None:
    p.add_argument("--stat", type=_stat_name, default="hh",
                   help="hh (hit after hit run), th (hit after miss run) or d (difference)")
    p.add_argument("--m", type=_positive_int, default=1, help="conditioning run length")
    if policy:
        p.add_argument("--policy", type=_policy, default=UndefinedPolicy.EXCLUDE,
                       help="exclude or zero: how sequences with no eligible position count")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="streaklab", parents=[_common(False)],
                     description="Streak statistics on hit/miss sequences.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common(True)

    p = sub.add_parser("enumerate", parents=[common], help="per-sequence table for every length-k sequence")
    p.add_argument("--k", type=_positive_int, default=4)
    _stat_args(p, policy=False)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("bias", parents=[common], help="exact unweighted vs pooled means over a range of k")
    p.add_argument("--k-min", type=_positive_int, default=4)
    p.add_argument("--k-max", type=_positive_int, default=4)
    p.add_argument("--p", type=_probability, default=Fraction(1, 2))
    _stat_args(p)
    p.set_defaults(func=cmd_bias)

    p = sub.add_parser("game", parents=[common], help="simulate the two-stage or one-stage selection game")
    p.add_argument("--mode", choices=[m.value for m in GameMode], default=GameMode.TWO_STAGE.value)
    p.add_argument("--k", type=_positive_int, default=4)
    p.add_argument("--p", type=_probability, default=Fraction(1, 2))
    p.add_argument("--m", type=_positive_int, default=1)
    p.add_argument("--bet", type=_bet, default=True, help="H or T")
    p.add_argument("--trials", type=_positive_int, default=1_000_000)
    p.set_defaults(func=cmd_game)

    p = sub.add_parser("learn", parents=[common], help="running unweighted average seen by a learning agent")
    p.add_argument("--k", type=_positive_int, default=4)
    p.add_argument("--p", type=_probability, default=Fraction(1, 2))
    _stat_args(p)
    p.add_argument("--episodes", type=_positive_int, default=1_000_000)
    p.add_argument("--stride", type=_positive_int, default=10_000)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("test", parents=[common], help="hot-hand report for recorded shots")
    p.add_argument("input", help="record file, or - for stdin")
    p.add_argument("--p", type=_probability, default=None,
                   help="null hit probability (default: each record's own hit rate)")
    p.add_argument("--convention", choices=[c.value for c in Convention],
                   default=Convention.PER_SEQUENCE.value)
    _stat_args(p)
    p.add_argument("--tail", choices=("upper", "lower"), default="upper")
    p.add_argument("--trials", type=_positive_int, default=100_000,
                   help="Monte Carlo draws for p-values and long-unit references")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("stat", parents=[common], help="statistics of individual sequences")
    p.add_argument("sequences", nargs="+")
    p.add_argument("--m", type=_positive_int, default=1)
    p.set_defaults(func=cmd_stat)
    return parser


def main(argv: Optional[Seq[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        output = args.func(args)
    except (UsageError, *USAGE_ERRORS) as exc:
        print(f"streaklab {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except StreakError as exc:
        print(f"streaklab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"streaklab {args.command}: error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
