"""Streak statistics on binary hit/miss sequences.

Exact per-sequence statistics, exhaustive enumeration of their unweighted
and pooled expectations under a memoryless null, seeded Monte Carlo for
selection games and belief learning, and hot-hand tests for recorded shots.
"""

__version__ = "0.1.0"

from .core import (
    GroupSummary,
    LongSequence,
    Run,
    Sequence,
    StatKind,
    conditional_freq,
    d_statistic,
    eligible_trials,
    parse_flips,
    parse_sequence,
    pooled_mean,
    statistic,
    unweighted_mean,
)
from .exact import (
    BiasSummary,
    NullModel,
    UndefinedPolicy,
    bias_table,
    count_sequences_containing,
    enumerate_summary,
    table_one,
)
from .sampling import (
    GameConfig,
    GameMode,
    GameResult,
    LearningTrace,
    SeededStream,
    play_selection_game,
    run_gambler_learning,
    sample_unweighted_mean,
)
from .inference import (
    Convention,
    HotHandReport,
    Record,
    ReferenceSpec,
    hot_hand_report,
    ingest,
    reference_number,
)
