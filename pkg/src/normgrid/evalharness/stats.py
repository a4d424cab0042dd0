"""Two-tailed paired t-test and paired Cohen's d."""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Iterable, Sequence

from scipy.special import betainc


class DegenerateSample(ValueError):
    pass


@dataclass(frozen=True)
class StatsResult:
    t: float
    df: int
    p: float
    d: float
    n: int
    mean_diff: float

    def to_json(self) -> dict:
        return {"t": self.t, "df": self.df, "p": self.p, "d": self.d,
                "n": self.n, "mean_diff": self.mean_diff}


def t_two_tailed_p(t: float, df: int) -> float:
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def paired_stats_from_diffs(diffs: Sequence[float]) -> StatsResult:
    diffs = [float(x) for x in diffs]
    n = len(diffs)
    if n < 2:
        raise DegenerateSample(f"paired test needs at least 2 pairs, got {n}")
    mean = statistics.fmean(diffs)
    sd = statistics.stdev(diffs)
    if sd == 0:
        if mean == 0:
            return StatsResult(0.0, n - 1, 1.0, 0.0, n, 0.0)
        inf = math.copysign(math.inf, mean)
        return StatsResult(inf, n - 1, 0.0, inf, n, mean)
    t = mean / (sd / math.sqrt(n))
    return StatsResult(t, n - 1, t_two_tailed_p(t, n - 1), mean / sd, n, mean)


def paired_stats(pairs: Iterable[tuple]) -> StatsResult:
    """``pairs`` of (a, b); differences are a - b."""
    return paired_stats_from_diffs([a - b for a, b in pairs])
