"""Episode-level performance metrics against the TWAP teacher.

delta_c is the relative cost edge per episode, computed in exact rational
arithmetic from the integer tick*share totals before any float conversion:
for a BUY task ``(C_twap - C_rl) / C_twap`` (cheaper is better), mirrored
for SELL where cost is proceeds. The gain-loss ratio is mean gain over mean
loss across episodes and is reported as undefined when no episode lost.
"""

from __future__ import annotations

import io
import statistics
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence


class ReportError(ValueError):
    pass


@dataclass(slots=True)
class EpisodeResult:
    index: int
    seed: int
    side: str                 # BUY | SELL
    cost_rl: Optional[int]    # None for teacher-only baseline runs
    cost_twap: int
    vol_rl: Optional[int]
    vol_twap: int

    def delta_c(self) -> Optional[Fraction]:
        if self.cost_rl is None:
            return None
        return delta_c(self.cost_rl, self.cost_twap, self.side)


def delta_c(cost_rl: int, cost_twap: int, side: str = "BUY") -> Fraction:
    """Relative improvement over TWAP, exact."""
    if cost_twap == 0:
        raise ReportError("TWAP cost is zero; delta_c undefined")
    edge = Fraction(cost_twap - cost_rl, cost_twap)
    return edge if side == "BUY" else -edge


@dataclass(slots=True)
class ReportSummary:
    episodes: int
    mean: float
    sd: float
    median: float
    glr: Optional[float]      # None when undefined (no losing episodes)
    gain_probability: float


def summarize(deltas: Sequence[Fraction]) -> ReportSummary:
    """Aggregate per-episode delta_c values."""
    if not deltas:
        raise ReportError("no completed episodes to summarize")
    vals = [float(d) for d in deltas]
    gains = [float(d) for d in deltas if d > 0]
    losses = [float(-d) for d in deltas if d < 0]
    if losses and gains:
        glr: Optional[float] = (sum(gains) / len(gains)) / (sum(losses) / len(losses))
    elif losses:
        glr = 0.0
    else:
        glr = None  # degenerate denominator: flagged, not a number
    return ReportSummary(
        episodes=len(vals),
        mean=statistics.fmean(vals),
        sd=statistics.stdev(vals) if len(vals) > 1 else 0.0,
        median=statistics.median(vals),
        glr=glr,
        gain_probability=sum(1 for d in deltas if d > 0) / len(deltas),
    )


EPISODE_CSV_HEADER = "episode,seed,side,cost_rl,cost_twap,vol_rl,vol_twap,delta_c"


def episodes_csv(results: Sequence[EpisodeResult]) -> str:
    """One row per episode plus a trailing summary record."""
    out = io.StringIO()
    out.write(EPISODE_CSV_HEADER + "\n")
    deltas = []
    for r in results:
        d = r.delta_c()
        if d is not None:
            deltas.append(d)
        out.write("%d,%d,%s,%s,%d,%s,%d,%s\n" % (
            r.index, r.seed, r.side,
            "" if r.cost_rl is None else r.cost_rl,
            r.cost_twap,
            "" if r.vol_rl is None else r.vol_rl,
            r.vol_twap,
            "" if d is None else repr(float(d)),
        ))
    if deltas:
        s = summarize(deltas)
        out.write("summary,,,,,,,\n")
        out.write("episodes,%d,,,,,,\n" % s.episodes)
        out.write("mean,%s,,,,,,\n" % repr(s.mean))
        out.write("sd,%s,,,,,,\n" % repr(s.sd))
        out.write("median,%s,,,,,,\n" % repr(s.median))
        out.write("glr,%s,,,,,,\n" % ("undefined" if s.glr is None else repr(s.glr)))
        out.write("gain_probability,%s,,,,,,\n" % repr(s.gain_probability))
    return out.getvalue()
