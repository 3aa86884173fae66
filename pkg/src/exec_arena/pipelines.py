"""Batch pipelines: replay-to-logs, feature dumps, and episode runs.

These are the in-process workhorses behind the service endpoints and the
CLI subcommands; tests drive them directly as well. All CSV outputs are
ASCII with LF line endings so identical runs are byte-identical.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .agents import ExchangeAgent, TapeEntry
from .env import EnvConfig, ExecutionEnv
from .features import FeatureEngine, TaskSnapshot, feature_csv
from .kernel import Kernel
from .marketdata import MessageRecord, ReplayAgent
from .reports import EpisodeResult, episodes_csv

TRADES_CSV_HEADER = "ts,price,qty,aggressor_side,maker_owner,taker_owner"
DEPTH_CSV_HEADER = (
    "ts,"
    + ",".join(f"bid_px_{i}" for i in range(1, 6)) + ","
    + ",".join(f"bid_vol_{i}" for i in range(1, 6)) + ","
    + ",".join(f"ask_px_{i}" for i in range(1, 6)) + ","
    + ",".join(f"ask_vol_{i}" for i in range(1, 6))
)


def trades_csv(tape: Sequence[TapeEntry]) -> str:
    out = io.StringIO()
    out.write(TRADES_CSV_HEADER + "\n")
    for e in tape:
        t = e.trade
        out.write("%d,%d,%d,%s,%d,%d\n" % (
            t.ts, t.price, t.qty, t.aggressor_side.name, t.maker_owner,
            t.taker_owner))
    return out.getvalue()


@dataclass
class ReplayResult:
    messages: int
    trades: int
    skipped_cancels: int
    trades_csv: str
    depth_csv: Optional[str]
    event_log_csv: Optional[str]


def replay_to_logs(records: List[MessageRecord],
                   depth_every_ns: Optional[int] = None,
                   event_log: bool = False) -> ReplayResult:
    """Apply a message stream through the kernel, collecting market logs."""
    kernel = Kernel(event_log=event_log)
    exchange = ExchangeAgent()
    kernel.register_agent(exchange)
    replay = ReplayAgent(exchange.agent_id, records)
    kernel.register_agent(replay)
    kernel.add_source(replay)

    end = records[-1].ts if records else 0
    depth_out: Optional[io.StringIO] = None
    if depth_every_ns:
        depth_out = io.StringIO()
        depth_out.write(DEPTH_CSV_HEADER + "\n")
        t = 0
        while t <= end:
            kernel.run_until(t)
            snap = exchange.book.depth_snapshot(t)
            row = [str(t)]
            for group in (snap.bid_prices, snap.bid_vols, snap.ask_prices,
                          snap.ask_vols):
                row.extend(str(x) for x in group)
            depth_out.write(",".join(row) + "\n")
            t += depth_every_ns
    kernel.run_until(end)

    return ReplayResult(
        messages=len(records),
        trades=len(exchange.tape),
        skipped_cancels=replay.skipped_cancels,
        trades_csv=trades_csv(exchange.tape),
        depth_csv=depth_out.getvalue() if depth_out else None,
        event_log_csv=kernel.event_log_csv() if event_log else None,
    )


def feature_rows_from_records(records: List[MessageRecord],
                              interval_ns: int = 60_000_000_000,
                              total_volume: int = 1000,
                              horizon_steps: Optional[int] = None,
                              window: int = 60) -> List[np.ndarray]:
    """Replay a message stream and sample the 39-feature row per interval.

    Used by the feature-dump pipeline where no execution task is live: the
    nominal task keeps full remaining volume throughout and no orders are
    submitted, so the task block is deterministic filler while market
    features stream from the replayed flow.
    """
    kernel = Kernel()
    exchange = ExchangeAgent()
    kernel.register_agent(exchange)
    replay = ReplayAgent(exchange.agent_id, records)
    kernel.register_agent(replay)
    kernel.add_source(replay)

    end = records[-1].ts if records else 0
    steps = horizon_steps or max(1, -(-end // interval_ns))
    engine = FeatureEngine(window=window)
    cursor = 0
    rows: List[np.ndarray] = []
    for k in range(0, steps + 1):
        t = k * interval_ns
        kernel.run_until(t)
        tape = exchange.tape
        while cursor < len(tape):
            e = tape[cursor]
            engine.on_trade(e.trade, e.pre_bid, e.pre_ask)
            cursor += 1
        snap = exchange.book.depth_snapshot(t)
        task = TaskSnapshot(min(k, steps), steps, total_volume, total_volume, 0, 0)
        rows.append(engine.compute_step(t, snap, task))
    return rows


# ---------------------------------------------------------------------------
# scripted policies and episode runs
# ---------------------------------------------------------------------------


class ScriptedPolicy:
    """Constant or piecewise-constant action schedule.

    ``pieces`` maps 1-based step indices to the action that applies from
    that step onward; a constant action is a single piece at step 1.
    """

    def __init__(self, pieces: Sequence[Tuple[int, Sequence[float]]]) -> None:
        if not pieces:
            raise ValueError("policy needs at least one piece")
        self.pieces = sorted((int(s), tuple(float(x) for x in a))
                             for s, a in pieces)
        if self.pieces[0][0] > 1:
            self.pieces.insert(0, (1, (0.0, 0.0, 0.0)))

    @classmethod
    def constant(cls, action: Sequence[float]) -> "ScriptedPolicy":
        return cls([(1, action)])

    def action(self, step: int) -> Tuple[float, ...]:
        current = self.pieces[0][1]
        for start, a in self.pieces:
            if step >= start:
                current = a
            else:
                break
        return current


@dataclass
class EpisodeArtifacts:
    result: EpisodeResult
    rewards: List[float]
    trades_csv: str
    event_log_csv: Optional[str]


def run_episode(config: EnvConfig, policy: ScriptedPolicy, index: int,
                seed: int) -> EpisodeArtifacts:
    env = ExecutionEnv(replace(config, seed=seed))
    env.reset()
    rewards: List[float] = []
    step = 0
    done = False
    while not done:
        step += 1
        res = env.step(policy.action(step))
        rewards.append(res.reward)
        done = res.done
    totals = env.episode_totals()
    learner_on = config.learner_enabled
    result = EpisodeResult(
        index=index, seed=seed, side=config.task.side,
        cost_rl=totals["learner_cost"] if learner_on else None,
        cost_twap=totals["teacher_cost"],
        vol_rl=totals["learner_volume"] if learner_on else None,
        vol_twap=totals["teacher_volume"],
    )
    return EpisodeArtifacts(
        result=result,
        rewards=rewards,
        trades_csv=trades_csv(env.trade_tape()),
        event_log_csv=env.kernel.event_log_csv() if config.event_log else None,
    )


def run_episodes(config: EnvConfig, policy: ScriptedPolicy,
                 seeds: Sequence[int]) -> Tuple[List[EpisodeArtifacts], str]:
    """Run one episode per seed; returns artifacts and the report CSV."""
    artifacts = [run_episode(config, policy, i, seed)
                 for i, seed in enumerate(seeds)]
    report = episodes_csv([a.result for a in artifacts])
    return artifacts, report
