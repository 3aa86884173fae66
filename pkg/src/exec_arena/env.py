"""Step-based execution environment over the multi-agent market.

One episode is one simulated session: a parent order of ``total_volume``
shares worked over ``horizon_steps`` decision instants spaced
``interval_ns`` apart. Each step the policy emits three scaling factors
that modulate a TWAP baseline across the top-three book levels
(``volumes = [v_twap, 0, 0] + v_twap * action``, clipped to the action
bounds and to the remaining quantity). Unexecuted orders are cancelled at
the next boundary, a co-simulated TWAP teacher trades the same parent
volume with market-order slices, and the reward combines the windowed
competitive edge over the teacher with an imitation term on executed
volume.

At the final step any unexecuted remainder is sent as a market order so
both agents complete equal parent volume whenever the book carries the
liquidity; episode metrics then compare total costs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .agents import ExchangeAgent, LearnerHandle, TapeEntry, TwapTeacher
from .book import DepthSnapshot, Side
from .features import FeatureConfig, FeatureEngine, TaskSnapshot
from .kernel import Kernel
from .marketdata import MessageRecord, ReplayAgent, SyntheticConfig, generate_synthetic_day
from .rewards import RewardConfig, RewardState

A_LOWER = np.array([-1.0, 0.0, 0.0])
A_UPPER = np.array([3.0, 1.0, 1.0])


class EnvError(RuntimeError):
    pass


@dataclass
class TaskConfig:
    side: str = "BUY"               # BUY | SELL
    total_volume: int = 500
    horizon_steps: int = 20
    interval_ns: int = 60_000_000_000

    def validate(self) -> None:
        if self.side not in ("BUY", "SELL"):
            raise EnvError(f"bad side {self.side!r}")
        if self.total_volume <= 0:
            raise EnvError("total_volume must be positive")
        if self.horizon_steps <= 0:
            raise EnvError("horizon_steps must be positive")
        if self.interval_ns <= 0:
            raise EnvError("interval_ns must be positive")

    @property
    def book_side(self) -> Side:
        return Side.BID if self.side == "BUY" else Side.ASK

    @property
    def v_twap(self) -> int:
        return math.ceil(self.total_volume / self.horizon_steps)


@dataclass
class EnvConfig:
    task: TaskConfig = field(default_factory=TaskConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    synthetic: Optional[SyntheticConfig] = field(default_factory=SyntheticConfig)
    records: Optional[List[MessageRecord]] = None   # replay data, wins over synthetic
    placement: str = "passive"      # passive | marketable
    shared_book: bool = True
    learner_enabled: bool = True
    w_long: int = 60
    features: FeatureConfig = field(default_factory=FeatureConfig)
    event_log: bool = False
    seed: int = 0                   # overrides synthetic.seed per episode

    def validate(self) -> None:
        self.task.validate()
        if self.placement not in ("passive", "marketable"):
            raise EnvError(f"bad placement mode {self.placement!r}")
        if self.records is None and self.synthetic is None:
            raise EnvError("either replay records or a synthetic config is required")
        if self.w_long < 1:
            raise EnvError("w_long must be >= 1")


def blend_action(action: Sequence[float], v_twap: int,
                 remaining: int) -> Tuple[int, int, int]:
    """Clip the action, blend with the TWAP baseline, round to shares.

    If the rounded total exceeds the remaining parent quantity, volumes are
    reduced greedily from level 3 down to level 1, preserving the
    aggressive level-1 slice.
    """
    a = np.clip(np.asarray(action, dtype=np.float64), A_LOWER, A_UPPER)
    raw = (float(v_twap * (1.0 + a[0])), float(v_twap * a[1]), float(v_twap * a[2]))
    vols = [int(math.floor(x + 0.5)) for x in raw]
    excess = sum(vols) - remaining
    for i in (2, 1, 0):
        if excess <= 0:
            break
        cut = min(vols[i], excess)
        vols[i] -= cut
        excess -= cut
    return vols[0], vols[1], vols[2]


def placement_prices(depth: DepthSnapshot, side: Side, mode: str,
                     last_bid: Optional[int],
                     last_ask: Optional[int]) -> Tuple[List[int], bool]:
    """Top-3 target prices for the order plan.

    Passive mode rests on the task's own side (BUY on bids); marketable
    mode prices at the opposite side's top levels so orders cross. Missing
    levels are synthesized one tick deeper; an empty reference side falls
    back to the last-known touch, flagged.
    """
    if mode == "passive":
        ref = depth.bid_prices if side is Side.BID else depth.ask_prices
        away = -1 if side is Side.BID else +1
        fallback = last_bid if side is Side.BID else last_ask
    else:
        ref = depth.ask_prices if side is Side.BID else depth.bid_prices
        away = +1 if side is Side.BID else -1
        fallback = last_ask if side is Side.BID else last_bid

    present = [p for p in ref if p]
    flagged = False
    if not present:
        flagged = True
        anchor = fallback if fallback else 100
        anchor = anchor + away  # one tick off the stale touch
        present = [anchor]
    prices = list(present[:3])
    while len(prices) < 3:
        prices.append(prices[-1] + away)
    return [max(p, 1) for p in prices], flagged


@dataclass
class StepResult:
    observation: np.ndarray   # (w_long, 39)
    reward: float
    done: bool
    info: Dict[str, object]


class ExecutionEnv:
    """One learner's episode loop; owns its kernel, book, and agents."""

    def __init__(self, config: EnvConfig) -> None:
        config.validate()
        self.config = config
        self._active = False
        self._done = False

    # ------------------------------------------------------------------
    # lifecycle
    # ------------------------------------------------------------------

    def reset(self) -> StepResult:
        cfg = self.config
        task = cfg.task
        self.session_end = task.horizon_steps * task.interval_ns
        records = cfg.records
        if records is None:
            syn = replace(cfg.synthetic, seed=cfg.seed,
                          duration_ns=max(cfg.synthetic.duration_ns,
                                          self.session_end))
            records = generate_synthetic_day(syn)

        self.kernel = Kernel(event_log=cfg.event_log)
        self.exchange = ExchangeAgent()
        self.kernel.register_agent(self.exchange)
        self.replay = ReplayAgent(self.exchange.agent_id, records)
        self.kernel.register_agent(self.replay)
        self.kernel.add_source(self.replay)

        side = task.book_side
        self.teacher = TwapTeacher(self.exchange.agent_id, side,
                                   task.total_volume, task.horizon_steps)
        self.learner = LearnerHandle(self.exchange.agent_id, side)
        if cfg.shared_book:
            self.kernel.register_agent(self.teacher)
            self.teacher_kernel = self.kernel
            self.teacher_exchange = self.exchange
            self.kernel.register_agent(self.learner)
            self.exchange.subscribe_notices(self.teacher.agent_id)
            self.exchange.subscribe_notices(self.learner.agent_id)
        else:
            # isolated twin market: the teacher trades the same replayed
            # flow in its own book so neither agent sees the other's impact
            self.kernel.register_agent(self.learner)
            self.exchange.subscribe_notices(self.learner.agent_id)
            self.teacher_kernel = Kernel()
            self.teacher_exchange = ExchangeAgent()
            self.teacher_kernel.register_agent(self.teacher_exchange)
            twin_replay = ReplayAgent(self.teacher_exchange.agent_id, records)
            self.teacher_kernel.register_agent(twin_replay)
            self.teacher_kernel.add_source(twin_replay)
            self.teacher_kernel.register_agent(self.teacher)
            self.teacher_exchange.subscribe_notices(self.teacher.agent_id)

        self.features = FeatureEngine(cfg.features, window=cfg.w_long)
        self.rewards = RewardState(cfg.reward, sell_task=(task.side == "SELL"))
        self.step_index = 0
        self._tape_cursor = 0
        self._learner_cost_mark = 0
        self._learner_qty_mark = 0
        self._teacher_cost_mark = 0
        self._teacher_qty_mark = 0
        self._last_bid: Optional[int] = None
        self._last_ask: Optional[int] = None
        self._active = True
        self._done = False

        self.kernel.run_until(0)
        if not cfg.shared_book:
            self.teacher_kernel.run_until(0)
        depth = self._observe_depth(0)
        self._drain_tape()
        row_task = TaskSnapshot(0, task.horizon_steps, task.total_volume,
                                task.total_volume, 0, 0)
        self.features.compute_step(0, depth, row_task)
        info = {
            "side": task.side,
            "total_volume": task.total_volume,
            "horizon_steps": task.horizon_steps,
            "v_twap": task.v_twap,
            "remaining": task.total_volume,
        }
        return StepResult(self.features.observation(), 0.0, False, info)

    def step(self, action: Sequence[float]) -> StepResult:
        if not self._active:
            raise EnvError("reset() must be called before step()")
        if self._done:
            raise EnvError("episode finished; call reset()")
        cfg = self.config
        task = cfg.task
        k = self.step_index + 1

        depth_now = self.exchange.book.depth_snapshot(self.kernel.clock)
        plan = (0, 0, 0)
        flagged = False
        if cfg.learner_enabled:
            plan = blend_action(action, task.v_twap, self._remaining())
            prices, flagged = placement_prices(depth_now, task.book_side,
                                               cfg.placement, self._last_bid,
                                               self._last_ask)
            self.learner.begin_batch()
            for qty, price in zip(plan, prices):
                if qty > 0:
                    self.learner.place_limit(self.kernel, price, qty)
        self.teacher.fire_slice(self.teacher_kernel, k)

        boundary = self.kernel.step_to_next_decision(
            self.learner, task.interval_ns, self.session_end)
        if boundary is None:  # pragma: no cover - guarded by done flag
            raise EnvError("session end passed without terminal step")
        if not cfg.shared_book:
            self.teacher_kernel.run_until(boundary)

        terminal_qty = 0
        if k == task.horizon_steps and cfg.learner_enabled:
            remainder = self._remaining()
            if remainder > 0:
                terminal_qty = remainder
                self.learner.place_market(self.kernel, remainder)
                self.kernel.run_until(boundary)

        learner_cost = self.learner.executed_cost - self._learner_cost_mark
        learner_vol = self.learner.executed_qty - self._learner_qty_mark
        teacher_cost = self.teacher.executed_cost - self._teacher_cost_mark
        teacher_vol = self.teacher.executed_qty - self._teacher_qty_mark
        self._learner_cost_mark = self.learner.executed_cost
        self._learner_qty_mark = self.learner.executed_qty
        self._teacher_cost_mark = self.teacher.executed_cost
        self._teacher_qty_mark = self.teacher.executed_qty

        depth = self._observe_depth(boundary)
        touch = self._touch_price(depth)
        self.rewards.push_step(learner_cost, learner_vol, teacher_cost,
                               teacher_vol)
        reward, r_comp, r_mimic = (0.0, 0.0, 0.0)
        if cfg.learner_enabled:
            reward, r_comp, r_mimic = self.rewards.step_reward(touch)

        self._drain_tape()
        self.step_index = k
        remaining = self._remaining()
        row_task = TaskSnapshot(k, task.horizon_steps, remaining,
                                task.total_volume,
                                self.learner.batch_submitted,
                                self.learner.batch_executed)
        self.features.compute_step(boundary, depth, row_task)

        self._done = k >= task.horizon_steps or (cfg.learner_enabled and
                                                 remaining == 0)
        if self._done and k < task.horizon_steps:
            self._finish_teacher(k)

        info = {
            "step": k,
            "side": task.side,
            "remaining": remaining,
            "plan": plan,
            "placement_flagged": flagged,
            "terminal_market_qty": terminal_qty,
            "learner_step_cost": learner_cost,
            "learner_step_volume": learner_vol,
            "teacher_step_cost": teacher_cost,
            "teacher_step_volume": teacher_vol,
            "touch_price": touch,
            "r_comp": r_comp,
            "r_mimic": r_mimic,
            "learner_total_cost": self.learner.executed_cost,
            "teacher_total_cost": self.teacher.executed_cost,
        }
        return StepResult(self.features.observation(), float(reward),
                          self._done, info)

    # ------------------------------------------------------------------
    # helpers
    # ------------------------------------------------------------------

    def _remaining(self) -> int:
        return self.config.task.total_volume - self.learner.executed_qty

    def _observe_depth(self, ts: int) -> DepthSnapshot:
        depth = self.exchange.book.depth_snapshot(ts)
        if depth.best_bid:
            self._last_bid = depth.best_bid
        if depth.best_ask:
            self._last_ask = depth.best_ask
        return depth

    def _touch_price(self, depth: DepthSnapshot) -> int:
        """Side-relevant level-one price for hypothetical volume matching."""
        if self.config.task.book_side is Side.BID:
            p = depth.best_ask or self._last_ask
        else:
            p = depth.best_bid or self._last_bid
        if p:
            return p
        syn = self.config.synthetic
        return syn.init_mid if syn is not None else 1

    def _drain_tape(self) -> None:
        tape = self.exchange.tape
        while self._tape_cursor < len(tape):
            entry = tape[self._tape_cursor]
            self.features.on_trade(entry.trade, entry.pre_bid, entry.pre_ask)
            self._tape_cursor += 1

    def _finish_teacher(self, k_done: int) -> None:
        """Run out the teacher's remaining slices after an early finish."""
        task = self.config.task
        for k in range(k_done + 1, task.horizon_steps + 1):
            self.teacher.fire_slice(self.teacher_kernel, k)
            boundary = self.kernel.step_to_next_decision(
                self.learner, task.interval_ns, self.session_end)
            if not self.config.shared_book:
                self.teacher_kernel.run_until(
                    boundary if boundary is not None else self.session_end)
            if boundary is None:
                break

    # ------------------------------------------------------------------
    # episode outputs
    # ------------------------------------------------------------------

    @property
    def done(self) -> bool:
        return self._done

    def episode_totals(self) -> Dict[str, int]:
        return {
            "learner_cost": self.learner.executed_cost,
            "learner_volume": self.learner.executed_qty,
            "teacher_cost": self.teacher.executed_cost,
            "teacher_volume": self.teacher.executed_qty,
        }

    def trade_tape(self) -> List[TapeEntry]:
        return self.exchange.tape
