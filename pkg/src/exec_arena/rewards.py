"""Windowed execution costs and the imitation + competitive reward.

Costs are integer tick*share sums, so every reward identity holds exactly:
the incremental window sums equal brute-force re-summation of the per-step
logs at every step, and identical learner/teacher logs produce exactly zero
reward.

Window semantics: at step ``k`` (1-based) the window covers steps
``max(1, k-j+1) .. k`` — truncated at the episode start, matching the
constraint ``1 <= j <= k``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Tuple


class StepLog:
    """Per-step executed (cost, volume) log with an incremental j-window."""

    def __init__(self, window: int) -> None:
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self.costs: List[int] = []
        self.volumes: List[int] = []
        self._win: Deque[Tuple[int, int]] = deque()
        self._cost_sum = 0
        self._vol_sum = 0

    def push_step(self, cost: int, volume: int) -> None:
        self.costs.append(cost)
        self.volumes.append(volume)
        self._win.append((cost, volume))
        self._cost_sum += cost
        self._vol_sum += volume
        if len(self._win) > self.window:
            c, v = self._win.popleft()
            self._cost_sum -= c
            self._vol_sum -= v

    def window_sums(self) -> Tuple[int, int]:
        """(cost, volume) over the trailing window ending at the last step."""
        return self._cost_sum, self._vol_sum

    def brute_force_sums(self, k: int, j: int) -> Tuple[int, int]:
        """Direct re-summation over steps max(1, k-j+1)..k (1-based)."""
        lo = max(0, k - j)
        return sum(self.costs[lo:k]), sum(self.volumes[lo:k])

    @property
    def total_cost(self) -> int:
        return sum(self.costs)

    @property
    def total_volume(self) -> int:
        return sum(self.volumes)


def windowed_cost_volume(log: StepLog, k: int, j: int) -> Tuple[int, int]:
    """Window sums at step k with window j, recomputed from the raw log."""
    if k < 1 or j < 1:
        raise ValueError("k and j must be >= 1")
    return log.brute_force_sums(k, j)


def imitation_reward(vol_rl: int, vol_base: int) -> float:
    """Negative distance between windowed executed volumes (L2 of a scalar)."""
    return -abs(vol_rl - vol_base)


def competitive_reward(cost_base: int, vol_base: int, cost_rl: int,
                       vol_rl: int, touch_price: int) -> float:
    """Hypothetical-volume-matched cost edge over the teacher.

    The teacher's windowed cost is adjusted by (vol_rl - vol_base) at the
    current touch so costs compare at equal volume; no feasibility check is
    applied to the volume gap. Positive means the learner bought cheaper.
    """
    return cost_base + (vol_rl - vol_base) * touch_price - cost_rl


def total_reward(r_comp: float, r_mimic: float, alpha: float) -> float:
    """Combined reward; alpha balances imitation against competition."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return r_comp + alpha * r_mimic


@dataclass
class RewardConfig:
    window: int = 64     # j
    alpha: float = 0.01


class RewardState:
    """Rolling reward bookkeeping for the learner/teacher pair."""

    def __init__(self, cfg: RewardConfig, sell_task: bool = False) -> None:
        self.cfg = cfg
        self.sell_task = sell_task
        self.learner = StepLog(cfg.window)
        self.teacher = StepLog(cfg.window)

    def push_step(self, learner_cost: int, learner_vol: int,
                  teacher_cost: int, teacher_vol: int) -> None:
        self.learner.push_step(learner_cost, learner_vol)
        self.teacher.push_step(teacher_cost, teacher_vol)

    def step_reward(self, touch_price: int) -> Tuple[float, float, float]:
        """(reward, r_comp, r_mimic) for the step just pushed.

        For SELL tasks the competitive term flips sign: cost is proceeds,
        and more proceeds at matched volume is the win condition.
        """
        c_rl, v_rl = self.learner.window_sums()
        c_base, v_base = self.teacher.window_sums()
        r_comp = competitive_reward(c_base, v_base, c_rl, v_rl, touch_price)
        if self.sell_task:
            r_comp = -r_comp
        r_mimic = imitation_reward(v_rl, v_base)
        return total_reward(r_comp, r_mimic, self.cfg.alpha), r_comp, r_mimic

    def verify_windows(self) -> bool:
        """Incremental sums equal brute force at the current step."""
        k = len(self.learner.costs)
        j = self.cfg.window
        return (self.learner.window_sums() == self.learner.brute_force_sums(k, j)
                and self.teacher.window_sums() == self.teacher.brute_force_sums(k, j))
