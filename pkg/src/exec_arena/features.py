"""The 39-feature observation row: task, microstructure, technical, raw LOB.

Feature ordering is frozen in FEATURE_NAMES; the wire protocol and the
feature CSV header both depend on it. Every emitted value lies in [-1, 1]:
unbounded raw quantities pass through tanh with per-feature scale constants,
band-style quantities are clipped positions, and ratios are bounded by
construction.

Scale conventions (configurable):

* spread and price improvement are scaled by a rolling median spread;
* effective spread by the rolling median *relative* spread;
* log return by 1% and mid volatility by 10 bp;
* LOB prices by ``price_coeff * (price - mid)/mid`` and LOB volumes by a
  rolling mean touch volume.

Trade-dependent features (direction, effective spread, price improvement,
log return) are exactly 0 until the first trade is observed; indicator
features are 0 until their warm-up windows fill.
"""

from __future__ import annotations

import math
import statistics
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Optional, Sequence, Tuple

import numpy as np

from .book import DepthSnapshot, Side, TradeRecord
from .indicators import TechnicalBlock, TechnicalConfig

FEATURE_NAMES: Tuple[str, ...] = (
    "remaining_time", "remaining_qty", "fulfillment",
    "spread", "trade_dir", "eff_spread", "price_improve", "smart_price",
    "imbalance", "log_return", "volatility",
    "williams_r", "ema_sig", "kst_sig", "macd_sig", "keltner_pos",
    "donchian_pos", "bollinger_pos", "ichimoku_pos",
    "bid_px_1", "bid_px_2", "bid_px_3", "bid_px_4", "bid_px_5",
    "ask_px_1", "ask_px_2", "ask_px_3", "ask_px_4", "ask_px_5",
    "bid_vol_1", "bid_vol_2", "bid_vol_3", "bid_vol_4", "bid_vol_5",
    "ask_vol_1", "ask_vol_2", "ask_vol_3", "ask_vol_4", "ask_vol_5",
)

N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 39

TASK_FEATURES = FEATURE_NAMES[0:3]
LOB_FEATURES = FEATURE_NAMES[19:39]


class FeatureConfigError(ValueError):
    pass


@dataclass
class FeatureConfig:
    volatility_window: int = 30          # steps of one-step log mid returns
    log_return_scale: float = 0.01
    volatility_scale: float = 0.001      # 10 bp
    price_coeff: float = 1000.0          # LOB price normalization gain
    spread_window_ns: int = 300_000_000_000   # rolling median window, 5 min
    volume_window: int = 256             # touch-volume samples in rolling mean
    technical: TechnicalConfig = field(default_factory=TechnicalConfig)


# ---------------------------------------------------------------------------
# stateless feature blocks
# ---------------------------------------------------------------------------


@dataclass(slots=True)
class TaskSnapshot:
    step: int
    horizon: int
    remaining: int
    total: int
    last_submitted: int
    last_executed: int


def task_features(t: int, horizon: int, remaining: int, total: int,
                  last_submitted: int, last_executed: int) -> Tuple[float, float, float]:
    """Normalized progress: time, inventory, latest-order fulfillment."""
    if horizon <= 0 or total <= 0:
        raise FeatureConfigError("horizon and total volume must be positive")
    t_hat = (horizon - 2 * t) / horizon
    v_hat = (2 * remaining - total) / total
    if last_submitted > 0:
        fulfillment = 2.0 * (last_executed / last_submitted) - 1.0
    else:
        fulfillment = -1.0  # nothing submitted
    return t_hat, v_hat, fulfillment


def lob_features(depth: DepthSnapshot, ref_mid: float,
                 vol_scale: float, price_coeff: float = 1000.0) -> List[float]:
    """20 values: 5 bid prices, 5 ask prices, 5 bid vols, 5 ask vols."""
    if ref_mid <= 0:
        raise FeatureConfigError("ref_mid must be positive")
    if vol_scale <= 0:
        raise FeatureConfigError("vol_scale must be positive")
    out: List[float] = []
    for prices in (depth.bid_prices, depth.ask_prices):
        for p in prices:
            out.append(math.tanh(price_coeff * (p - ref_mid) / ref_mid)
                       if p else 0.0)
    for vols in (depth.bid_vols, depth.ask_vols):
        for v in vols:
            out.append(math.tanh(v / vol_scale) if v else 0.0)
    return out


def observation_matrix(rows: Sequence[np.ndarray], window: int) -> np.ndarray:
    """Last ``window`` rows, zero-padded on the left when history is short."""
    if window < 1:
        raise FeatureConfigError("window must be >= 1")
    out = np.zeros((window, N_FEATURES), dtype=np.float64)
    tail = list(rows)[-window:]
    if tail:
        out[window - len(tail):] = np.asarray(tail)
    return out


# ---------------------------------------------------------------------------
# rolling scale estimators
# ---------------------------------------------------------------------------


class _TimedMedian:
    """Median of samples within a trailing time window (hard size cap)."""

    def __init__(self, window_ns: int, maxlen: int = 4096) -> None:
        self.window_ns = window_ns
        self.samples: Deque[Tuple[int, float]] = deque(maxlen=maxlen)

    def add(self, ts: int, value: float) -> None:
        self.samples.append((ts, value))

    def median(self, now: int, default: float) -> float:
        while self.samples and self.samples[0][0] < now - self.window_ns:
            self.samples.popleft()
        if not self.samples:
            return default
        return statistics.median(v for _, v in self.samples)


class _RollingMean:
    def __init__(self, maxlen: int) -> None:
        self.window: Deque[float] = deque()
        self.maxlen = maxlen
        self.total = 0.0

    def add(self, value: float) -> None:
        if len(self.window) == self.maxlen:
            self.total -= self.window.popleft()
        self.window.append(value)
        self.total += value

    def mean(self, default: float) -> float:
        if not self.window:
            return default
        return self.total / len(self.window)


# ---------------------------------------------------------------------------
# the engine
# ---------------------------------------------------------------------------


class FeatureEngine:
    """Streaming observation builder for one environment instance.

    Call ``on_trade`` for every tape trade (with the pre-trade touch) and
    ``compute_step`` once per decision instant. Rows accumulate in a bounded
    ring buffer sized for the observation window plus indicator warm-up.
    """

    def __init__(self, cfg: Optional[FeatureConfig] = None,
                 window: int = 60) -> None:
        self.cfg = cfg or FeatureConfig()
        self.window = window
        capacity = window + self.cfg.technical.max_warmup()
        self.buffer: Deque[np.ndarray] = deque(maxlen=capacity)
        self.technical = TechnicalBlock(self.cfg.technical)
        self._spread_med = _TimedMedian(self.cfg.spread_window_ns)
        self._touch_vol = _RollingMean(self.cfg.volume_window)
        self._returns: Deque[float] = deque(maxlen=self.cfg.volatility_window)
        self._last_mid: Optional[float] = None
        self._first_trade_price: Optional[int] = None
        self._last_trade: Optional[TradeRecord] = None
        self._last_trade_dir = 0
        self._last_trade_pre_mid: Optional[float] = None
        self._last_trade_pre_bid: Optional[int] = None
        self._last_trade_pre_ask: Optional[int] = None
        self._prev_trade_price: Optional[int] = None
        self._last_diff_price: Optional[int] = None
        self.diagnostics = {"stale_book_steps": 0, "trades_seen": 0}

    # -- market event intake ------------------------------------------------

    def on_trade(self, trade: TradeRecord, pre_bid: Optional[int],
                 pre_ask: Optional[int]) -> None:
        self.diagnostics["trades_seen"] += 1
        if self._first_trade_price is None:
            self._first_trade_price = trade.price
        pre_mid = (pre_bid + pre_ask) / 2.0 if pre_bid and pre_ask else None
        self._last_trade = trade
        self._last_trade_pre_mid = pre_mid
        self._last_trade_pre_bid = pre_bid
        self._last_trade_pre_ask = pre_ask
        self._last_trade_dir = self._classify(trade.price, pre_mid)
        if pre_bid and pre_ask:
            self._spread_med.add(trade.ts, float(pre_ask - pre_bid))

    def _classify(self, price: int, pre_mid: Optional[float]) -> int:
        """Lee-Ready: off-mid sign, at-mid tick test, unresolved 0."""
        if pre_mid is not None and price > pre_mid:
            direction = 1
        elif pre_mid is not None and price < pre_mid:
            direction = -1
        else:
            ref = None
            if self._prev_trade_price is not None and price != self._prev_trade_price:
                ref = self._prev_trade_price
            elif self._last_diff_price is not None:
                ref = self._last_diff_price
            direction = 0 if ref is None else (1 if price > ref else -1 if price < ref else 0)
        if self._prev_trade_price is not None and price != self._prev_trade_price:
            self._last_diff_price = self._prev_trade_price
        self._prev_trade_price = price
        return direction

    # -- per-step row -------------------------------------------------------

    def compute_step(self, ts: int, depth: DepthSnapshot,
                     task: TaskSnapshot) -> np.ndarray:
        cfg = self.cfg
        bid, ask = depth.best_bid, depth.best_ask
        mid = depth.mid
        if mid is None:
            self.diagnostics["stale_book_steps"] += 1
        else:
            if self._last_mid is not None and self._last_mid > 0:
                self._returns.append(math.log(mid / self._last_mid))
            self._last_mid = mid
            self._spread_med.add(ts, float(ask - bid))
            self._touch_vol.add((depth.bid_vols[0] + depth.ask_vols[0]) / 2.0)

        row = np.zeros(N_FEATURES, dtype=np.float64)
        row[0:3] = task_features(task.step, task.horizon, task.remaining,
                                 task.total, task.last_submitted,
                                 task.last_executed)

        s_med = max(self._spread_med.median(ts, 1.0), 1.0)
        if bid and ask:
            spread = ask - bid
            row[3] = math.tanh(spread / s_med)
            v_b, v_a = depth.bid_vols[0], depth.ask_vols[0]
            row[7] = math.tanh(((ask * v_b + bid * v_a) / (v_a + v_b) - mid) / spread)
            row[8] = (v_b - v_a) / (v_a + v_b)

        trade = self._last_trade
        if trade is not None:
            d = self._last_trade_dir
            row[4] = float(d)
            pre_mid = self._last_trade_pre_mid
            if pre_mid:
                es = 2.0 * d * (trade.price - pre_mid) / pre_mid
                es_scale = s_med / pre_mid
                row[5] = math.tanh(es / es_scale)
            if d > 0 and self._last_trade_pre_ask:
                row[6] = math.tanh((self._last_trade_pre_ask - trade.price) / s_med)
            elif d < 0 and self._last_trade_pre_bid:
                row[6] = math.tanh((trade.price - self._last_trade_pre_bid) / s_med)
            if self._first_trade_price:
                lr = math.log(trade.price / self._first_trade_price)
                row[9] = math.tanh(lr / cfg.log_return_scale)

        if len(self._returns) >= 2:
            sd = statistics.pstdev(self._returns)
            row[10] = math.tanh(sd / cfg.volatility_scale)

        mid_for_tech = mid if mid is not None else self._last_mid
        if mid_for_tech is not None:
            row[11:19] = self.technical.update(mid_for_tech)
            vol_scale = max(self._touch_vol.mean(1.0), 1.0)
            row[19:39] = lob_features(depth, mid_for_tech, vol_scale,
                                      cfg.price_coeff)

        self.buffer.append(row)
        return row

    def observation(self, window: Optional[int] = None) -> np.ndarray:
        return observation_matrix(self.buffer, window or self.window)


def feature_csv(rows: Sequence[np.ndarray]) -> str:
    """Feature rows as CSV with the frozen header ordering."""
    lines = [",".join(FEATURE_NAMES)]
    for row in rows:
        lines.append(",".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"
