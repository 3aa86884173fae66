"""Streaming technical indicators over the per-step mid-price series.

Each indicator consumes one closing value per decision step and emits a
signal normalized into [-1, 1]:

* Williams %R and the channel indicators (Keltner, Donchian, Bollinger,
  Ichimoku) become band-position scores: -1 at/below the lower band, +1
  at/above the upper band, linear in between.
* The trend indicators (EMA pair, MACD, KST) become tanh-squashed
  signal-line crossover differentials.

Every indicator emits exactly 0.0 until its warm-up window is filled, and
0.0 again whenever its bands are degenerate (zero width). Only closing
values are available here, so high/low windows are over closes and the
true range reduces to |close - previous close|.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Optional, Tuple


def band_position(value: float, lower: float, upper: float) -> float:
    """Linear position of value inside [lower, upper], clipped to [-1, 1]."""
    width = upper - lower
    if width <= 0:
        return 0.0
    pos = 2.0 * (value - lower) / width - 1.0
    return max(-1.0, min(1.0, pos))


class Ema:
    """Classic exponential moving average seeded with the first sample."""

    def __init__(self, period: int) -> None:
        self.alpha = 2.0 / (period + 1)
        self.period = period
        self.value: Optional[float] = None
        self.count = 0

    def update(self, x: float) -> float:
        self.count += 1
        if self.value is None:
            self.value = x
        else:
            self.value += self.alpha * (x - self.value)
        return self.value

    @property
    def warm(self) -> bool:
        return self.count >= self.period


class Sma:
    def __init__(self, period: int) -> None:
        self.period = period
        self.window: Deque[float] = deque(maxlen=period)
        self.total = 0.0

    def update(self, x: float) -> float:
        if len(self.window) == self.period:
            self.total -= self.window[0]
        self.window.append(x)
        self.total += x
        return self.total / len(self.window)

    @property
    def warm(self) -> bool:
        return len(self.window) == self.period

    @property
    def value(self) -> Optional[float]:
        return self.total / len(self.window) if self.window else None


class Rolling:
    """Fixed window with min/max/mean/std over the last ``period`` values."""

    def __init__(self, period: int) -> None:
        self.period = period
        self.window: Deque[float] = deque(maxlen=period)

    def update(self, x: float) -> None:
        self.window.append(x)

    @property
    def warm(self) -> bool:
        return len(self.window) == self.period

    def low(self) -> float:
        return min(self.window)

    def high(self) -> float:
        return max(self.window)

    def mean(self) -> float:
        return sum(self.window) / len(self.window)

    def std(self) -> float:
        n = len(self.window)
        m = self.mean()
        return math.sqrt(sum((x - m) ** 2 for x in self.window) / n)


class WilliamsR:
    """w = 2(C - L_n)/(H_n - L_n) - 1 over the last n closes."""

    def __init__(self, period: int = 14) -> None:
        self.win = Rolling(period)

    def update(self, close: float) -> float:
        self.win.update(close)
        if not self.win.warm:
            return 0.0
        lo, hi = self.win.low(), self.win.high()
        if hi == lo:
            return 0.0
        return 2.0 * (close - lo) / (hi - lo) - 1.0


class EmaCross:
    """tanh-scaled fast/slow EMA differential relative to the price level."""

    def __init__(self, fast: int = 12, slow: int = 26, scale: float = 1e-3) -> None:
        self.fast = Ema(fast)
        self.slow = Ema(slow)
        self.scale = scale

    def update(self, close: float) -> float:
        f = self.fast.update(close)
        s = self.slow.update(close)
        if not self.slow.warm or close == 0:
            return 0.0
        return math.tanh((f - s) / close / self.scale)


class MacdSignal:
    """tanh-scaled MACD histogram (MACD line minus its signal line)."""

    def __init__(self, fast: int = 12, slow: int = 26, signal: int = 9,
                 scale: float = 1e-3) -> None:
        self.fast = Ema(fast)
        self.slow = Ema(slow)
        self.signal = Ema(signal)
        self.scale = scale

    def update(self, close: float) -> float:
        f = self.fast.update(close)
        s = self.slow.update(close)
        if not self.slow.warm:
            return 0.0
        macd = f - s
        sig = self.signal.update(macd)
        if not self.signal.warm or close == 0:
            return 0.0
        return math.tanh((macd - sig) / close / self.scale)


class KstSignal:
    """Know Sure Thing: weighted sum of smoothed rates of change.

    KST = sum_i (i+1) * SMA_mi(ROC_ni); emitted as tanh of the differential
    against its own signal SMA.
    """

    ROC_PERIODS = (10, 15, 20, 30)
    SMA_PERIODS = (10, 10, 10, 15)

    def __init__(self, signal: int = 9, scale: float = 1e-2) -> None:
        self.history: Deque[float] = deque(maxlen=max(self.ROC_PERIODS) + 1)
        self.smas = [Sma(p) for p in self.SMA_PERIODS]
        self.signal = Sma(signal)
        self.scale = scale

    def update(self, close: float) -> float:
        self.history.append(close)
        smoothed: List[Optional[float]] = []
        for n, sma in zip(self.ROC_PERIODS, self.smas):
            if len(self.history) > n:
                past = self.history[-1 - n]
                roc = close / past - 1.0 if past != 0 else 0.0
                v = sma.update(roc)
                smoothed.append(v if sma.warm else None)
            else:
                smoothed.append(None)
        if any(v is None for v in smoothed):
            return 0.0
        kst = sum((i + 1) * v for i, v in enumerate(smoothed))
        sig = self.signal.update(kst)
        if not self.signal.warm:
            return 0.0
        return math.tanh((kst - sig) / self.scale)


class KeltnerPosition:
    """Position inside EMA(n) +- mult * ATR(m), close-only true range."""

    def __init__(self, period: int = 20, atr_period: int = 10,
                 mult: float = 2.0) -> None:
        self.center = Ema(period)
        self.atr = Sma(atr_period)
        self.mult = mult
        self.prev: Optional[float] = None

    def update(self, close: float) -> float:
        c = self.center.update(close)
        if self.prev is not None:
            self.atr.update(abs(close - self.prev))
        self.prev = close
        if not (self.center.warm and self.atr.warm):
            return 0.0
        half = self.mult * self.atr.value
        return band_position(close, c - half, c + half)


class DonchianPosition:
    def __init__(self, period: int = 20) -> None:
        self.win = Rolling(period)

    def update(self, close: float) -> float:
        self.win.update(close)
        if not self.win.warm:
            return 0.0
        return band_position(close, self.win.low(), self.win.high())


class BollingerPosition:
    """Position inside SMA(n) +- mult * sigma(n)."""

    def __init__(self, period: int = 20, mult: float = 2.0) -> None:
        self.win = Rolling(period)
        self.mult = mult

    def update(self, close: float) -> float:
        self.win.update(close)
        if not self.win.warm:
            return 0.0
        m = self.win.mean()
        half = self.mult * self.win.std()
        return band_position(close, m - half, m + half)


class IchimokuPosition:
    """Position of the close against the cloud spanned by senkou A/B.

    Span A = (tenkan + kijun)/2, span B = (H_n3 + L_n3)/2; the score is the
    close's band position between the cloud bottom and top (unshifted).
    """

    def __init__(self, tenkan: int = 9, kijun: int = 26, senkou: int = 52) -> None:
        self.w1 = Rolling(tenkan)
        self.w2 = Rolling(kijun)
        self.w3 = Rolling(senkou)

    def update(self, close: float) -> float:
        for w in (self.w1, self.w2, self.w3):
            w.update(close)
        if not self.w3.warm:
            return 0.0
        tenkan = (self.w1.high() + self.w1.low()) / 2.0
        kijun = (self.w2.high() + self.w2.low()) / 2.0
        span_a = (tenkan + kijun) / 2.0
        span_b = (self.w3.high() + self.w3.low()) / 2.0
        return band_position(close, min(span_a, span_b), max(span_a, span_b))


@dataclass
class TechnicalConfig:
    williams_period: int = 14
    ema_fast: int = 12
    ema_slow: int = 26
    macd_signal: int = 9
    kst_signal: int = 9
    keltner_period: int = 20
    keltner_atr: int = 10
    keltner_mult: float = 2.0
    donchian_period: int = 20
    bollinger_period: int = 20
    bollinger_mult: float = 2.0
    ichimoku: Tuple[int, int, int] = (9, 26, 52)
    ema_scale: float = 1e-3
    macd_scale: float = 1e-3
    kst_scale: float = 1e-2

    def max_warmup(self) -> int:
        return max(self.williams_period, self.ema_slow + self.macd_signal,
                   max(KstSignal.ROC_PERIODS) + max(KstSignal.SMA_PERIODS)
                   + self.kst_signal, self.ichimoku[2])


class TechnicalBlock:
    """The eight technical features, updated once per decision step."""

    def __init__(self, cfg: Optional[TechnicalConfig] = None) -> None:
        if cfg is None:
            cfg = TechnicalConfig()
        self.williams = WilliamsR(cfg.williams_period)
        self.ema = EmaCross(cfg.ema_fast, cfg.ema_slow, cfg.ema_scale)
        self.kst = KstSignal(cfg.kst_signal, cfg.kst_scale)
        self.macd = MacdSignal(cfg.ema_fast, cfg.ema_slow, cfg.macd_signal,
                               cfg.macd_scale)
        self.keltner = KeltnerPosition(cfg.keltner_period, cfg.keltner_atr,
                                       cfg.keltner_mult)
        self.donchian = DonchianPosition(cfg.donchian_period)
        self.bollinger = BollingerPosition(cfg.bollinger_period,
                                           cfg.bollinger_mult)
        self.ichimoku = IchimokuPosition(*cfg.ichimoku)

    def update(self, mid: float) -> Tuple[float, ...]:
        return (
            self.williams.update(mid),
            self.ema.update(mid),
            self.kst.update(mid),
            self.macd.update(mid),
            self.keltner.update(mid),
            self.donchian.update(mid),
            self.bollinger.update(mid),
            self.ichimoku.update(mid),
        )
