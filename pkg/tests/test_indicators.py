"""Streaming indicator tests: warm-up, degeneracy, endpoint definitions."""

import random

from exec_arena.indicators import (
    BollingerPosition,
    DonchianPosition,
    EmaCross,
    IchimokuPosition,
    KeltnerPosition,
    KstSignal,
    MacdSignal,
    TechnicalBlock,
    WilliamsR,
    band_position,
)


class TestBandPosition:
    def test_linear_between(self):
        assert band_position(5.0, 0.0, 10.0) == 0.0
        assert band_position(7.5, 0.0, 10.0) == 0.5

    def test_clipped_outside(self):
        assert band_position(-3.0, 0.0, 10.0) == -1.0
        assert band_position(42.0, 0.0, 10.0) == 1.0

    def test_degenerate_width(self):
        assert band_position(5.0, 5.0, 5.0) == 0.0


class TestWarmup:
    def test_all_zero_before_windows_fill(self):
        block = TechnicalBlock()
        rng = random.Random(3)
        outputs = [block.update(100.0 + rng.random()) for _ in range(13)]
        assert all(v == 0.0 for row in outputs for v in row)


class TestConstantSeries:
    def test_trend_indicators_zero(self):
        ema, macd, boll = EmaCross(), MacdSignal(), BollingerPosition()
        kst = KstSignal()
        for _ in range(200):
            assert ema.update(100.0) == 0.0
            assert macd.update(100.0) == 0.0
            assert boll.update(100.0) == 0.0
            assert kst.update(100.0) == 0.0


class TestWilliams:
    def test_high_low_endpoints(self):
        w = WilliamsR(14)
        for x in range(14):
            w.update(100.0 + x)
        assert w.update(200.0) == 1.0  # new high of the window
        w2 = WilliamsR(14)
        for x in range(14):
            w2.update(100.0 + x)
        assert w2.update(50.0) == -1.0


class TestDonchian:
    def test_increasing_series_hits_upper(self):
        d = DonchianPosition(20)
        out = 0.0
        for x in range(1, 31):
            out = d.update(float(x))
        # close of an increasing series is the 20-window high
        assert out == 1.0

    def test_window_minmax_oracle(self):
        rng = random.Random(11)
        series = [100.0 + rng.uniform(-5, 5) for _ in range(60)]
        d = DonchianPosition(20)
        for i, x in enumerate(series):
            got = d.update(x)
            if i >= 19:
                window = series[i - 19:i + 1]
                lo, hi = min(window), max(window)
                want = 0.0 if hi == lo else 2 * (x - lo) / (hi - lo) - 1
                assert abs(got - want) < 1e-12


class TestRangeProperty:
    def test_all_outputs_bounded_on_random_walk(self):
        rng = random.Random(5)
        block = TechnicalBlock()
        x = 100.0
        for _ in range(500):
            x = max(1.0, x + rng.uniform(-1, 1))
            for v in block.update(x):
                assert -1.0 <= v <= 1.0

    def test_keltner_and_ichimoku_respond(self):
        # strongly trending series pushes band positions to the upper bound
        kel, ich = KeltnerPosition(), IchimokuPosition()
        out_k = out_i = 0.0
        for x in range(200):
            out_k = kel.update(float(100 + 5 * x))
            out_i = ich.update(float(100 + 5 * x))
        assert out_k == 1.0
        assert out_i == 1.0
