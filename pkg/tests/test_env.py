"""Execution environment tests: blending, placement, episode mechanics."""

import numpy as np
import pytest

from exec_arena.book import DepthSnapshot, OrderBook, Order, Side
from exec_arena.env import (
    EnvConfig,
    EnvError,
    ExecutionEnv,
    TaskConfig,
    blend_action,
    placement_prices,
)
from exec_arena.marketdata import SyntheticConfig
from exec_arena.rewards import (
    RewardConfig,
    competitive_reward,
    imitation_reward,
    total_reward,
)


class TestBlendAction:
    def test_identity_action_is_baseline(self):
        assert blend_action([0, 0, 0], 100, 10_000) == (100, 0, 0)

    def test_lower_bound_zeroes_order(self):
        assert blend_action([-1, 0, 0], 100, 10_000) == (0, 0, 0)

    def test_upper_bound(self):
        assert blend_action([3, 1, 1], 100, 10_000) == (400, 100, 100)

    def test_greedy_clip_from_deepest_level(self):
        assert blend_action([3, 1, 1], 100, 450) == (400, 50, 0)

    def test_clip_reaches_level_one(self):
        assert blend_action([3, 1, 1], 100, 250) == (250, 0, 0)

    def test_out_of_bounds_action_clipped(self):
        assert blend_action([99, -5, 0.5], 100, 10_000) == (400, 0, 50)

    def test_rounding_to_whole_shares(self):
        assert blend_action([0.5, 0.25, 0], 10, 10_000) == (15, 3, 0)


def depth(bids=(), asks=(), ts=0):
    bp = tuple(p for p, _ in bids) + (0,) * (5 - len(bids))
    bv = tuple(v for _, v in bids) + (0,) * (5 - len(bids))
    ap = tuple(p for p, _ in asks) + (0,) * (5 - len(asks))
    av = tuple(v for _, v in asks) + (0,) * (5 - len(asks))
    return DepthSnapshot(ts, bp, bv, ap, av)


class TestPlacementPrices:
    def test_passive_buy_uses_top3_bids(self):
        d = depth(bids=[(10000, 1), (9998, 1), (9995, 1)], asks=[(10010, 1)])
        prices, flagged = placement_prices(d, Side.BID, "passive", None, None)
        assert prices == [10000, 9998, 9995]
        assert not flagged

    def test_missing_levels_synthesized_one_tick_deeper(self):
        d = depth(bids=[(10000, 1)], asks=[(10010, 1)])
        prices, _ = placement_prices(d, Side.BID, "passive", None, None)
        assert prices == [10000, 9999, 9998]

    def test_empty_side_falls_back_to_last_touch(self):
        d = depth(asks=[(10010, 1)])
        prices, flagged = placement_prices(d, Side.BID, "passive", 10002, 10010)
        assert flagged
        assert prices == [10001, 10000, 9999]

    def test_marketable_buy_prices_at_asks(self):
        d = depth(bids=[(10000, 1)], asks=[(10010, 1), (10012, 1)])
        prices, _ = placement_prices(d, Side.BID, "marketable", None, None)
        assert prices == [10010, 10012, 10013]

    def test_sell_sides_mirror(self):
        d = depth(bids=[(10000, 1), (9999, 1)], asks=[(10010, 1)])
        passive, _ = placement_prices(d, Side.ASK, "passive", None, None)
        assert passive == [10010, 10011, 10012]
        marketable, _ = placement_prices(d, Side.ASK, "marketable", None, None)
        assert marketable == [10000, 9999, 9998]


def deep_static_config(total=500, steps=10, placement="marketable",
                       depth_per_level=5000, **kwargs):
    """Quiet deep book: only the ten seeding levels, no background flow."""
    return EnvConfig(
        task=TaskConfig(side="BUY", total_volume=total, horizon_steps=steps,
                        interval_ns=60_000_000_000),
        synthetic=SyntheticConfig(seed=1, duration_ns=0, limit_rate=0,
                                  market_rate=0, cancel_rate=0,
                                  init_depth=depth_per_level),
        placement=placement,
        **kwargs,
    )


def busy_config(total=300, steps=6, seed=5, **kwargs):
    return EnvConfig(
        task=TaskConfig(side="BUY", total_volume=total, horizon_steps=steps,
                        interval_ns=1_000_000_000),
        synthetic=SyntheticConfig(seed=seed, duration_ns=0, limit_rate=200,
                                  market_rate=40, cancel_rate=0.5,
                                  size_mean=60, init_depth=2000),
        seed=seed,
        **kwargs,
    )


class TestReset:
    def test_shape_contract(self):
        env = ExecutionEnv(deep_static_config())
        res = env.reset()
        assert res.observation.shape == (60, 39)
        assert res.info["total_volume"] == 500
        assert res.info["horizon_steps"] == 10
        assert not res.done

    def test_fixed_seed_identical_initial_observation(self):
        a = ExecutionEnv(busy_config(seed=9)).reset()
        b = ExecutionEnv(busy_config(seed=9)).reset()
        assert np.array_equal(a.observation, b.observation)

    def test_bad_task_rejected(self):
        with pytest.raises(EnvError):
            ExecutionEnv(deep_static_config(total=0))
        with pytest.raises(EnvError):
            ExecutionEnv(deep_static_config(steps=0))

    def test_single_step_episode(self):
        env = ExecutionEnv(deep_static_config(total=50, steps=1))
        env.reset()
        res = env.step([0, 0, 0])
        assert res.done
        assert env.episode_totals()["learner_volume"] == 50


class TestEpisodeMechanics:
    def test_baseline_action_tracks_teacher_on_deep_book(self):
        env = ExecutionEnv(deep_static_config())
        env.reset()
        done = False
        while not done:
            res = env.step([0, 0, 0])
            done = res.done
            assert res.info["r_mimic"] == 0.0
            assert res.info["learner_step_volume"] == res.info["teacher_step_volume"]
        totals = env.episode_totals()
        assert totals["learner_volume"] == 500
        assert totals["teacher_volume"] == 500

    def test_share_conservation_with_terminal_market_order(self):
        # passive learner on a quiet book never fills until the forced
        # terminal market order completes the parent volume
        env = ExecutionEnv(deep_static_config(placement="passive"))
        env.reset()
        done = False
        last_info = None
        while not done:
            res = env.step([0, 0, 0])
            done = res.done
            last_info = res.info
        assert last_info["terminal_market_qty"] == 500
        assert env.episode_totals()["learner_volume"] == 500

    def test_step_after_done_rejected(self):
        env = ExecutionEnv(deep_static_config(total=50, steps=1))
        env.reset()
        env.step([0, 0, 0])
        with pytest.raises(EnvError):
            env.step([0, 0, 0])

    def test_step_before_reset_rejected(self):
        env = ExecutionEnv(deep_static_config())
        with pytest.raises(EnvError):
            env.step([0, 0, 0])

    def test_rewards_recomputable_from_step_logs(self):
        cfg = busy_config(seed=13)
        env = ExecutionEnv(cfg)
        env.reset()
        logs = []
        done = False
        while not done:
            res = env.step([0.5, 0.5, 0.0])
            logs.append(res.info)
            done = res.done
        j = cfg.reward.window
        for k in range(1, len(logs) + 1):
            lo = max(0, k - j)
            window = logs[lo:k]
            c_rl = sum(x["learner_step_cost"] for x in window)
            v_rl = sum(x["learner_step_volume"] for x in window)
            c_b = sum(x["teacher_step_cost"] for x in window)
            v_b = sum(x["teacher_step_volume"] for x in window)
            info = logs[k - 1]
            r_comp = competitive_reward(c_b, v_b, c_rl, v_rl, info["touch_price"])
            r_mimic = imitation_reward(v_rl, v_b)
            assert info["r_comp"] == r_comp
            assert info["r_mimic"] == r_mimic

    def test_window_identity_maintained(self):
        env = ExecutionEnv(busy_config(seed=21))
        env.reset()
        done = False
        while not done:
            res = env.step([1.0, 0.2, 0.1])
            done = res.done
            assert env.rewards.verify_windows()

    def test_early_finish_still_completes_teacher(self):
        # hyper-aggressive marketable learner finishes in the first steps
        env = ExecutionEnv(deep_static_config(total=100, steps=10))
        env.reset()
        done = False
        steps = 0
        while not done:
            res = env.step([3, 1, 1])
            steps += 1
            done = res.done
        assert steps < 10
        totals = env.episode_totals()
        assert totals["learner_volume"] == 100
        assert totals["teacher_volume"] == 100

    def test_determinism_full_episode(self):
        def run():
            env = ExecutionEnv(busy_config(seed=4, event_log=True))
            env.reset()
            rewards = []
            done = False
            while not done:
                res = env.step([0.3, 0.7, 0.2])
                rewards.append(res.reward)
                done = res.done
            return rewards, env.kernel.event_log_csv(), env.episode_totals()

        assert run() == run()

    def test_sell_side_episode(self):
        cfg = deep_static_config()
        cfg.task.side = "SELL"
        env = ExecutionEnv(cfg)
        env.reset()
        done = False
        while not done:
            res = env.step([0, 0, 0])
            done = res.done
            assert res.info["r_mimic"] == 0.0
        assert env.episode_totals()["learner_volume"] == 500


class TestIsolatedBooks:
    def test_dual_book_mode_isolates_impact(self):
        shared = ExecutionEnv(deep_static_config(shared_book=True))
        isolated = ExecutionEnv(deep_static_config(shared_book=False))
        for env in (shared, isolated):
            env.reset()
            done = False
            while not done:
                done = env.step([0, 0, 0]).done
        # isolated: learner's book only lost the learner's volume
        iso_book = isolated.exchange.book
        assert iso_book.side_volume(Side.ASK) == 5 * 5000 - 500
        shared_book_vol = shared.exchange.book.side_volume(Side.ASK)
        assert shared_book_vol == 5 * 5000 - 1000
        # both agents still complete in isolation
        totals = isolated.episode_totals()
        assert totals["learner_volume"] == totals["teacher_volume"] == 500


class TestImpactMonotonicity:
    def test_larger_market_order_weakly_worse_average_price(self):
        def avg_price(qty):
            book = OrderBook()
            for i, (p, v) in enumerate([(10010, 100), (10020, 100),
                                        (10030, 100)]):
                book.submit_limit(Order(i + 1, 0, Side.ASK, p, v, 0))
            fills = book.submit_market(1, Side.BID, qty, 0)
            return sum(f.price * f.qty for f in fills) / sum(f.qty for f in fills)

        prices = [avg_price(q) for q in (50, 100, 150, 250, 300)]
        assert all(a <= b for a, b in zip(prices, prices[1:]))
