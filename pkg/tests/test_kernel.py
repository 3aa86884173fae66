"""Kernel tests: ordering, determinism, causality, decision stepping."""

import random

import pytest

from exec_arena.agents import ExchangeAgent, LearnerHandle
from exec_arena.book import Side
from exec_arena.kernel import Kernel, KernelError, WakeUp


class RecordingAgent:
    def __init__(self):
        self.agent_id = -1
        self.received = []

    def on_message(self, kernel, msg):
        self.received.append((msg.deliver_ts, msg.seq, msg.sender, msg.payload))
        assert msg.deliver_ts <= kernel.clock  # causality


class EchoAgent(RecordingAgent):
    """Replies to the sender once per received WakeUp."""

    def on_message(self, kernel, msg):
        super().on_message(kernel, msg)
        if isinstance(msg.payload, WakeUp) and msg.payload.tag < 3:
            kernel.send(self.agent_id, msg.sender, WakeUp(msg.payload.tag + 1))


class TestRegistration:
    def test_ordinal_ids(self):
        k = Kernel()
        agents = [RecordingAgent() for _ in range(3)]
        assert [k.register_agent(a) for a in agents] == [0, 1, 2]

    def test_duplicate_handle_gets_new_id(self):
        k = Kernel()
        a = RecordingAgent()
        assert k.register_agent(a) == 0
        assert k.register_agent(a) == 1

    def test_register_after_run_rejected(self):
        k = Kernel()
        k.register_agent(RecordingAgent())
        k.run_until(10)
        with pytest.raises(KernelError):
            k.register_agent(RecordingAgent())


class TestRunUntil:
    def test_same_ts_delivered_in_seq_order(self):
        k = Kernel()
        a = RecordingAgent()
        k.register_agent(a)
        k.send(0, 0, WakeUp(1), delay_ns=50)
        k.send(0, 0, WakeUp(2), delay_ns=50)
        k.run_until(100)
        assert [m[3].tag for m in a.received] == [1, 2]

    def test_reply_cascade_within_window(self):
        k = Kernel()
        a, b = EchoAgent(), EchoAgent()
        k.register_agent(a, latency_ns=10)
        k.register_agent(b, latency_ns=10)
        k.send(0, 1, WakeUp(0), delay_ns=0)  # a->b at 10, then ping-pong
        n = k.run_until(100)
        # tags 0..3 delivered: b@10, a@20, b@30, a@40
        assert n == 4
        assert [m[0] for m in b.received] == [10, 30]
        assert [m[0] for m in a.received] == [20, 40]

    def test_empty_queue_advances_clock(self):
        k = Kernel()
        k.register_agent(RecordingAgent())
        assert k.run_until(500) == 0
        assert k.clock == 500

    def test_backwards_time_rejected(self):
        k = Kernel()
        k.register_agent(RecordingAgent())
        k.run_until(100)
        with pytest.raises(KernelError):
            k.run_until(99)

    def test_delivery_sorted_by_ts_then_seq(self):
        rng = random.Random(5)
        k = Kernel()
        a = RecordingAgent()
        k.register_agent(a)
        delays = [rng.randint(0, 20) for _ in range(200)]
        for i, d in enumerate(delays):
            k.send(0, 0, WakeUp(i), delay_ns=d)
        k.run_until(100)
        keys = [(m[0], m[1]) for m in a.received]
        assert keys == sorted(keys)
        assert len(keys) == 200

    def test_determinism_byte_identical_logs(self):
        def run():
            k = Kernel(event_log=True)
            a, b = EchoAgent(), EchoAgent()
            k.register_agent(a, latency_ns=7)
            k.register_agent(b, latency_ns=3)
            k.send(0, 1, WakeUp(0))
            k.send(1, 0, WakeUp(0))
            k.run_until(1000)
            return k.event_log_csv()

        assert run() == run()


class TestStepToNextDecision:
    def _market(self):
        k = Kernel()
        ex = ExchangeAgent()
        k.register_agent(ex)
        learner = LearnerHandle(ex.agent_id, Side.BID)
        k.register_agent(learner)
        ex.subscribe_notices(learner.agent_id)
        return k, ex, learner

    def test_interval_arithmetic(self):
        k, _, learner = self._market()
        assert k.step_to_next_decision(learner, 60_000_000_000, 10**15) == 60_000_000_000

    def test_unexecuted_orders_cancelled_before_observation(self):
        k, ex, learner = self._market()
        learner.place_limit(k, price=9_990, qty=30)
        t = k.step_to_next_decision(learner, 60_000_000_000, 10**15)
        assert t == 60_000_000_000
        # at return time the learner's stale order is gone from the book
        assert ex.book.open_order_count() == 0
        assert learner.open_orders == {}

    def test_session_end_signalled(self):
        k, _, learner = self._market()
        k.run_until(120_000_000_000)
        assert k.step_to_next_decision(learner, 60_000_000_000,
                                       120_000_000_000) is None
