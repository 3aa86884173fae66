"""Deterministic discrete-event kernel for inter-agent messaging.

Messages are delivered in strict ``(deliver_ts, seq)`` order, where ``seq``
is a global counter assigned at enqueue time. With a fixed agent set and
fixed inputs this makes every run byte-identical, which the rest of the
system relies on (replays, trade tapes and episode reports are diffed in
tests).

Besides the queued messages, the kernel can pull from registered *sources*
(agents that carry large external streams, e.g. a market replay cursor), so
a million-message day does not need a million pre-queued wakeups. A source
is asked for its next event timestamp; queued messages win ties, since they
were sent earlier.

The kernel has no thread-awareness: one kernel per thread of control, many
kernels in parallel with zero sharing.
"""

from __future__ import annotations

import heapq
import io
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Protocol, Tuple

from .book import DepthSnapshot, Side

# ---------------------------------------------------------------------------
# message payloads
# ---------------------------------------------------------------------------


@dataclass(slots=True)
class NewLimit:
    order_id: int
    side: Side
    price: int
    qty: int

    def detail(self) -> str:
        return f"{self.order_id}:{self.side.name}:{self.price}x{self.qty}"


@dataclass(slots=True)
class NewMarket:
    order_id: int
    side: Side
    qty: int

    def detail(self) -> str:
        return f"{self.order_id}:{self.side.name}x{self.qty}"


@dataclass(slots=True)
class Cancel:
    """Full cancel when ``qty`` is None, otherwise reduce by ``qty``."""

    order_id: int
    qty: Optional[int] = None

    def detail(self) -> str:
        return f"{self.order_id}" if self.qty is None else f"{self.order_id}-{self.qty}"


@dataclass(slots=True)
class FillNotice:
    order_id: int
    price: int
    qty: int
    remaining: int

    def detail(self) -> str:
        return f"{self.order_id}:{self.qty}@{self.price}r{self.remaining}"


@dataclass(slots=True)
class CancelNotice:
    order_id: int
    cancelled_qty: int

    def detail(self) -> str:
        return f"{self.order_id}:{self.cancelled_qty}"


@dataclass(slots=True)
class DepthUpdate:
    snapshot: DepthSnapshot

    def detail(self) -> str:
        s = self.snapshot
        return f"b{s.bid_prices[0]}x{s.bid_vols[0]}a{s.ask_prices[0]}x{s.ask_vols[0]}"


@dataclass(slots=True)
class WakeUp:
    tag: int = 0

    def detail(self) -> str:
        return str(self.tag)


@dataclass(slots=True)
class EventMessage:
    deliver_ts: int
    seq: int
    sender: int
    recipient: int
    payload: object


class KernelError(RuntimeError):
    pass


class Agent(Protocol):
    agent_id: int

    def on_message(self, kernel: "Kernel", msg: EventMessage) -> None: ...


class EventSource(Protocol):
    """External stream merged into the delivery loop (e.g. market replay)."""

    def next_event_ts(self) -> Optional[int]: ...

    def emit_next(self, kernel: "Kernel") -> None: ...


class Kernel:
    def __init__(self, event_log: bool = False) -> None:
        self.clock = 0
        self._queue: List[Tuple[int, int, EventMessage]] = []
        self._agents: List[Agent] = []
        self._latency: List[int] = []
        self._sources: List[EventSource] = []
        self._next_seq = 0
        self._next_order_id = 1
        self._started = False
        self._log: Optional[List[Tuple[int, int, int, int, str, str]]] = (
            [] if event_log else None
        )

    # ------------------------------------------------------------------
    # setup
    # ------------------------------------------------------------------

    def register_agent(self, handle: Agent, latency_ns: int = 0) -> int:
        """Ids are ordinal in registration order; registration closes at start."""
        if self._started:
            raise KernelError("cannot register agents after the run has started")
        agent_id = len(self._agents)
        handle.agent_id = agent_id
        self._agents.append(handle)
        self._latency.append(int(latency_ns))
        return agent_id

    def add_source(self, source: EventSource) -> None:
        if self._started:
            raise KernelError("cannot add sources after the run has started")
        self._sources.append(source)

    def new_order_id(self) -> int:
        """Globally unique, monotone order ids for all trading agents."""
        oid = self._next_order_id
        self._next_order_id += 1
        return oid

    # ------------------------------------------------------------------
    # messaging
    # ------------------------------------------------------------------

    def send(self, sender: int, recipient: int, payload: object,
             delay_ns: int = 0) -> None:
        """Enqueue for delivery at clock + sender latency + delay."""
        deliver_ts = self.clock + self._latency[sender] + delay_ns
        seq = self._next_seq
        self._next_seq += 1
        msg = EventMessage(deliver_ts, seq, sender, recipient, payload)
        heapq.heappush(self._queue, (deliver_ts, seq, msg))

    # ------------------------------------------------------------------
    # execution
    # ------------------------------------------------------------------

    def run_until(self, t: int) -> int:
        """Deliver every message with deliver_ts <= t, then set clock = t.

        Messages spawned during processing that land within the window are
        delivered too. Returns the number of messages delivered.
        """
        if t < self.clock:
            raise KernelError(f"run_until({t}) is behind the clock ({self.clock})")
        self._started = True
        queue = self._queue
        agents = self._agents
        log = self._log
        processed = 0
        while True:
            src_ts = None
            src = None
            for s in self._sources:
                ts = s.next_event_ts()
                if ts is not None and (src_ts is None or ts < src_ts):
                    src_ts = ts
                    src = s
            head_ts = queue[0][0] if queue else None
            if head_ts is not None and (src_ts is None or head_ts <= src_ts):
                # queued message is next; queued wins ties (it was sent earlier)
                if head_ts > t:
                    break
                _, _, msg = heapq.heappop(queue)
                self.clock = msg.deliver_ts
                if log is not None:
                    log.append((msg.deliver_ts, msg.seq, msg.sender,
                                msg.recipient, type(msg.payload).__name__,
                                msg.payload.detail()))
                agents[msg.recipient].on_message(self, msg)
                processed += 1
                continue
            if src_ts is None or src_ts > t:
                break
            self.clock = src_ts
            src.emit_next(self)
        self.clock = t
        return processed

    def step_to_next_decision(self, decision_agent: "DecisionAgent",
                              interval_ns: int,
                              session_end_ns: int) -> Optional[int]:
        """Run to the next multiple of the decision interval.

        Immediately before handing control back (i.e. before the caller takes
        its observation) the decision agent's unexecuted orders are cancelled,
        so the observed book never contains its stale orders. Returns the new
        clock, or None once the next boundary would pass the session end.
        """
        next_t = (self.clock // interval_ns + 1) * interval_ns
        if next_t > session_end_ns:
            return None
        self.run_until(next_t)
        decision_agent.cancel_open_orders(self)
        self.run_until(next_t)  # flush the cancels and their notices
        return next_t

    # ------------------------------------------------------------------
    # event log
    # ------------------------------------------------------------------

    @property
    def event_log(self) -> List[Tuple[int, int, int, int, str, str]]:
        if self._log is None:
            raise KernelError("event log not enabled")
        return self._log

    def event_log_csv(self) -> str:
        out = io.StringIO()
        out.write("deliver_ts,seq,sender,recipient,payload_kind,detail\n")
        for row in self.event_log:
            out.write("%d,%d,%d,%d,%s,%s\n" % row)
        return out.getvalue()


class DecisionAgent(Protocol):
    """Agent driven by the step loop; must expose bulk cancellation."""

    agent_id: int

    def cancel_open_orders(self, kernel: Kernel) -> None: ...
