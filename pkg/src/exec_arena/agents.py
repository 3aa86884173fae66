"""Kernel agents: the exchange, the TWAP teacher, and the learner handle.

The exchange owns the matching book and is the single mutator of market
state. It records every trade on a tape together with the touch prices that
prevailed just before the trade, which downstream feature computation needs
(trade direction, effective spread and price improvement are all defined
against the pre-trade quote).

Fill and cancel notices are only sent to agents that subscribed; a pure
market-replay run therefore costs one kernel message per historical record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .book import Order, OrderBook, Side, TradeRecord
from .kernel import (
    Cancel,
    CancelNotice,
    EventMessage,
    FillNotice,
    Kernel,
    NewLimit,
    NewMarket,
)


@dataclass(slots=True)
class TapeEntry:
    trade: TradeRecord
    pre_bid: Optional[int]
    pre_ask: Optional[int]


class ExchangeAgent:
    """Matches incoming order flow and notifies subscribed owners."""

    def __init__(self, tick_size: float = 0.01) -> None:
        self.agent_id = -1
        self.book = OrderBook(tick_size=tick_size)
        self.tape: List[TapeEntry] = []
        self._notify: set[int] = set()
        self.rejected_count = 0

    def subscribe_notices(self, agent_id: int) -> None:
        self._notify.add(agent_id)

    def on_message(self, kernel: Kernel, msg: EventMessage) -> None:
        payload = msg.payload
        kind = type(payload)
        if kind is NewLimit:
            pre_bid = self.book.best_bid()
            pre_ask = self.book.best_ask()
            order = Order(payload.order_id, msg.sender, payload.side,
                          payload.price, payload.qty, msg.deliver_ts)
            fills, _ = self.book.submit_limit(order)
            if fills:
                self._record(kernel, fills, pre_bid, pre_ask, payload.qty)
        elif kind is NewMarket:
            pre_bid = self.book.best_bid()
            pre_ask = self.book.best_ask()
            fills = self.book.submit_market(msg.sender, payload.side,
                                            payload.qty, msg.deliver_ts,
                                            payload.order_id)
            if fills:
                self._record(kernel, fills, pre_bid, pre_ask, payload.qty)
        elif kind is Cancel:
            if payload.qty is None:
                removed = self.book.cancel(payload.order_id).qty
            else:
                removed = self.book.reduce(payload.order_id, payload.qty)
            if msg.sender in self._notify:
                kernel.send(self.agent_id, msg.sender,
                            CancelNotice(payload.order_id, removed))
        else:
            raise TypeError(f"exchange cannot handle {kind.__name__}")

    def _record(self, kernel: Kernel, fills: List[TradeRecord],
                pre_bid: Optional[int], pre_ask: Optional[int],
                incoming_qty: int) -> None:
        tape = self.tape
        notify = self._notify
        taker_filled = 0
        for f in fills:
            tape.append(TapeEntry(f, pre_bid, pre_ask))
            taker_filled += f.qty
            if f.maker_owner in notify:
                live = self.book.get_order(f.maker_order_id)
                remaining = live.qty if live is not None else 0
                kernel.send(self.agent_id, f.maker_owner,
                            FillNotice(f.maker_order_id, f.price, f.qty, remaining))
            if f.taker_owner in notify:
                kernel.send(self.agent_id, f.taker_owner,
                            FillNotice(f.taker_order_id, f.price, f.qty,
                                       incoming_qty - taker_filled))


@dataclass(slots=True)
class OwnFill:
    ts: int
    order_id: int
    price: int
    qty: int


class _TradingAgent:
    """Shared bookkeeping for agents that own orders on the exchange."""

    def __init__(self, exchange_id: int) -> None:
        self.agent_id = -1
        self.exchange_id = exchange_id
        self.fills: List[OwnFill] = []
        self.executed_qty = 0
        self.executed_cost = 0  # integer tick*share units

    def on_fill(self, kernel: Kernel, msg: EventMessage, notice: FillNotice) -> None:
        self.fills.append(OwnFill(msg.deliver_ts, notice.order_id,
                                  notice.price, notice.qty))
        self.executed_qty += notice.qty
        self.executed_cost += notice.price * notice.qty


class TwapTeacher(_TradingAgent):
    """Market-order TWAP slicer: equal slices at fixed decision instants.

    Shortfall from underfilled slices rolls into later slices so the parent
    volume completes whenever the book carries enough liquidity; the final
    slice submits everything still unexecuted.
    """

    def __init__(self, exchange_id: int, side: Side, total_qty: int,
                 n_steps: int) -> None:
        super().__init__(exchange_id)
        self.side = side
        self.total_qty = total_qty
        self.n_steps = n_steps
        self.slice_qty = math.ceil(total_qty / n_steps)
        self.submitted_qty = 0

    def fire_slice(self, kernel: Kernel, step: int) -> int:
        """Submit the market slice for 1-based ``step``; returns qty sent."""
        remaining = self.total_qty - self.executed_qty
        qty = remaining if step >= self.n_steps else min(self.slice_qty, remaining)
        if qty <= 0:
            return 0
        kernel.send(self.agent_id, self.exchange_id,
                    NewMarket(kernel.new_order_id(), self.side, qty))
        self.submitted_qty += qty
        return qty

    def on_message(self, kernel: Kernel, msg: EventMessage) -> None:
        if isinstance(msg.payload, FillNotice):
            self.on_fill(kernel, msg, msg.payload)


class LearnerHandle(_TradingAgent):
    """Order-management proxy for the external policy.

    Tracks open orders so the step loop can cancel the unexecuted remainder
    at every decision boundary, and per-batch submitted/executed quantities
    for the order-fulfillment observation.
    """

    def __init__(self, exchange_id: int, side: Side) -> None:
        super().__init__(exchange_id)
        self.side = side
        self.open_orders: Dict[int, int] = {}
        self.batch_submitted = 0
        self.batch_executed = 0
        self._batch_ids: set[int] = set()

    def begin_batch(self) -> None:
        self.batch_submitted = 0
        self.batch_executed = 0
        self._batch_ids.clear()

    def place_limit(self, kernel: Kernel, price: int, qty: int) -> int:
        oid = kernel.new_order_id()
        kernel.send(self.agent_id, self.exchange_id,
                    NewLimit(oid, self.side, price, qty))
        self.open_orders[oid] = qty
        self.batch_submitted += qty
        self._batch_ids.add(oid)
        return oid

    def place_market(self, kernel: Kernel, qty: int) -> int:
        oid = kernel.new_order_id()
        kernel.send(self.agent_id, self.exchange_id,
                    NewMarket(oid, self.side, qty))
        self.batch_submitted += qty
        self._batch_ids.add(oid)
        return oid

    def cancel_open_orders(self, kernel: Kernel) -> None:
        for oid in list(self.open_orders):
            kernel.send(self.agent_id, self.exchange_id, Cancel(oid))

    def on_message(self, kernel: Kernel, msg: EventMessage) -> None:
        payload = msg.payload
        if isinstance(payload, FillNotice):
            self.on_fill(kernel, msg, payload)
            if payload.order_id in self._batch_ids:
                self.batch_executed += payload.qty
            if payload.order_id in self.open_orders:
                if payload.remaining > 0:
                    self.open_orders[payload.order_id] = payload.remaining
                else:
                    del self.open_orders[payload.order_id]
        elif isinstance(payload, CancelNotice):
            self.open_orders.pop(payload.order_id, None)
