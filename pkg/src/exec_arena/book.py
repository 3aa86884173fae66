"""Price-time-priority limit order book with integer tick prices.

The book is the matching core of the exchange agent: limit orders rest in
FIFO queues per price level, marketable flow is filled best-price-first at
resting (maker) prices, and market orders walk the opposite side until
filled or the book is exhausted (the remainder is discarded, never rested).

All prices are integer ticks and all quantities integer shares, so cost
accounting downstream stays exact. One ``OrderBook`` instance is
single-threaded; instances share nothing.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import Deque, Dict, Iterator, List, NamedTuple, Optional, Tuple


class Side(IntEnum):
    BID = 0
    ASK = 1

    @property
    def opposite(self) -> "Side":
        return Side.ASK if self is Side.BID else Side.BID

    @classmethod
    def parse(cls, s: str) -> "Side":
        u = s.upper()
        if u in ("BID", "B", "BUY"):
            return cls.BID
        if u in ("ASK", "A", "SELL", "S"):
            return cls.ASK
        raise ValueError(f"unknown side: {s!r}")


class OrderRejected(ValueError):
    """Raised when the book refuses an order (bad qty/price, duplicate id)."""


@dataclass(slots=True)
class Order:
    """A resting limit order. ``qty`` is the remaining unfilled quantity."""

    order_id: int
    owner_id: int
    side: Side
    price: int
    qty: int
    ts: int
    seq: int = 0


@dataclass(slots=True)
class TradeRecord:
    """One fill: executed at the resting order's limit price.

    ``aggressor_side`` is the side of the incoming order that caused the
    trade. Maker/taker order ids are kept so callers can track which resting
    orders were consumed.
    """

    ts: int
    price: int
    qty: int
    aggressor_side: Side
    maker_owner: int
    taker_owner: int
    maker_order_id: int
    taker_order_id: int


@dataclass(slots=True)
class DepthSnapshot:
    """Top-5 aggregated depth per side; absent levels are zero-padded."""

    ts: int
    bid_prices: Tuple[int, ...]
    bid_vols: Tuple[int, ...]
    ask_prices: Tuple[int, ...]
    ask_vols: Tuple[int, ...]

    @property
    def best_bid(self) -> Optional[int]:
        return self.bid_prices[0] or None

    @property
    def best_ask(self) -> Optional[int]:
        return self.ask_prices[0] or None

    @property
    def mid(self) -> Optional[float]:
        if self.bid_prices[0] and self.ask_prices[0]:
            return (self.bid_prices[0] + self.ask_prices[0]) / 2.0
        return None


class CancelResult(NamedTuple):
    qty: int
    found: bool


class _Level:
    """FIFO queue of orders at one price plus its live aggregate volume.

    Cancelled orders are tombstoned (qty set to 0) and skipped when the
    matching loop reaches them; ``volume`` reflects live quantity only.
    """

    __slots__ = ("orders", "volume")

    def __init__(self) -> None:
        self.orders: Deque[Order] = deque()
        self.volume = 0


DEPTH_LEVELS = 5


class OrderBook:
    """Two-sided book: bids best-first descending, asks ascending.

    Invariants maintained after every operation: the book is uncrossed,
    every tracked level is nonempty, and orders within a level are in
    arrival (seq) order.
    """

    def __init__(self, tick_size: float = 0.01) -> None:
        self.tick_size = tick_size
        self._levels: Tuple[Dict[int, _Level], Dict[int, _Level]] = ({}, {})
        # Sorted ascending; best bid is the last entry, best ask the first.
        self._prices: Tuple[List[int], List[int]] = ([], [])
        self._orders: Dict[int, Order] = {}
        self._used_ids: set[int] = set()
        self._next_seq = 0

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    def best_bid(self) -> Optional[int]:
        p = self._prices[Side.BID]
        return p[-1] if p else None

    def best_ask(self) -> Optional[int]:
        p = self._prices[Side.ASK]
        return p[0] if p else None

    def get_order(self, order_id: int) -> Optional[Order]:
        return self._orders.get(order_id)

    def open_order_count(self) -> int:
        return len(self._orders)

    def iter_orders(self) -> Iterator[Order]:
        """Live resting orders, unspecified traversal order."""
        return iter(self._orders.values())

    def side_volume(self, side: Side) -> int:
        return sum(lvl.volume for lvl in self._levels[side].values())

    def depth_snapshot(self, ts: int) -> DepthSnapshot:
        bid_p, bid_v = self._top_levels(Side.BID)
        ask_p, ask_v = self._top_levels(Side.ASK)
        return DepthSnapshot(ts, bid_p, bid_v, ask_p, ask_v)

    def _top_levels(self, side: Side) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        prices = self._prices[side]
        levels = self._levels[side]
        it = reversed(prices) if side is Side.BID else iter(prices)
        out_p = []
        out_v = []
        for p in it:
            if len(out_p) == DEPTH_LEVELS:
                break
            out_p.append(p)
            out_v.append(levels[p].volume)
        while len(out_p) < DEPTH_LEVELS:
            out_p.append(0)
            out_v.append(0)
        return tuple(out_p), tuple(out_v)

    # ------------------------------------------------------------------
    # mutations
    # ------------------------------------------------------------------

    def submit_limit(self, order: Order) -> Tuple[List[TradeRecord], int]:
        """Match the crossing portion, rest the remainder.

        Returns the fill list and the quantity left resting (0 if the order
        filled completely or was fully marketable).
        """
        if order.qty <= 0:
            raise OrderRejected(f"order {order.order_id}: qty must be positive")
        if order.price <= 0:
            raise OrderRejected(f"order {order.order_id}: price must be positive")
        if order.order_id in self._used_ids:
            raise OrderRejected(f"order {order.order_id}: duplicate order id")
        self._used_ids.add(order.order_id)
        order.seq = self._next_seq
        self._next_seq += 1

        fills = self._match(
            order.side, order.qty, order.ts, order.owner_id, order.order_id,
            limit_price=order.price,
        )
        filled = sum(f.qty for f in fills)
        remaining = order.qty - filled
        if remaining > 0:
            order.qty = remaining
            self._rest(order)
        return fills, remaining

    def submit_market(self, owner_id: int, side: Side, qty: int, ts: int,
                      order_id: int = 0) -> List[TradeRecord]:
        """Walk the opposite side; any unfilled remainder is discarded."""
        if qty <= 0:
            raise OrderRejected("market order qty must be positive")
        return self._match(side, qty, ts, owner_id, order_id, limit_price=None)

    def cancel(self, order_id: int) -> CancelResult:
        """Remove a resting order entirely; idempotent for unknown ids."""
        order = self._orders.pop(order_id, None)
        if order is None:
            return CancelResult(0, False)
        qty = order.qty
        self._release(order, qty)
        return CancelResult(qty, True)

    def reduce(self, order_id: int, qty: int) -> int:
        """Remove up to ``qty`` shares from a resting order (partial cancel).

        Returns the quantity actually removed; 0 for unknown ids.
        """
        if qty <= 0:
            raise OrderRejected("reduce qty must be positive")
        order = self._orders.get(order_id)
        if order is None:
            return 0
        removed = min(qty, order.qty)
        if removed == order.qty:
            del self._orders[order_id]
        self._release(order, removed)
        return removed

    # ------------------------------------------------------------------
    # internals
    # ------------------------------------------------------------------

    def _match(self, side: Side, qty: int, ts: int, owner_id: int,
               taker_order_id: int, limit_price: Optional[int]) -> List[TradeRecord]:
        opp = side.opposite
        prices = self._prices[opp]
        levels = self._levels[opp]
        fills: List[TradeRecord] = []
        while qty > 0 and prices:
            best = prices[-1] if opp is Side.BID else prices[0]
            if limit_price is not None:
                if side is Side.BID and best > limit_price:
                    break
                if side is Side.ASK and best < limit_price:
                    break
            level = levels[best]
            queue = level.orders
            while qty > 0 and queue:
                maker = queue[0]
                if maker.qty == 0:  # tombstone from a cancel
                    queue.popleft()
                    continue
                take = maker.qty if maker.qty < qty else qty
                maker.qty -= take
                level.volume -= take
                qty -= take
                fills.append(TradeRecord(
                    ts, best, take, side, maker.owner_id, owner_id,
                    maker.order_id, taker_order_id,
                ))
                if maker.qty == 0:
                    queue.popleft()
                    del self._orders[maker.order_id]
            if level.volume == 0:
                del levels[best]
                if opp is Side.BID:
                    prices.pop()
                else:
                    prices.pop(0)
        return fills

    def _rest(self, order: Order) -> None:
        levels = self._levels[order.side]
        level = levels.get(order.price)
        if level is None:
            level = _Level()
            levels[order.price] = level
            insort(self._prices[order.side], order.price)
        level.orders.append(order)
        level.volume += order.qty
        self._orders[order.order_id] = order

    def _release(self, order: Order, qty: int) -> None:
        """Take ``qty`` shares out of the order's level, pruning if emptied."""
        level = self._levels[order.side][order.price]
        level.volume -= qty
        order.qty -= qty
        if level.volume == 0:
            del self._levels[order.side][order.price]
            prices = self._prices[order.side]
            prices.pop(bisect_left(prices, order.price))
