"""Historical-style message ingestion and seedable synthetic order flow.

The on-disk format is a plain CSV with header
``ts_ns,kind,order_id,side,price_ticks,qty`` (ASCII, LF line endings, no
quoting), one row per order-book message. Executions are not a record kind:
trades emerge from matching when the stream is applied, so replayed flow
interacts correctly with any agent orders resting in the same book.

The synthetic generator stands in for a real exchange feed. It simulates
Poisson limit/market/cancel flows against a live shadow book, so every
CANCEL references an id that was actually resting at generation time and
the mid price follows the emergent book state.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, TextIO, Tuple, Union

import numpy as np

from .book import Order, OrderBook, Side
from .kernel import Cancel, Kernel, NewLimit

CSV_HEADER = "ts_ns,kind,order_id,side,price_ticks,qty"
_KINDS = ("ADD", "CANCEL", "REDUCE")
_SIDES = ("B", "A")


class MessageFormatError(ValueError):
    """Malformed message file; carries the offending 1-based line number."""

    def __init__(self, line_no: int, reason: str) -> None:
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


@dataclass(slots=True)
class MessageRecord:
    ts: int
    kind: str  # ADD | CANCEL | REDUCE
    order_id: int
    side: str  # B | A
    price: int
    qty: int


def parse_messages(stream: Union[str, TextIO, Iterable[str]]) -> List[MessageRecord]:
    """Parse a message CSV; raises MessageFormatError with the line number."""
    if isinstance(stream, str):
        lines: Iterable[str] = io.StringIO(stream)
    else:
        lines = stream
    records: List[MessageRecord] = []
    last_ts = -1
    line_no = 0
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if line_no == 1:
            if line != CSV_HEADER:
                raise MessageFormatError(1, f"expected header {CSV_HEADER!r}")
            continue
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise MessageFormatError(line_no, f"expected 6 fields, got {len(parts)}")
        try:
            ts = int(parts[0])
            order_id = int(parts[2])
            price = int(parts[4])
            qty = int(parts[5])
        except ValueError as exc:
            raise MessageFormatError(line_no, f"bad integer field: {exc}") from None
        kind = parts[1]
        side = parts[3]
        if kind not in _KINDS:
            raise MessageFormatError(line_no, f"unknown kind {kind!r}")
        if side not in _SIDES:
            raise MessageFormatError(line_no, f"unknown side {side!r}")
        if ts < last_ts:
            raise MessageFormatError(line_no, f"timestamp {ts} decreases")
        if kind == "ADD" and (qty <= 0 or price <= 0):
            raise MessageFormatError(line_no, "ADD requires positive price and qty")
        if kind == "REDUCE" and qty <= 0:
            raise MessageFormatError(line_no, "REDUCE requires positive qty")
        last_ts = ts
        records.append(MessageRecord(ts, kind, order_id, side, price, qty))
    if line_no == 0:
        raise MessageFormatError(1, "empty file (header row required)")
    return records


def serialize_messages(records: Iterable[MessageRecord]) -> str:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for r in records:
        out.write(f"{r.ts},{r.kind},{r.order_id},{r.side},{r.price},{r.qty}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# synthetic order flow
# ---------------------------------------------------------------------------


@dataclass
class SyntheticConfig:
    seed: int = 0
    duration_ns: int = 3_600_000_000_000  # one hour
    limit_rate: float = 5.0     # limit arrivals per second, per side
    market_rate: float = 0.5    # market arrivals per second, per side
    cancel_rate: float = 0.05   # per resting order, per second
    size_mean: float = 100.0    # geometric order size
    level_decay: float = 0.5    # P(k ticks away from touch) ~ decay^k
    init_mid: int = 10_000      # ticks
    init_depth: int = 500       # shares per seeded level

    def validate(self) -> None:
        if min(self.limit_rate, self.market_rate, self.cancel_rate) < 0:
            raise ValueError("rates must be non-negative")
        if self.size_mean < 1:
            raise ValueError("size_mean must be >= 1")
        if not 0 <= self.level_decay < 1:
            raise ValueError("level_decay must be in [0, 1)")
        if self.init_mid < 6 or self.init_depth <= 0 or self.duration_ns < 0:
            raise ValueError("bad initial book configuration")


def generate_synthetic_day(cfg: SyntheticConfig) -> List[MessageRecord]:
    """Deterministic per seed. Seeds a 5-level book, then Poisson flows.

    Market orders are emitted as marketable ADDs priced at the opposite
    touch: applied to a book they consume that level, with any remainder
    resting there, so price impact is visible in the generated stream.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    book = OrderBook()
    records: List[MessageRecord] = []
    live: List[int] = []  # ids believed resting; pruned lazily
    next_id = 1
    stale = 0

    def emit_add(ts: int, side: str, price: int, qty: int) -> None:
        nonlocal next_id, stale
        oid = next_id
        next_id += 1
        records.append(MessageRecord(ts, "ADD", oid, side, price, qty))
        bside = Side.BID if side == "B" else Side.ASK
        fills, resting = book.submit_limit(Order(oid, 0, bside, price, qty, ts))
        stale += len(fills)  # consumed makers leave stale entries in `live`
        if resting > 0:
            live.append(oid)

    for i in range(5):
        emit_add(0, "B", cfg.init_mid - 1 - i, cfg.init_depth)
    for i in range(5):
        emit_add(0, "A", cfg.init_mid + 1 + i, cfg.init_depth)

    def sample_size() -> int:
        if cfg.size_mean <= 1:
            return 1
        return int(rng.geometric(1.0 / cfg.size_mean))

    def sample_offset() -> int:
        if cfg.level_decay <= 0:
            return 0
        return int(rng.geometric(1.0 - cfg.level_decay)) - 1

    t = 0.0
    duration = float(cfg.duration_ns)
    lim = cfg.limit_rate * 1e-9 * 2
    mkt = cfg.market_rate * 1e-9 * 2
    while True:
        cxl = cfg.cancel_rate * 1e-9 * len(live)
        total = lim + mkt + cxl
        if total <= 0:
            break
        t += rng.exponential(1.0 / total)
        if t > duration:
            break
        ts = int(t)
        u = rng.random() * total
        if u < lim:
            is_bid = rng.random() < 0.5
            k = sample_offset()
            if is_bid:
                ask = book.best_ask()
                anchor = (ask - 1) if ask is not None else cfg.init_mid - 1
                price = max(anchor - k, 1)
                emit_add(ts, "B", price, sample_size())
            else:
                bid = book.best_bid()
                anchor = (bid + 1) if bid is not None else cfg.init_mid + 1
                price = anchor + k
                emit_add(ts, "A", price, sample_size())
        elif u < lim + mkt:
            is_buy = rng.random() < 0.5
            touch = book.best_ask() if is_buy else book.best_bid()
            if touch is None:
                continue  # nothing to hit; skip this arrival
            emit_add(ts, "B" if is_buy else "A", touch, sample_size())
        else:
            if not live:
                continue
            idx = int(rng.integers(len(live)))
            oid = live[idx]
            order = book.get_order(oid)
            if order is None:
                live[idx] = live[-1]
                live.pop()
                stale += 1
                continue
            live[idx] = live[-1]
            live.pop()
            side = "B" if order.side is Side.BID else "A"
            records.append(MessageRecord(ts, "CANCEL", oid, side, 0, 0))
            book.cancel(oid)
        if stale > 1000:
            live[:] = [oid for oid in live if book.get_order(oid) is not None]
            stale = 0
    return records


# ---------------------------------------------------------------------------
# replay agent
# ---------------------------------------------------------------------------


class ReplayAgent:
    """Feeds a recorded message stream to the exchange at record timestamps.

    Registered with the kernel as an event source, so records are pulled on
    demand instead of being queued up front. Historical order ids are mapped
    to fresh exchange ids; CANCEL/REDUCE of ids that are unknown (or already
    consumed by other agents' flow) are skipped and counted.
    """

    def __init__(self, exchange_id: int, records: List[MessageRecord]) -> None:
        self.agent_id = -1
        self.exchange_id = exchange_id
        self.records = records
        self.cursor = 0
        self.id_map: Dict[int, int] = {}
        self.skipped_cancels = 0

    def next_event_ts(self) -> Optional[int]:
        if self.cursor >= len(self.records):
            return None
        return self.records[self.cursor].ts

    def emit_next(self, kernel: Kernel) -> None:
        rec = self.records[self.cursor]
        self.cursor += 1
        if rec.kind == "ADD":
            oid = kernel.new_order_id()
            self.id_map[rec.order_id] = oid
            side = Side.BID if rec.side == "B" else Side.ASK
            kernel.send(self.agent_id, self.exchange_id,
                        NewLimit(oid, side, rec.price, rec.qty))
        else:
            oid = self.id_map.get(rec.order_id)
            if oid is None:
                self.skipped_cancels += 1
                return
            qty = None if rec.kind == "CANCEL" else rec.qty
            kernel.send(self.agent_id, self.exchange_id, Cancel(oid, qty))

    def on_message(self, kernel: Kernel, msg) -> None:  # pragma: no cover
        raise TypeError("replay agent expects no inbound messages")
