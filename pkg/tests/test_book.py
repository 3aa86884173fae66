"""Order book unit tests: matching semantics, cancels, depth, priority."""

import random

import pytest

from exec_arena.book import (
    DepthSnapshot,
    Order,
    OrderBook,
    OrderRejected,
    Side,
)

from naive_book import NaiveBook


def mk(order_id, side, price, qty, ts=0, owner=1):
    return Order(order_id, owner, side, price, qty, ts)


def seed_asks(book, levels):
    oid = 1000
    for price, qty in levels:
        book.submit_limit(mk(oid, Side.ASK, price, qty, owner=9))
        oid += 1
    return oid


class TestSubmitLimit:
    def test_crossing_buy_walks_levels(self):
        book = OrderBook()
        seed_asks(book, [(10010, 100), (10020, 50)])
        fills, resting = book.submit_limit(mk(1, Side.BID, 10020, 120))
        assert [(f.price, f.qty) for f in fills] == [(10010, 100), (10020, 20)]
        assert resting == 0
        # the 10020 level keeps its unmatched 30 shares
        snap = book.depth_snapshot(0)
        assert snap.ask_prices[0] == 10020
        assert snap.ask_vols[0] == 30

    def test_non_crossing_rests(self):
        book = OrderBook()
        seed_asks(book, [(10010, 100)])
        fills, resting = book.submit_limit(mk(1, Side.BID, 10000, 50))
        assert fills == []
        assert resting == 50
        assert book.best_bid() == 10000

    def test_empty_opposite_side_rests(self):
        book = OrderBook()
        fills, resting = book.submit_limit(mk(1, Side.ASK, 10010, 10))
        assert fills == []
        assert resting == 10

    def test_fills_at_maker_price(self):
        book = OrderBook()
        seed_asks(book, [(10010, 40)])
        fills, _ = book.submit_limit(mk(1, Side.BID, 10100, 40))
        assert fills[0].price == 10010

    def test_rejections(self):
        book = OrderBook()
        with pytest.raises(OrderRejected):
            book.submit_limit(mk(1, Side.BID, 10000, 0))
        with pytest.raises(OrderRejected):
            book.submit_limit(mk(2, Side.BID, 0, 10))
        book.submit_limit(mk(3, Side.BID, 10000, 10))
        with pytest.raises(OrderRejected):
            book.submit_limit(mk(3, Side.BID, 10001, 10))

    def test_fifo_within_level(self):
        book = OrderBook()
        book.submit_limit(mk(1, Side.ASK, 10010, 30, owner=1))
        book.submit_limit(mk(2, Side.ASK, 10010, 30, owner=2))
        fills, _ = book.submit_limit(mk(3, Side.BID, 10010, 40))
        assert [(f.maker_order_id, f.qty) for f in fills] == [(1, 30), (2, 10)]


class TestSubmitMarket:
    def test_walks_book(self):
        book = OrderBook()
        seed_asks(book, [(10010, 100), (10020, 100)])
        fills = book.submit_market(1, Side.BID, 150, ts=5)
        assert [(f.price, f.qty) for f in fills] == [(10010, 100), (10020, 50)]

    def test_empty_book_discards(self):
        book = OrderBook()
        assert book.submit_market(1, Side.BID, 50, ts=0) == []

    def test_exact_consumption_empties_side(self):
        book = OrderBook()
        seed_asks(book, [(10010, 100)])
        fills = book.submit_market(1, Side.BID, 100, ts=0)
        assert [(f.price, f.qty) for f in fills] == [(10010, 100)]
        assert book.best_ask() is None

    def test_remainder_discarded_not_rested(self):
        book = OrderBook()
        seed_asks(book, [(10010, 60)])
        book.submit_market(1, Side.BID, 100, ts=0)
        assert book.best_bid() is None
        assert book.best_ask() is None

    def test_zero_qty_rejected(self):
        book = OrderBook()
        with pytest.raises(OrderRejected):
            book.submit_market(1, Side.BID, 0, ts=0)


class TestCancel:
    def test_full_cancel_returns_qty(self):
        book = OrderBook()
        book.submit_limit(mk(42, Side.BID, 10000, 50))
        before = book.depth_snapshot(0).bid_vols[0]
        qty, found = book.cancel(42)
        assert (qty, found) == (50, True)
        assert before - book.depth_snapshot(0).bid_vols[0] == 50

    def test_idempotent(self):
        book = OrderBook()
        book.submit_limit(mk(42, Side.BID, 10000, 50))
        book.cancel(42)
        assert book.cancel(42) == (0, False)

    def test_cancel_after_partial_fill(self):
        book = OrderBook()
        book.submit_limit(mk(42, Side.ASK, 10010, 100))
        book.submit_market(1, Side.BID, 70, ts=0)
        qty, found = book.cancel(42)
        assert (qty, found) == (30, True)

    def test_level_pruned_when_emptied(self):
        book = OrderBook()
        book.submit_limit(mk(1, Side.BID, 10000, 10))
        book.cancel(1)
        assert book.best_bid() is None

    def test_tombstone_skipped_in_matching(self):
        book = OrderBook()
        book.submit_limit(mk(1, Side.ASK, 10010, 10, owner=1))
        book.submit_limit(mk(2, Side.ASK, 10010, 20, owner=2))
        book.cancel(1)
        fills = book.submit_market(3, Side.BID, 20, ts=0)
        assert [(f.maker_order_id, f.qty) for f in fills] == [(2, 20)]

    def test_reduce(self):
        book = OrderBook()
        book.submit_limit(mk(1, Side.BID, 10000, 50))
        assert book.reduce(1, 20) == 20
        assert book.depth_snapshot(0).bid_vols[0] == 30
        assert book.reduce(1, 100) == 30
        assert book.best_bid() is None
        assert book.reduce(1, 5) == 0


class TestDepthSnapshot:
    def test_empty_book_all_zeros(self):
        snap = OrderBook().depth_snapshot(7)
        assert snap == DepthSnapshot(7, (0,) * 5, (0,) * 5, (0,) * 5, (0,) * 5)

    def test_aggregates_per_level(self):
        book = OrderBook()
        book.submit_limit(mk(1, Side.ASK, 10010, 40))
        book.submit_limit(mk(2, Side.ASK, 10010, 60))
        snap = book.depth_snapshot(0)
        assert snap.ask_prices[0] == 10010
        assert snap.ask_vols[0] == 100

    def test_truncates_to_five_best_first(self):
        book = OrderBook()
        for i in range(7):
            book.submit_limit(mk(i + 1, Side.BID, 10000 - i, 10))
        snap = book.depth_snapshot(0)
        assert snap.bid_prices == (10000, 9999, 9998, 9997, 9996)
        assert snap.bid_vols == (10,) * 5

    def test_mid_and_best(self):
        book = OrderBook()
        book.submit_limit(mk(1, Side.BID, 10000, 10))
        book.submit_limit(mk(2, Side.ASK, 10020, 10))
        snap = book.depth_snapshot(0)
        assert snap.best_bid == 10000
        assert snap.best_ask == 10020
        assert snap.mid == 10010.0


def book_dump(book: OrderBook) -> tuple:
    return tuple(sorted(
        (o.order_id, o.owner_id, int(o.side), o.price, o.qty)
        for o in book.iter_orders()
    ))


def random_ops(rng: random.Random, n_ops: int):
    """Op stream generator shared by the fuzz tests and acceptance."""
    next_id = 1
    live = []
    for _ in range(n_ops):
        r = rng.random()
        if r < 0.55 or not live:
            side = Side.BID if rng.random() < 0.5 else Side.ASK
            base = 10000 if side is Side.BID else 10004
            price = base + rng.randint(-4, 4)
            qty = rng.randint(1, 200)
            yield ("limit", next_id, side, max(price, 1), qty)
            live.append(next_id)
            next_id += 1
        elif r < 0.75:
            side = Side.BID if rng.random() < 0.5 else Side.ASK
            yield ("market", side, rng.randint(1, 300))
        else:
            oid = live.pop(rng.randrange(len(live)))
            if rng.random() < 0.8:
                yield ("cancel", oid)
            else:
                yield ("reduce", oid, rng.randint(1, 100))


def apply_op(book: OrderBook, ref: NaiveBook, op, ts: int):
    """Apply one op to both engines, returning (fills, fills_ref)."""
    kind = op[0]
    if kind == "limit":
        _, oid, side, price, qty = op
        fills, rest = book.submit_limit(Order(oid, 1, side, price, qty, ts))
        rf, rrest = ref.submit_limit(oid, 1, side, price, qty, ts)
        assert rest == rrest
    elif kind == "market":
        _, side, qty = op
        fills = book.submit_market(1, side, qty, ts)
        rf = ref.submit_market(1, side, qty, ts)
    elif kind == "cancel":
        _, oid = op
        res = book.cancel(oid)
        assert res.qty == ref.cancel(oid)
        return [], []
    else:
        _, oid, qty = op
        assert book.reduce(oid, qty) == ref.reduce(oid, qty)
        return [], []
    return fills, rf


def fills_key(fills):
    return [(f.ts, f.price, f.qty, int(f.aggressor_side), f.maker_owner,
             f.taker_owner, f.maker_order_id, f.taker_order_id) for f in fills]


class TestOracleEquivalence:
    def test_random_sequences_match_reference(self):
        rng = random.Random(1234)
        book = OrderBook()
        ref = NaiveBook()
        for ts, op in enumerate(random_ops(rng, 3000)):
            fills, rf = apply_op(book, ref, op, ts)
            assert fills_key(fills) == rf
        assert book_dump(book) == ref.dump()
        bd, ad = ref.depth()
        snap = book.depth_snapshot(0)
        assert (snap.bid_prices, snap.bid_vols) == bd
        assert (snap.ask_prices, snap.ask_vols) == ad


class TestInvariants:
    def test_uncrossed_and_conservation_under_fuzz(self):
        rng = random.Random(99)
        book = OrderBook()
        resting_total = 0
        for ts, op in enumerate(random_ops(rng, 2000)):
            before = book.side_volume(Side.BID) + book.side_volume(Side.ASK)
            kind = op[0]
            if kind == "limit":
                _, oid, side, price, qty = op
                fills, rest = book.submit_limit(Order(oid, 1, side, price, qty, ts))
                filled = sum(f.qty for f in fills)
                after = book.side_volume(Side.BID) + book.side_volume(Side.ASK)
                # incoming qty = filled (consumed both sides) + rested
                assert after == before - filled + rest
                assert filled + rest <= qty
            elif kind == "market":
                _, side, qty = op
                fills = book.submit_market(1, side, qty, ts)
                filled = sum(f.qty for f in fills)
                after = book.side_volume(Side.BID) + book.side_volume(Side.ASK)
                assert after == before - filled
            elif kind == "cancel":
                removed = book.cancel(op[1]).qty
                after = book.side_volume(Side.BID) + book.side_volume(Side.ASK)
                assert after == before - removed
            else:
                removed = book.reduce(op[1], op[2])
                after = book.side_volume(Side.BID) + book.side_volume(Side.ASK)
                assert after == before - removed
            bb, ba = book.best_bid(), book.best_ask()
            if bb is not None and ba is not None:
                assert bb < ba

    def test_price_time_priority_of_fill_lists(self):
        rng = random.Random(7)
        book = OrderBook()
        for ts, op in enumerate(random_ops(rng, 2000)):
            if op[0] == "limit":
                _, oid, side, price, qty = op
                fills, _ = book.submit_limit(Order(oid, 1, side, price, qty, ts))
            elif op[0] == "market":
                fills = book.submit_market(1, op[1], op[2], ts)
            elif op[0] == "cancel":
                book.cancel(op[1])
                continue
            else:
                book.reduce(op[1], op[2])
                continue
            if len(fills) < 2:
                continue
            side = fills[0].aggressor_side
            prices = [f.price for f in fills]
            if side is Side.BID:  # buying: prices never improve for the taker
                assert prices == sorted(prices)
            else:
                assert prices == sorted(prices, reverse=True)
            # within one price, makers are consumed in arrival order
            for a, b in zip(fills, fills[1:]):
                if a.price == b.price:
                    assert a.maker_order_id < b.maker_order_id
