"""Benchmark program generators.

Two workload families, both emitted as pre-generated operation traces so a
program is a pure function of (params, seed): a chained hash map with
lookup/insert/remove transactions, and a reduced TPC-C-style order-entry
mix over warehouse/district/customer/stock/order tables.  Every logical
record sits on its own cache line, so transactional footprints are exactly
the number of records touched and capacity pressure is driven by structure
sizes, not layout accidents.

Write values are unique nonzero tokens per thread so history checkers can
attribute any observed value to the attempt that produced it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .htm import LINE_SHIFT, Topology
from .program import Backend, Program, RetryPolicy, TxBody

HASH_BUCKETS = {"low": 1000, "high": 10}
CHAIN_NODES = {"short": 50, "large": 200}

# percent of (stock_level, delivery, order_status, payment, new_order)
TPCC_MIXES = {
    "standard": (4, 4, 4, 43, 45),
    "read_dominated": (4, 4, 80, 4, 8),
}
REMOTE_PAYMENT_PCT = 15

N_DISTRICTS = 10
# must exceed the order-status scan span (up to 80 distinct rows)
CUSTOMERS_PER_DISTRICT = 100
STOCK_PER_WAREHOUSE = 100
N_ITEMS = 100
ORDERS_PER_DISTRICT = 30
LINES_PER_ORDER = 10
DELIVERY_DISTRICTS = 3


class _Alloc:
    """Hands out fresh cache-line base addresses; line 0 stays reserved."""

    def __init__(self) -> None:
        self._next = 1

    def line(self) -> int:
        addr = self._next << LINE_SHIFT
        self._next += 1
        return addr

    def lines(self, n: int) -> list:
        return [self.line() for _ in range(n)]


class _Tokens:
    def __init__(self, tid: int) -> None:
        self._tid = tid
        self._seq = 0

    def next(self) -> int:
        self._seq += 1
        return (self._tid << 40) | self._seq


@dataclass(frozen=True)
class HashmapParams:
    n_threads: int = 8
    smt_level: int = 1
    contention: str = "low"    # low: 1000 buckets, high: 10
    footprint: str = "short"   # short: 50-node chains, large: 200
    ro_pct: int = 90
    ops_per_thread: int = 1000
    seed: int = 1

    def __post_init__(self) -> None:
        if self.contention not in HASH_BUCKETS:
            raise ValueError(f"contention must be one of {sorted(HASH_BUCKETS)}")
        if self.footprint not in CHAIN_NODES:
            raise ValueError(f"footprint must be one of {sorted(CHAIN_NODES)}")
        if not 0 <= self.ro_pct <= 100:
            raise ValueError("ro_pct must be in 0..100")


@dataclass(frozen=True)
class TpccParams:
    n_threads: int = 8
    smt_level: int = 1
    contention: str = "low"    # low: one warehouse per thread, high: one total
    mix: str = "standard"
    ops_per_thread: int = 400
    seed: int = 1

    def __post_init__(self) -> None:
        if self.mix not in TPCC_MIXES:
            raise ValueError(f"mix must be one of {sorted(TPCC_MIXES)}")
        if self.contention not in ("low", "high"):
            raise ValueError("contention must be low or high")


def _thread_rng(seed: int, tid: int) -> random.Random:
    return random.Random(seed * 1_000_003 + tid)


def hashmap_program(
    params: HashmapParams,
    backend: Backend = Backend.SI_HTM,
    max_retries: int = 5,
) -> Program:
    """Chained hash map: lookups traverse a bucket chain node by node up to
    the target element; updates traverse and then relink.  A remove follows
    every insert on the same thread so the map size stays put."""
    buckets = HASH_BUCKETS[params.contention]
    chain_len = CHAIN_NODES[params.footprint]
    alloc = _Alloc()
    chains = [alloc.lines(chain_len) for _ in range(buckets)]
    spare = alloc.lines(params.n_threads)  # per-thread free node for inserts

    threads = []
    for tid in range(params.n_threads):
        rng = _thread_rng(params.seed, tid)
        tokens = _Tokens(tid)
        bodies = []
        last_was_insert = False
        for _ in range(params.ops_per_thread):
            b = rng.randrange(buckets)
            target = rng.randrange(chain_len)
            walk = [("r", chains[b][j]) for j in range(target + 1)]
            if rng.randrange(100) < params.ro_pct:
                bodies.append(TxBody(tuple(walk), is_ro=True, label="lookup"))
                continue
            if last_was_insert:
                # unlink the target by rewriting its predecessor
                prev = chains[b][max(target - 1, 0)]
                ops = walk + [("w", prev, tokens.next())]
                label = "remove"
            else:
                ops = walk + [
                    ("w", spare[tid], tokens.next()),
                    ("w", chains[b][target], tokens.next()),
                ]
                label = "insert"
            last_was_insert = not last_was_insert
            bodies.append(TxBody(tuple(ops), label=label))
        threads.append(tuple(bodies))

    return Program(
        threads=tuple(threads),
        topology=Topology(params.n_threads, params.smt_level),
        backend=backend,
        retry=RetryPolicy(max_retries),
        name=f"hashmap-{params.footprint}-ro{params.ro_pct}-{params.contention}",
    )


class _TpccLayout:
    """Per-warehouse tables, one line per logical record."""

    def __init__(self, warehouses: int, alloc: _Alloc) -> None:
        self.items = alloc.lines(N_ITEMS)
        self.w_ytd = []
        self.d_next_oid = []
        self.d_ytd = []
        self.no_ptr = []
        self.customers = []
        self.stock = []
        self.order_hdr = []
        self.order_line = []
        for _ in range(warehouses):
            self.w_ytd.append(alloc.line())
            self.d_next_oid.append(alloc.lines(N_DISTRICTS))
            self.d_ytd.append(alloc.lines(N_DISTRICTS))
            self.no_ptr.append(alloc.lines(N_DISTRICTS))
            self.customers.append(
                [alloc.lines(CUSTOMERS_PER_DISTRICT) for _ in range(N_DISTRICTS)]
            )
            self.stock.append(alloc.lines(STOCK_PER_WAREHOUSE))
            self.order_hdr.append(
                [alloc.lines(ORDERS_PER_DISTRICT) for _ in range(N_DISTRICTS)]
            )
            self.order_line.append(
                [
                    [alloc.lines(LINES_PER_ORDER) for _ in range(ORDERS_PER_DISTRICT)]
                    for _ in range(N_DISTRICTS)
                ]
            )


def _tpcc_body(kind: int, lay: _TpccLayout, w: int, n_wh: int, rng, tokens):
    d = rng.randrange(N_DISTRICTS)
    if kind == 0:  # stock-level: read-only scan of recent orders' stock
        ops = [("r", lay.d_next_oid[w][d])]
        for _ in range(20):
            o = rng.randrange(ORDERS_PER_DISTRICT)
            ops.append(("r", lay.order_line[w][d][o][rng.randrange(LINES_PER_ORDER)]))
            ops.append(("r", lay.stock[w][rng.randrange(STOCK_PER_WAREHOUSE)]))
        return TxBody(tuple(ops), is_ro=True, label="stock_level")
    if kind == 1:  # delivery: drain oldest order in several districts
        ops = []
        for k in range(DELIVERY_DISTRICTS):
            dd = (d + k) % N_DISTRICTS
            o = rng.randrange(ORDERS_PER_DISTRICT)
            ops.append(("r", lay.no_ptr[w][dd]))
            ops.append(("w", lay.no_ptr[w][dd], tokens.next()))
            ops.append(("r", lay.order_hdr[w][dd][o]))
            ops.append(("w", lay.order_hdr[w][dd][o], tokens.next()))
            c = lay.customers[w][dd][rng.randrange(CUSTOMERS_PER_DISTRICT)]
            ops.append(("r", c))
            ops.append(("w", c, tokens.next()))
            for j in range(5):
                ops.append(("w", lay.order_line[w][dd][o][j], tokens.next()))
        return TxBody(tuple(ops), label="delivery")
    if kind == 2:  # order-status: read-only last-name scan plus order read
        # the scan covers a contiguous run of distinct customer rows
        scan = rng.randrange(40, 81)
        start = rng.randrange(CUSTOMERS_PER_DISTRICT - scan + 1)
        ops = [("r", lay.customers[w][d][start + i]) for i in range(scan)]
        o = rng.randrange(ORDERS_PER_DISTRICT)
        ops.append(("r", lay.order_hdr[w][d][o]))
        for j in range(LINES_PER_ORDER):
            ops.append(("r", lay.order_line[w][d][o][j]))
        return TxBody(tuple(ops), is_ro=True, label="order_status")
    if kind == 3:  # payment: home or remote customer, hot warehouse total
        cw = w
        if rng.randrange(100) < REMOTE_PAYMENT_PCT:
            cw = rng.randrange(n_wh)
        c = lay.customers[cw][d][rng.randrange(CUSTOMERS_PER_DISTRICT)]
        ops = [
            ("w", lay.w_ytd[w], tokens.next()),
            ("r", lay.d_ytd[w][d]),
            ("w", lay.d_ytd[w][d], tokens.next()),
            ("r", c),
            ("w", c, tokens.next()),
        ]
        return TxBody(tuple(ops), label="payment")
    # new-order: allocate an order slot, touch item/stock pairs
    n_items = rng.randrange(5, 16)
    o = rng.randrange(ORDERS_PER_DISTRICT)
    ops = [
        ("r", lay.d_next_oid[w][d]),
        ("w", lay.d_next_oid[w][d], tokens.next()),
        ("r", lay.customers[w][d][rng.randrange(CUSTOMERS_PER_DISTRICT)]),
        ("w", lay.order_hdr[w][d][o], tokens.next()),
    ]
    for j in range(n_items):
        i = rng.randrange(N_ITEMS)
        s = rng.randrange(STOCK_PER_WAREHOUSE)
        ops.append(("r", lay.items[i]))
        ops.append(("r", lay.stock[w][s]))
        ops.append(("w", lay.stock[w][s], tokens.next()))
        ops.append(("w", lay.order_line[w][d][o][j % LINES_PER_ORDER], tokens.next()))
    return TxBody(tuple(ops), label="new_order")


def tpcc_lite_program(
    params: TpccParams,
    backend: Backend = Backend.SI_HTM,
    max_retries: int = 5,
) -> Program:
    """Order-entry mix at reduced scale: five transaction types drawn per
    thread from the mix percentages, each thread homed on a warehouse."""
    n_wh = params.n_threads if params.contention == "low" else 1
    lay = _TpccLayout(n_wh, _Alloc())
    weights = TPCC_MIXES[params.mix]

    threads = []
    for tid in range(params.n_threads):
        rng = _thread_rng(params.seed, tid)
        tokens = _Tokens(tid)
        home = tid % n_wh
        bodies = []
        for _ in range(params.ops_per_thread):
            kind = rng.choices(range(5), weights=weights)[0]
            bodies.append(_tpcc_body(kind, lay, home, n_wh, rng, tokens))
        threads.append(tuple(bodies))

    return Program(
        threads=tuple(threads),
        topology=Topology(params.n_threads, params.smt_level),
        backend=backend,
        retry=RetryPolicy(max_retries),
        name=f"tpcc-{params.mix}-{params.contention}",
    )
