import random

import pytest
from hypothesis import given, settings, strategies as st

from addrtaint import (
    M1,
    M2,
    M3,
    OutputRef,
    SampleCase,
    TaintWindow,
    address_taint_backward,
    address_taint_forward,
    baseline_outputs,
    build_index,
    method4,
    poison_taint,
    run_method,
)
from addrtaint.errors import (
    EmptySeed,
    InvalidWindow,
    MissingKnownCase,
    UnknownMethod,
    UnknownSeedOutput,
    UnknownTxid,
)
from addrtaint.taint import DEFAULT_HORIZON, DEFAULT_LOOKBACK

from conftest import random_chain


# independent oracles over plain transaction lists

def _addr_of(txs):
    return {(tx.txid, v): o.address for tx in txs for v, o in enumerate(tx.outputs)}


def naive_forward(txs, seeds, window, input_sharing=False, output_sharing=False):
    addr_of = _addr_of(txs)
    win = [tx for tx in txs if window.taint_start <= tx.timestamp <= window.taint_end]
    tainted = set(seeds)
    changed = True
    while changed:
        changed = False
        for tx in win:
            ins = {addr_of[i] for i in tx.inputs}
            outs = {o.address for o in tx.outputs}
            new = set()
            if ins & tainted:
                new |= outs
                if input_sharing:
                    new |= ins
            if output_sharing and outs & tainted:
                new |= outs
            if not new <= tainted:
                tainted |= new
                changed = True
    outputs = set()
    for tx in win:
        if not window.count_start <= tx.timestamp <= window.count_end:
            continue
        sends = bool({addr_of[i] for i in tx.inputs} & tainted)
        for v, o in enumerate(tx.outputs):
            if sends or o.address in tainted:
                outputs.add(OutputRef(tx.txid, v))
    return tainted, outputs


def naive_backward(txs, seeds, window):
    addr_of = _addr_of(txs)
    win = [tx for tx in txs if window.taint_start <= tx.timestamp <= window.taint_end]
    tainted = set(seeds)
    changed = True
    while changed:
        changed = False
        for tx in win:
            if {o.address for o in tx.outputs} & tainted:
                ins = {addr_of[i] for i in tx.inputs}
                if not ins <= tainted:
                    tainted |= ins
                    changed = True
    return tainted


def naive_poison(txs, seeds, window):
    win = [tx for tx in txs if window.taint_start <= tx.timestamp <= window.taint_end]
    tainted = set(seeds)
    changed = True
    while changed:
        changed = False
        for tx in win:
            if any(OutputRef(*i) in tainted for i in tx.inputs):
                refs = {OutputRef(tx.txid, v) for v in range(len(tx.outputs))}
                if not refs <= tainted:
                    tainted |= refs
                    changed = True
    times = {tx.txid: tx.timestamp for tx in txs}
    return {r for r in tainted if window.count_start <= times[r.txid] <= window.count_end}


def _refs(ids, *pairs):
    return {OutputRef(ids[label], v) for label, v in pairs}


# window

def test_window_bounds():
    w = TaintWindow(1_000, 200, 300)
    assert (w.taint_start, w.count_start, w.count_end, w.taint_end) == (800, 1_000, 1_300, 1_300)
    b = TaintWindow.backward(1_000, 50)
    assert (b.taint_start, b.taint_end) == (950, 1_000)
    assert TaintWindow(0).lookback == DEFAULT_LOOKBACK and TaintWindow(0).horizon == DEFAULT_HORIZON
    with pytest.raises(InvalidWindow):
        TaintWindow(0, -1, 5)


# baseline

def test_baseline(t1, t1_ids):
    chain, _ = t1
    empty = build_index([])
    assert baseline_outputs(empty, TaintWindow(100)).tainted_outputs == frozenset()
    r = baseline_outputs(chain, TaintWindow(100, 0, 200))
    assert r.tainted_outputs == _refs(t1_ids, ("tx1", 0), ("tx1", 1), ("tx4", 0), ("tx4", 1), ("tx5", 0))
    assert r.tainted_addresses == frozenset()
    assert baseline_outputs(chain, TaintWindow(10_000, 0, 5)).tainted_outputs == frozenset()


# poison

def test_poison_t1_misses_target(t1, t1_ids):
    chain, truth = t1
    r = poison_taint(chain, [OutputRef(t1_ids["tx1"], 0)], TaintWindow(100))
    assert r.tainted_outputs == _refs(t1_ids, ("tx1", 0), ("tx5", 0))
    assert not r.contains_all(truth.deposits[0].targets)


def test_poison_unspent_seed(t1, t1_ids):
    chain, _ = t1
    seed = OutputRef(t1_ids["tx4"], 0)
    assert poison_taint(chain, [seed], TaintWindow(100)).tainted_outputs == {seed}


def test_poison_peel_chain(ledger):
    ledger.coinbase("cb", 0, ("S", 10_000))
    ledger.spend("p1", 10, [("cb", 0)], [("x1", 5_000), ("y1", 4_900)])
    ledger.spend("p2", 20, [("p1", 1)], [("x2", 2_000), ("y2", 2_800)])
    ledger.spend("p3", 30, [("p2", 1)], [("x3", 1_000), ("y3", 1_700)])
    chain = ledger.index()
    r = poison_taint(chain, [ledger.ref("cb")], TaintWindow(5, 10, 100))
    downstream = {ledger.ref(t, v) for t in ("p1", "p2", "p3") for v in (0, 1)}
    assert r.tainted_outputs == downstream
    assert r.tainted_outputs == naive_poison(ledger.txs, [ledger.ref("cb")], TaintWindow(5, 10, 100))


def test_poison_unknown_seed(t1):
    chain, _ = t1
    with pytest.raises(UnknownSeedOutput):
        poison_taint(chain, [OutputRef("0" * 64, 0)], TaintWindow(100))


# forward address taint

def test_forward_isolated_seed(t1):
    chain, _ = t1
    r = address_taint_forward(chain, {"nobody"}, TaintWindow(100))
    assert r.tainted_addresses == {"nobody"}
    assert r.tainted_outputs == frozenset()


def test_forward_t1_m1_finds_target(t1, t1_ids):
    chain, truth = t1
    r = address_taint_forward(chain, {"M_recv"}, TaintWindow(100), M1)
    assert r.tainted_addresses == {"M_recv", "C", "C2", "D", "D2", "B"}
    assert r.tainted_outputs == _refs(t1_ids, ("tx1", 0), ("tx4", 0), ("tx4", 1), ("tx5", 0))
    assert r.contains_all(truth.deposits[0].targets)
    assert r.method == "m1"


def test_forward_t1_m3_adds_output_sharing(t1, t1_ids):
    chain, _ = t1
    r = address_taint_forward(chain, {"M_recv"}, TaintWindow(100), M3)
    assert "A2" in r.tainted_addresses
    assert OutputRef(t1_ids["tx1"], 1) in r.tainted_outputs


def test_forward_t1_needs_lookback(t1):
    # tx3 (t=50) links C to D; without lookback it is outside the window
    chain, truth = t1
    r = address_taint_forward(chain, {"M_recv"}, TaintWindow(100, 0, 300), M1)
    assert "D" not in r.tainted_addresses
    assert not r.contains_all(truth.deposits[0].targets)


def test_coinjoin_m1_vs_m2(ledger):
    ledger.coinbase("fx", 0, ("X", 5_000))
    ledger.coinbase("fy", 0, ("Y", 5_000))
    ledger.spend("join", 10, [("fx", 0), ("fy", 0)], [("P", 4_900), ("Q", 4_900)])
    chain = ledger.index()
    w = TaintWindow(0, 0, 100)
    assert "Y" not in address_taint_forward(chain, {"X"}, w, M1).tainted_addresses
    assert "Y" in address_taint_forward(chain, {"X"}, w, M2).tainted_addresses


def test_forward_empty_seed(t1):
    with pytest.raises(EmptySeed):
        address_taint_forward(t1[0], set(), TaintWindow(100))


# backward

def test_backward_t1(t1):
    chain, _ = t1
    assert address_taint_backward(chain, {"B"}, TaintWindow.backward(200)) == {"B", "D", "C"}


def test_backward_coinbase_funded(t1):
    chain, _ = t1
    assert address_taint_backward(chain, {"A"}, TaintWindow.backward(100)) == {"A"}
    with pytest.raises(EmptySeed):
        address_taint_backward(chain, [], TaintWindow.backward(100))


# method 4

def _two_pool_chain(ledger):
    """Deposits land in pool P_in; withdrawals are paid from pool P_out,
    which is only reachable backward from an earlier known withdrawal."""
    ledger.coinbase("u", 0, ("U", 1_000_000))
    ledger.coinbase("res", 0, ("P_out", 10_000_000))
    ledger.spend("w_old", 100, [("res", 0)], [("K", 300_000), ("P_out", 9_690_000)])
    ledger.spend("dep", 200, [("u", 0)], [("R", 900_000), ("U2", 90_000)])
    ledger.spend("sweep", 250, [("dep", 0)], [("P_in", 890_000)])
    ledger.spend("w_new", 300, [("w_old", 1)], [("T", 880_000), ("P_out", 8_800_000)])
    return ledger.index()


def test_method4_reaches_disjoint_pool(ledger):
    chain = _two_pool_chain(ledger)
    w = TaintWindow(200, 150, 200)
    target = ledger.ref("w_new", 0)
    assert target not in address_taint_forward(chain, {"R"}, w, M3).tainted_outputs
    r = method4(chain, {"K"}, {"R"}, w, TaintWindow.backward(100, 100))
    assert r.method == "m4"
    assert target in r.tainted_outputs


def test_method4_with_pool_equals_m3(ledger):
    chain = _two_pool_chain(ledger)
    w = TaintWindow(200, 150, 200)
    m4 = method4(chain, {"P_out"}, {"R"}, w, TaintWindow.backward(100, 0))
    m3 = address_taint_forward(chain, {"P_out", "R"}, w, M3)
    assert m4.tainted_outputs == m3.tainted_outputs
    assert m4.tainted_addresses == m3.tainted_addresses


def test_method4_empty_backward_degenerates(ledger):
    ledger.coinbase("k", 0, ("K", 1_000))
    ledger.coinbase("u", 0, ("U", 1_000_000))
    ledger.spend("dep", 1_000, [("u", 0)], [("R", 900_000)])
    ledger.spend("out", 1_100, [("dep", 0)], [("Z", 890_000)])
    chain = ledger.index()
    w = TaintWindow(1_000, 0, 500)
    m4 = method4(chain, {"K"}, {"R"}, w, TaintWindow.backward(0, 10))
    m3 = address_taint_forward(chain, {"R"}, w, M3)
    assert m4.tainted_outputs == m3.tainted_outputs
    assert m4.tainted_addresses == m3.tainted_addresses | {"K"}


# run_method

def test_run_method_dispatch(t1):
    chain, truth = t1
    case = truth.cases()[0]
    results = {m: run_method(chain, case, m) for m in ("baseline", "poison", "m1", "m2", "m3")}
    assert not results["poison"].contains_all(case.targets)
    for m in ("m1", "m2", "m3"):
        assert results[m].contains_all(case.targets)
    # the user's change address A2 is not a seed
    assert "A2" not in results["m1"].tainted_addresses
    with pytest.raises(MissingKnownCase):
        run_method(chain, case, "m4")
    with pytest.raises(UnknownMethod):
        run_method(chain, case, "m5")
    bad = SampleCase("x", "T1", ("0" * 64,))
    with pytest.raises(UnknownTxid):
        run_method(chain, bad, "m1")


def test_run_method_horizon_override(t1):
    chain, truth = t1
    case = truth.cases(horizon_days=10)[0]
    assert run_method(chain, case, "baseline").window.horizon == 10 * 86_400


# properties on random chains

windows = st.builds(TaintWindow, st.integers(0, 400), st.integers(0, 200), st.integers(0, 200))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), windows, st.sampled_from([M1, M2, M3]))
def test_worklist_matches_naive_iteration(seed, window, opts):
    txs = random_chain(seed)
    chain = build_index(txs)
    rng = random.Random(seed)
    seeds = set(rng.sample(sorted(chain.addresses()), 2))
    r = address_taint_forward(chain, seeds, window, opts)
    tainted, outputs = naive_forward(txs, seeds, window, opts.input_sharing, opts.output_sharing)
    assert r.tainted_addresses == tainted
    assert r.tainted_outputs == outputs


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), windows)
def test_backward_matches_naive_iteration(seed, window):
    txs = random_chain(seed)
    chain = build_index(txs)
    target = random.Random(seed).choice(sorted(chain.addresses()))
    assert address_taint_backward(chain, {target}, window) == naive_backward(txs, {target}, window)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), windows)
def test_poison_matches_naive_iteration(seed, window):
    txs = random_chain(seed)
    chain = build_index(txs)
    refs = sorted(r for tx in txs for r in tx.output_refs())
    seeds = random.Random(seed).sample(refs, 2)
    assert poison_taint(chain, seeds, window).tainted_outputs == naive_poison(txs, seeds, window)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), windows)
def test_monotone_and_window_restricted(seed, window):
    txs = random_chain(seed, n_tx=80)
    chain = build_index(txs)
    rng = random.Random(seed)
    seed_ref = rng.choice(sorted(r for tx in txs for r in tx.output_refs()))
    seeds = {chain.output(seed_ref).address}
    base = baseline_outputs(chain, window).tainted_outputs
    m1, m2, m3 = (address_taint_forward(chain, seeds, window, o) for o in (M1, M2, M3))
    assert m1.tainted_outputs <= m2.tainted_outputs <= m3.tainted_outputs <= base
    assert poison_taint(chain, [seed_ref], window).tainted_outputs <= m1.tainted_outputs
    for r in (m1, m2, m3):
        for ref in r.tainted_outputs:
            assert window.count_start <= chain.timestamp(ref.txid) <= window.count_end
        # result invariant: each output's address or its tx's sender is tainted
        for ref in r.tainted_outputs:
            tx = chain.tx(ref.txid)
            senders = {chain.output(i).address for i in tx.inputs}
            assert chain.output(ref).address in r.tainted_addresses or senders & r.tainted_addresses
        # termination bound: one worklist pop per tainted address
        incident = set(seeds)
        for p in chain.window_range(window.taint_start, window.taint_end):
            incident |= set(chain.input_addresses[p]) | set(chain.output_addresses[p])
        assert r.iterations <= len(incident)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), windows)
def test_out_of_window_transactions_never_propagate(seed, window):
    txs = random_chain(seed)
    inside = [tx for tx in txs if window.taint_start <= tx.timestamp <= window.taint_end]
    # dropping every transaction outside the window must not change anything,
    # except that outputs created outside it cannot be resolved; keep them as coinbase stubs
    refs = {(i.prev_txid) for tx in inside for i in tx.inputs}
    from addrtaint import Transaction
    stubs = []
    for tx in txs:
        if tx not in inside and tx.txid in refs:
            stubs.append(Transaction(tx.txid, window.taint_start - 1, (), tx.outputs, True))
    full = build_index(txs)
    trimmed = build_index(inside + stubs)
    seeds = set(random.Random(seed).sample(sorted(full.addresses()), 2))
    a = address_taint_forward(full, seeds, window, M3)
    b = address_taint_forward(trimmed, seeds, window, M3)
    assert a.tainted_addresses == b.tainted_addresses
    assert a.tainted_outputs == b.tainted_outputs


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), windows)
def test_forward_backward_duality(seed, window):
    chain = build_index(random_chain(seed, n_tx=30, n_addr=12))
    addrs = sorted(chain.addresses())
    fwd = {a: address_taint_forward(chain, {a}, window, M1).tainted_addresses for a in addrs}
    bwd = {b: address_taint_backward(chain, {b}, window) for b in addrs}
    for a in addrs:
        for b in addrs:
            assert (b in fwd[a]) == (a in bwd[b])
