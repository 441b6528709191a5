"""Transaction-level and address-level taint propagation.

Address tainting is a least fixpoint over the transactions inside a time
window. Temporal order inside the window is ignored on purpose: an address
tainted by a late transaction taints what it sent earlier in the window too.
The fixpoints are computed with a worklist of newly tainted addresses; every
transaction fires each rule at most once, so the work is linear in the size
of the window subgraph.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

from .case import SampleCase, check_case, receiver_addresses, receiver_outputs, seed_time
from .chain import DAY, ChainIndex, OutputRef, clip_positions
from .errors import (
    EmptySeed,
    InvalidWindow,
    MissingKnownCase,
    UnknownMethod,
    UnknownSeedOutput,
)

log = logging.getLogger(__name__)

METHODS = ("baseline", "poison", "m1", "m2", "m3", "m4")

DEFAULT_LOOKBACK = 5 * DAY
DEFAULT_HORIZON = 3 * DAY
DEFAULT_BACKTRACE = 3 * DAY


@dataclass(frozen=True)
class TaintWindow:
    """Propagation and counting bounds around a seed event.

    Propagation uses ``[taint_start, taint_end]``; reported outputs are
    restricted to ``[count_start, count_end]``. Durations are in seconds.
    """
    seed_time: int
    lookback: int = DEFAULT_LOOKBACK
    horizon: int = DEFAULT_HORIZON

    def __post_init__(self):
        if self.lookback < 0 or self.horizon < 0:
            raise InvalidWindow(f"negative window duration: lookback={self.lookback} horizon={self.horizon}")

    @classmethod
    def backward(cls, seed_time: int, backtrace: int = DEFAULT_BACKTRACE) -> "TaintWindow":
        """Window ``[seed_time - backtrace, seed_time]`` for backward tainting."""
        return cls(seed_time, lookback=backtrace, horizon=0)

    @property
    def taint_start(self) -> int:
        return self.seed_time - self.lookback

    @property
    def taint_end(self) -> int:
        return self.seed_time + self.horizon

    @property
    def count_start(self) -> int:
        return self.seed_time

    @property
    def count_end(self) -> int:
        return self.taint_end

    def as_dict(self):
        return {
            "seed_time": self.seed_time,
            "lookback": self.lookback,
            "horizon": self.horizon,
            "taint_start": self.taint_start,
            "taint_end": self.taint_end,
            "count_start": self.count_start,
            "count_end": self.count_end,
        }


@dataclass(frozen=True)
class ClusteringOptions:
    input_sharing: bool = False
    output_sharing: bool = False


M1 = ClusteringOptions(False, False)
M2 = ClusteringOptions(True, False)
M3 = ClusteringOptions(True, True)
METHOD_OPTIONS = {"m1": M1, "m2": M2, "m3": M3}


@dataclass(frozen=True)
class TaintResult:
    method: str
    tainted_addresses: frozenset[str]
    tainted_outputs: frozenset[OutputRef]
    window: TaintWindow
    seed: str = ""
    # filled in by filters.apply_filters
    applied_criteria: tuple[str, ...] | None = None
    dropped: Mapping[OutputRef, str] = field(default_factory=lambda: MappingProxyType({}))
    iterations: int = 0

    @property
    def filtered(self) -> bool:
        return self.applied_criteria is not None

    def contains_all(self, refs: Iterable[OutputRef]) -> bool:
        return all(OutputRef(*r) in self.tainted_outputs for r in refs)


# building blocks shared with the clustering module

def forward_closure(chain: ChainIndex, seeds: Iterable[str], window_range: range,
                    opts: ClusteringOptions = M1):
    """Address fixpoint of the forward rules over `window_range` positions.

    Returns ``(tainted, sending, pops)``: the tainted address set, the
    positions of transactions with a tainted input address, and the number of
    worklist pops (one per tainted address).
    """
    lo, hi = window_range.start, window_range.stop
    ins, outs = chain.input_addresses, chain.output_addresses
    in_pos, out_pos = chain._in_pos, chain._out_pos

    tainted = set(seeds)
    work = list(tainted)
    sending: set[int] = set()
    out_shared: set[int] = set()
    pops = 0
    while work:
        a = work.pop()
        pops += 1
        positions = in_pos.get(a)
        if positions:
            for p in clip_positions(positions, lo, hi):
                if p in sending:
                    continue
                sending.add(p)
                # R1: receivers of a tainted sender
                for b in outs[p]:
                    if b not in tainted:
                        tainted.add(b)
                        work.append(b)
                # R2: co-spenders
                if opts.input_sharing:
                    for b in ins[p]:
                        if b not in tainted:
                            tainted.add(b)
                            work.append(b)
        if opts.output_sharing:
            positions = out_pos.get(a)
            if positions:
                # R3: co-receivers
                for p in clip_positions(positions, lo, hi):
                    if p in out_shared:
                        continue
                    out_shared.add(p)
                    for b in outs[p]:
                        if b not in tainted:
                            tainted.add(b)
                            work.append(b)
    return tainted, sending, pops


def backward_closure(chain: ChainIndex, seeds: Iterable[str], window_range: range):
    """Fixpoint of the reversed receiving rule: senders to tainted addresses."""
    lo, hi = window_range.start, window_range.stop
    ins = chain.input_addresses
    out_pos = chain._out_pos
    tainted = set(seeds)
    work = list(tainted)
    fired: set[int] = set()
    while work:
        a = work.pop()
        positions = out_pos.get(a)
        if not positions:
            continue
        for p in clip_positions(positions, lo, hi):
            if p in fired:
                continue
            fired.add(p)
            for b in ins[p]:
                if b not in tainted:
                    tainted.add(b)
                    work.append(b)
    return tainted



def _count_range(chain: ChainIndex, window: TaintWindow) -> range:
    return chain.window_range(window.count_start, window.count_end)


def _taint_range(chain: ChainIndex, window: TaintWindow) -> range:
    return chain.window_range(window.taint_start, window.taint_end)


# engines

def baseline_outputs(chain: ChainIndex, window: TaintWindow) -> TaintResult:
    """Every output of every transaction in the counting window."""
    txs = chain.transactions
    outputs = frozenset(
        OutputRef(txs[p].txid, vout)
        for p in _count_range(chain, window)
        for vout in range(len(txs[p].outputs)))
    return TaintResult("baseline", frozenset(), outputs, window, seed="all outputs")


def poison_taint(chain: ChainIndex, seed_outputs: Iterable[OutputRef],
                 window: TaintWindow) -> TaintResult:
    """Poison transaction tainting: every output of a transaction that spends
    a tainted output is tainted."""
    seeds = [OutputRef(*r) for r in seed_outputs]
    for ref in seeds:
        try:
            chain.output(ref)
        except KeyError:
            raise UnknownSeedOutput(f"unknown seed output {ref.txid}:{ref.vout}") from None

    taint = _taint_range(chain, window)
    lo, hi = taint.start, taint.stop
    txs = chain.transactions
    tainted = set(seeds)
    work = list(tainted)
    fired: set[int] = set()
    while work:
        ref = work.pop()
        p = chain.spender_position(ref)
        if p is None or p in fired or not lo <= p < hi:
            continue
        fired.add(p)
        tx = txs[p]
        for vout in range(len(tx.outputs)):
            r = OutputRef(tx.txid, vout)
            if r not in tainted:
                tainted.add(r)
                work.append(r)

    count = _count_range(chain, window)
    counted = frozenset(r for r in tainted if chain.position(r.txid) in count)
    return TaintResult("poison", frozenset(), counted, window,
                       seed=_describe_outputs(seeds), iterations=len(fired))


def address_taint_forward(chain: ChainIndex, seed_addresses: Iterable[str],
                          window: TaintWindow, opts: ClusteringOptions = M1,
                          method: str | None = None) -> TaintResult:
    """Forward address taint analysis.

    An output is reported when its transaction has a tainted input address
    (a send by a tainted address) or its own address is tainted, and the
    transaction lies in the counting window.
    """
    seeds = set(seed_addresses)
    if not seeds:
        raise EmptySeed("forward tainting needs at least one seed address")
    tainted, sending, pops = forward_closure(chain, seeds, _taint_range(chain, window), opts)

    count = _count_range(chain, window)
    clo, chi = count.start, count.stop
    positions = {p for p in sending if clo <= p < chi}
    out_pos = chain._out_pos
    for a in tainted:
        ps = out_pos.get(a)
        if ps:
            positions.update(clip_positions(ps, clo, chi))
    txs = chain.transactions
    outputs = set()
    for p in positions:
        tx = txs[p]
        if p in sending:
            outputs.update(OutputRef(tx.txid, v) for v in range(len(tx.outputs)))
        else:
            outputs.update(OutputRef(tx.txid, v) for v, o in enumerate(tx.outputs)
                           if o.address in tainted)

    if method is None:
        method = {M1: "m1", M2: "m2", M3: "m3"}.get(opts, "custom")
    return TaintResult(method, frozenset(tainted), frozenset(outputs), window,
                       seed=_describe_addresses(seeds), iterations=pops)


def address_taint_backward(chain: ChainIndex, seed_addresses: Iterable[str],
                           window: TaintWindow) -> set[str]:
    """Addresses that (transitively) sent to a seed address inside
    ``[window.taint_start, window.taint_end]``, seeds included."""
    seeds = set(seed_addresses)
    if not seeds:
        raise EmptySeed("backward tainting needs at least one seed address")
    return backward_closure(chain, seeds, _taint_range(chain, window))


def method4(chain: ChainIndex, known_withdrawal_addresses: Iterable[str],
            deposit_receivers: Iterable[str], window: TaintWindow,
            backward_window: TaintWindow) -> TaintResult:
    """Backward tainting from a known withdrawal, then Method 3 forward from
    the result together with the target deposit's receiver addresses."""
    known = set(known_withdrawal_addresses)
    behind = address_taint_backward(chain, known, backward_window)
    log.debug("method4: backward stage tainted %d addresses", len(behind))
    seeds = behind | set(deposit_receivers)
    result = address_taint_forward(chain, seeds, window, M3, method="m4")
    return TaintResult("m4", result.tainted_addresses, result.tainted_outputs, window,
                       seed=f"backward from {_describe_addresses(known)}; "
                            f"{result.seed}",
                       iterations=result.iterations)


def case_window(chain: ChainIndex, case: SampleCase, lookback: int = DEFAULT_LOOKBACK,
                horizon: int = DEFAULT_HORIZON) -> TaintWindow:
    return TaintWindow(seed_time(chain, case), lookback, case.horizon_seconds(horizon))


def run_method(chain: ChainIndex, case: SampleCase, method: str, *,
               lookback: int = DEFAULT_LOOKBACK, horizon: int = DEFAULT_HORIZON,
               backtrace: int = DEFAULT_BACKTRACE) -> TaintResult:
    """Run one method on a sample case.

    Address methods are seeded with the receiver addresses of the deposits;
    poison with the receiver outputs. `horizon` is the fallback when the case
    has no horizon of its own.
    """
    if method not in METHODS:
        raise UnknownMethod(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    check_case(chain, case)
    window = case_window(chain, case, lookback, horizon)

    if method == "baseline":
        return baseline_outputs(chain, window)
    if method == "poison":
        return poison_taint(chain, receiver_outputs(chain, case), window)
    receivers = receiver_addresses(chain, case)
    if method in METHOD_OPTIONS:
        return address_taint_forward(chain, receivers, window, METHOD_OPTIONS[method], method=method)

    if not case.known_withdrawals:
        raise MissingKnownCase(f"case {case.case_id}: method m4 needs a known prior withdrawal")
    known_addrs = {chain.output(r).address for r in case.known_withdrawals}
    known_time = max(chain.timestamp(r.txid) for r in case.known_withdrawals)
    return method4(chain, known_addrs, receivers, window,
                   TaintWindow.backward(known_time, backtrace))


def _describe_addresses(addrs, limit=5):
    addrs = sorted(addrs)
    text = ",".join(addrs[:limit])
    if len(addrs) > limit:
        text += f",... ({len(addrs)} addresses)"
    return f"addresses {text}"


def _describe_outputs(refs, limit=5):
    refs = sorted(refs)
    text = ",".join(f"{t}:{v}" for t, v in refs[:limit])
    if len(refs) > limit:
        text += f",... ({len(refs)} outputs)"
    return f"outputs {text}"
