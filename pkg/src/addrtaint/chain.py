"""UTXO ledger records and the read-only index every engine queries.

Transactions carry their own timestamp (no block structure). Values are
integer satoshis. Addresses are opaque strings.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple

from .errors import (
    CoinbaseHasNoFee,
    DanglingInputRef,
    DoubleSpend,
    DuplicateTxid,
    InvalidTransaction,
    UnknownTxid,
    ValueNotConserved,
)

DAY = 86_400


class TxInput(NamedTuple):
    prev_txid: str
    prev_vout: int


class TxOutput(NamedTuple):
    address: str
    value: int


class OutputRef(NamedTuple):
    txid: str
    vout: int


@dataclass(frozen=True, slots=True)
class Transaction:
    txid: str
    timestamp: int
    inputs: tuple[TxInput, ...] = ()
    outputs: tuple[TxOutput, ...] = ()
    is_coinbase: bool = False

    def __post_init__(self):
        # accept lists / plain tuples from callers
        object.__setattr__(self, "inputs", tuple(TxInput(*i) for i in self.inputs))
        object.__setattr__(self, "outputs", tuple(TxOutput(*o) for o in self.outputs))
        if not self.txid:
            raise InvalidTransaction("empty txid")
        if self.is_coinbase and self.inputs:
            raise InvalidTransaction(f"{self.txid}: coinbase transaction has inputs")
        if not self.is_coinbase and not self.inputs:
            raise InvalidTransaction(f"{self.txid}: non-coinbase transaction without inputs")
        for i in self.inputs:
            if type(i.prev_vout) is not int or i.prev_vout < 0:
                raise InvalidTransaction(f"{self.txid}: bad input index {i.prev_vout!r}")
        for vout, o in enumerate(self.outputs):
            if not isinstance(o.address, str) or not o.address:
                raise InvalidTransaction(f"{self.txid}:{vout}: empty address")
            if type(o.value) is not int or o.value <= 0:
                raise InvalidTransaction(f"{self.txid}:{vout}: output value must be a positive integer")

    def output_refs(self):
        return [OutputRef(self.txid, vout) for vout in range(len(self.outputs))]


def _distinct(items):
    return tuple(dict.fromkeys(items))


class ChainIndex:
    """Immutable multi-index over a validated chain.

    Transactions are kept in canonical ``(timestamp, txid)`` order and most
    per-transaction data is addressed by position in that order, which makes
    a time window a contiguous position range.
    """

    __slots__ = (
        "transactions", "times", "_pos", "_spender", "spender_of",
        "input_addresses", "output_addresses", "fees",
        "_in_pos", "_out_pos", "input_use_count",
    )

    def __init__(self, transactions, times, pos, spender, input_addresses,
                 output_addresses, fees, in_pos, out_pos):
        self.transactions: tuple[Transaction, ...] = transactions
        self.times: tuple[int, ...] = times
        self._pos: dict[str, int] = pos
        self._spender: dict[OutputRef, str] = spender
        self.spender_of: Mapping[OutputRef, str] = MappingProxyType(spender)
        self.input_addresses: tuple[tuple[str, ...], ...] = input_addresses
        self.output_addresses: tuple[tuple[str, ...], ...] = output_addresses
        self.fees: tuple[int | None, ...] = fees
        self._in_pos: dict[str, tuple[int, ...]] = in_pos
        self._out_pos: dict[str, tuple[int, ...]] = out_pos
        self.input_use_count: Mapping[str, int] = MappingProxyType(
            {a: len(p) for a, p in in_pos.items()})

    def __len__(self):
        return len(self.transactions)

    def __contains__(self, txid):
        return txid in self._pos

    def __setattr__(self, name, value):
        if hasattr(self, "input_use_count"):
            raise AttributeError("ChainIndex is immutable")
        object.__setattr__(self, name, value)

    # lookups

    def position(self, txid: str) -> int:
        try:
            return self._pos[txid]
        except KeyError:
            raise UnknownTxid(f"unknown txid {txid}") from None

    def tx(self, txid: str) -> Transaction:
        return self.transactions[self.position(txid)]

    def output(self, ref: OutputRef) -> TxOutput:
        pos = self._pos.get(ref[0])
        if pos is None:
            raise DanglingInputRef(f"no transaction {ref[0]}")
        outputs = self.transactions[pos].outputs
        if not 0 <= ref[1] < len(outputs):
            raise DanglingInputRef(f"{ref[0]} has no output {ref[1]}")
        return outputs[ref[1]]

    def timestamp(self, txid: str) -> int:
        return self.times[self.position(txid)]

    def addresses(self) -> set[str]:
        return set(self._in_pos) | set(self._out_pos)

    def input_txids(self, address: str) -> list[str]:
        """Transactions spending from `address`, chronological."""
        return [self.transactions[p].txid for p in self._in_pos.get(address, ())]

    def output_txids(self, address: str) -> list[str]:
        """Transactions paying `address`, chronological."""
        return [self.transactions[p].txid for p in self._out_pos.get(address, ())]

    def input_positions(self, address: str, lo: int = 0, hi: int | None = None):
        return clip_positions(self._in_pos.get(address, ()), lo, hi)

    def output_positions(self, address: str, lo: int = 0, hi: int | None = None):
        return clip_positions(self._out_pos.get(address, ()), lo, hi)

    def window_range(self, start: int, end: int) -> range:
        """Positions of transactions with ``start <= timestamp <= end``."""
        lo = bisect.bisect_left(self.times, start)
        hi = bisect.bisect_right(self.times, end)
        return range(lo, max(lo, hi))

    def spender_position(self, ref: OutputRef) -> int | None:
        txid = self._spender.get(ref)
        return None if txid is None else self._pos[txid]


def clip_positions(positions, lo, hi=None):
    """Sub-sequence of sorted `positions` lying in ``[lo, hi)``."""
    i = bisect.bisect_left(positions, lo)
    j = len(positions) if hi is None else bisect.bisect_left(positions, hi, i)
    if i == 0 and j == len(positions):
        return positions
    return positions[i:j]


def build_index(transactions: Iterable[Transaction]) -> ChainIndex:
    """Validate a chain and build its index.

    The result does not depend on the order of `transactions`.

    Raises DuplicateTxid, DanglingInputRef, DoubleSpend or ValueNotConserved.
    """
    ordered = sorted(transactions, key=lambda t: (t.timestamp, t.txid))
    pos: dict[str, int] = {}
    for i, tx in enumerate(ordered):
        if tx.txid in pos:
            raise DuplicateTxid(f"duplicate txid {tx.txid}")
        pos[tx.txid] = i

    spender: dict[OutputRef, str] = {}
    input_addresses = []
    output_addresses = []
    fees = []
    in_pos: dict[str, list[int]] = {}
    out_pos: dict[str, list[int]] = {}

    for i, tx in enumerate(ordered):
        in_addrs = []
        in_value = 0
        for prev_txid, prev_vout in tx.inputs:
            j = pos.get(prev_txid)
            if j is None:
                raise DanglingInputRef(f"{tx.txid} spends unknown transaction {prev_txid}")
            prev_outputs = ordered[j].outputs
            if prev_vout >= len(prev_outputs):
                raise DanglingInputRef(f"{tx.txid} spends missing output {prev_txid}:{prev_vout}")
            ref = OutputRef(prev_txid, prev_vout)
            if ref in spender:
                raise DoubleSpend(f"{prev_txid}:{prev_vout} spent by both {spender[ref]} and {tx.txid}")
            spender[ref] = tx.txid
            out = prev_outputs[prev_vout]
            in_addrs.append(out.address)
            in_value += out.value

        out_value = sum(o.value for o in tx.outputs)
        if tx.is_coinbase:
            fees.append(None)
        else:
            if in_value < out_value:
                raise ValueNotConserved(
                    f"{tx.txid}: outputs ({out_value}) exceed inputs ({in_value})")
            fees.append(in_value - out_value)

        ins = _distinct(in_addrs)
        outs = _distinct(o.address for o in tx.outputs)
        input_addresses.append(ins)
        output_addresses.append(outs)
        for a in ins:
            in_pos.setdefault(a, []).append(i)
        for a in outs:
            out_pos.setdefault(a, []).append(i)

    return ChainIndex(
        transactions=tuple(ordered),
        times=tuple(t.timestamp for t in ordered),
        pos=pos,
        spender=spender,
        input_addresses=tuple(input_addresses),
        output_addresses=tuple(output_addresses),
        fees=tuple(fees),
        in_pos={a: tuple(p) for a, p in in_pos.items()},
        out_pos={a: tuple(p) for a, p in out_pos.items()},
    )


def resolve_input_address(chain: ChainIndex, txin: TxInput) -> str:
    """Address of the output that `txin` spends."""
    return chain.output(OutputRef(*txin)).address


def transaction_fee(chain: ChainIndex, txid: str) -> int:
    fee = chain.fees[chain.position(txid)]
    if fee is None:
        raise CoinbaseHasNoFee(f"{txid} is a coinbase transaction")
    return fee
