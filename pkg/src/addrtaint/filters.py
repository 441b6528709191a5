"""Withdrawal filtering criteria and their per-service calibration.

Each criterion is a predicate over a candidate output. A calibration enables
a subset of them; `apply_filters` keeps the outputs passing every enabled
criterion and records, for each dropped output, the first criterion that
rejected it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from types import MappingProxyType
from typing import Iterable, Literal

from .case import SampleCase, deposit_value as case_deposit_value
from .chain import ChainIndex, OutputRef
from .errors import DisabledCriterion, NegativeFee, UnknownShapeKeyword
from .taint import TaintResult

CRITERIA = ("c1", "c2", "c3", "c4", "c5")
SHAPE_KEYWORDS = ("one-to-one", "one-to-two", "one-to-many", "any")


@dataclass(frozen=True)
class MixingFee:
    """Service fee: a percentage in basis points, or a flat amount in satoshis."""
    kind: Literal["percent", "flat"]
    amount: int

    def __post_init__(self):
        if self.kind not in ("percent", "flat"):
            raise ValueError(f"unknown fee kind {self.kind!r}")
        if self.amount < 0:
            raise NegativeFee(f"negative mixing fee {self.amount}")
        if self.kind == "percent" and self.amount > 10_000:
            raise ValueError(f"fee above 100%: {self.amount} bp")

    @classmethod
    def percent(cls, basis_points: int) -> "MixingFee":
        return cls("percent", basis_points)

    @classmethod
    def flat(cls, satoshis: int) -> "MixingFee":
        return cls("flat", satoshis)

    def max_withdrawal(self, deposit: int) -> int:
        if self.kind == "percent":
            return deposit * (10_000 - self.amount) // 10_000
        return deposit - self.amount

    def __str__(self):
        if self.kind == "flat":
            return f"{self.amount} sat"
        whole, frac = divmod(self.amount, 100)
        return f"{whole}.{frac:02d}".rstrip("0").rstrip(".") + "%"


@dataclass(frozen=True)
class ShapePattern:
    """Input/output count pattern; ``None`` means any count."""
    keyword: str
    inputs: int | None
    outputs: int | None = None
    min_outputs: int | None = None

    @classmethod
    def from_keyword(cls, keyword: str, many_threshold: int = 2) -> "ShapePattern":
        if keyword == "one-to-one":
            return cls(keyword, 1, 1)
        if keyword == "one-to-two":
            return cls(keyword, 1, 2)
        if keyword == "one-to-many":
            return cls(keyword, 1, None, many_threshold)
        if keyword == "any":
            return cls(keyword, None)
        raise UnknownShapeKeyword(f"unknown shape keyword {keyword!r}")

    def matches(self, n_inputs: int, n_outputs: int) -> bool:
        if self.inputs is not None and n_inputs != self.inputs:
            return False
        if self.outputs is not None and n_outputs != self.outputs:
            return False
        if self.min_outputs is not None and n_outputs < self.min_outputs:
            return False
        return True

    def matches_tx(self, tx) -> bool:
        return self.matches(len(tx.inputs), len(tx.outputs))


@dataclass(frozen=True)
class FilterCalibration:
    """One service's criteria settings; ``None``/``False`` disables a criterion."""
    c1_fee: MixingFee | None = None
    c2_shape: ShapePattern | None = None
    c3_chain_shape: ShapePattern | None = None
    c4_no_reuse: bool = False
    c5_constant_fee: int | None = None

    def __post_init__(self):
        if self.c5_constant_fee is not None and self.c5_constant_fee < 0:
            raise NegativeFee(f"negative constant fee {self.c5_constant_fee}")

    def enabled(self) -> tuple[str, ...]:
        flags = (self.c1_fee is not None, self.c2_shape is not None,
                 self.c3_chain_shape is not None, self.c4_no_reuse,
                 self.c5_constant_fee is not None)
        return tuple(c for c, on in zip(CRITERIA, flags) if on)

    def disable(self, *criteria: str) -> "FilterCalibration":
        off = {"c1": {"c1_fee": None}, "c2": {"c2_shape": None},
               "c3": {"c3_chain_shape": None}, "c4": {"c4_no_reuse": False},
               "c5": {"c5_constant_fee": None}}
        changes = {}
        for c in criteria:
            changes.update(off[c])
        return replace(self, **changes)


# criteria

def _require(enabled, name):
    if not enabled:
        raise DisabledCriterion(f"criterion {name} is disabled in this calibration")


def criterion1_value(chain: ChainIndex, candidate: OutputRef, deposit_value: int,
                     cal: FilterCalibration) -> bool:
    """Withdrawn value at most the deposit minus the (minimum) mixing fee."""
    _require(cal.c1_fee is not None, "c1")
    return chain.output(candidate).value <= cal.c1_fee.max_withdrawal(deposit_value)


def criterion2_shape(chain: ChainIndex, candidate: OutputRef, cal: FilterCalibration) -> bool:
    _require(cal.c2_shape is not None, "c2")
    return cal.c2_shape.matches_tx(chain.tx(candidate.txid))


def criterion3_chain_shape(chain: ChainIndex, candidate: OutputRef, cal: FilterCalibration) -> bool:
    """The funding transaction or some spending transaction of the candidate's
    transaction follows the chain pattern. Multi-input candidates fail."""
    _require(cal.c3_chain_shape is not None, "c3")
    pattern = cal.c3_chain_shape
    tx = chain.tx(candidate.txid)
    if len(tx.inputs) != 1:
        return False
    funder = chain.tx(tx.inputs[0].prev_txid)
    if pattern.matches_tx(funder):
        return True
    txs = chain.transactions
    for ref in tx.output_refs():
        p = chain.spender_position(ref)
        if p is not None and pattern.matches_tx(txs[p]):
            return True
    return False


def criterion4_no_reuse(chain: ChainIndex, candidate: OutputRef, cal: FilterCalibration) -> bool:
    """Every input address of the candidate's transaction spends exactly once
    over the whole chain."""
    _require(cal.c4_no_reuse, "c4")
    p = chain.position(candidate.txid)
    addrs = chain.input_addresses[p]
    if not addrs:
        return False
    uses = chain.input_use_count
    return all(uses[a] == 1 for a in addrs)


def criterion5_fee(chain: ChainIndex, candidate: OutputRef, cal: FilterCalibration) -> bool:
    _require(cal.c5_constant_fee is not None, "c5")
    fee = chain.fees[chain.position(candidate.txid)]
    return fee is not None and fee == cal.c5_constant_fee


def check_criterion(name: str, chain: ChainIndex, candidate: OutputRef, deposit_value: int,
                    cal: FilterCalibration) -> bool:
    if name == "c1":
        return criterion1_value(chain, candidate, deposit_value, cal)
    if name == "c2":
        return criterion2_shape(chain, candidate, cal)
    if name == "c3":
        return criterion3_chain_shape(chain, candidate, cal)
    if name == "c4":
        return criterion4_no_reuse(chain, candidate, cal)
    if name == "c5":
        return criterion5_fee(chain, candidate, cal)
    raise ValueError(f"unknown criterion {name!r}")


def filter_verdicts(chain: ChainIndex, candidates: Iterable[OutputRef], deposit_value: int,
                    cal: FilterCalibration, order: Iterable[str] | None = None) -> dict[OutputRef, str | None]:
    """Map each candidate to the first enabled criterion it fails, or None.

    Disabled criteria are skipped. `order` only changes which criterion is
    blamed, never whether a candidate passes.
    """
    enabled = cal.enabled()
    if order is None:
        order = enabled
    else:
        order = [c for c in order if c in enabled]
        missing = set(enabled) - set(order)
        if missing:
            raise ValueError(f"order leaves out enabled criteria {sorted(missing)}")
    verdicts = {}
    for ref in candidates:
        ref = OutputRef(*ref)
        verdicts[ref] = next(
            (c for c in order if not check_criterion(c, chain, ref, deposit_value, cal)), None)
    return verdicts


def apply_filters(chain: ChainIndex, result: TaintResult, case: SampleCase,
                  cal: FilterCalibration, order: Iterable[str] | None = None) -> TaintResult:
    """Keep the outputs of `result` passing all enabled criteria.

    The deposit value for the value criterion is the total paid to the
    mixer's receiver addresses in the case's deposits.
    """
    verdicts = filter_verdicts(chain, result.tainted_outputs,
                               case_deposit_value(chain, case), cal, order)
    kept = frozenset(r for r, v in verdicts.items() if v is None)
    dropped = {r: v for r, v in verdicts.items() if v is not None}
    return replace(result, tainted_outputs=kept, applied_criteria=cal.enabled(),
                   dropped=MappingProxyType(dropped))


def render_filter_report(verdicts: dict[OutputRef, str | None], fmt: str = "table") -> str:
    """Per-candidate verdict, sorted by output reference."""
    rows = sorted(verdicts.items())
    if fmt == "jsonl":
        return "".join(json.dumps({"txid": r.txid, "vout": r.vout,
                                   "verdict": "pass" if v is None else "fail",
                                   "failed": v}, separators=(",", ":")) + "\n"
                       for r, v in rows)
    lines = [f"{'output':<70} verdict"]
    for r, v in rows:
        lines.append(f"{r.txid + ':' + str(r.vout):<70} {'pass' if v is None else 'fail ' + v}")
    return "\n".join(lines) + "\n"
