"""Chain, calibration, case and result files.

Chain files are JSON Lines, one transaction per line::

    {"txid": "<64 hex>", "time": 1600000000, "coinbase": false,
     "inputs": [{"txid": "<64 hex>", "vout": 0}],
     "outputs": [{"addr": "...", "value": 50000}]}

Calibration files map a service name to its criteria settings::

    {"Helix Light": {"c1_fee": "2%", "c2_shape": "one-to-many",
                     "c3_chain_shape": null, "c4_no_reuse": true,
                     "c5_constant_fee": 50000}}

``c1_fee`` is either a percentage (``"2.49%"``) or a flat amount
(``"10000 sat"``); ``null`` disables a criterion and ``c4_no_reuse`` is a
boolean. An optional ``many_threshold`` sets the minimum output count of
``one-to-many``.
"""
from __future__ import annotations

import json
import re
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator

from .case import SampleCase
from .chain import OutputRef, Transaction, TxInput, TxOutput
from .errors import (
    CalibrationError,
    InvalidScenario,
    InvalidTransaction,
    MissingField,
    NegativeFee,
    ParseError,
    UnknownField,
)
from .filters import FilterCalibration, MixingFee, ShapePattern
from .sim import DepositTruth, GroundTruth, MixerScenario
from .taint import TaintResult, TaintWindow

_HEX64 = re.compile(r"[0-9a-f]{64}")
_TX_KEYS = ("txid", "time", "coinbase", "inputs", "outputs")


# chain files

def transaction_to_json(tx: Transaction) -> str:
    obj = {
        "txid": tx.txid,
        "time": tx.timestamp,
        "coinbase": tx.is_coinbase,
        "inputs": [{"txid": i.prev_txid, "vout": i.prev_vout} for i in tx.inputs],
        "outputs": [{"addr": o.address, "value": o.value} for o in tx.outputs],
    }
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def _is_int(x):
    return type(x) is int


def transaction_from_obj(obj) -> Transaction:
    """Build a Transaction from a decoded chain-file record.

    Raises ValueError describing the first problem found.
    """
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    keys = set(obj)
    if keys != set(_TX_KEYS):
        missing = set(_TX_KEYS) - keys
        extra = keys - set(_TX_KEYS)
        raise ValueError(f"fields must be exactly {list(_TX_KEYS)}"
                         + (f"; missing {sorted(missing)}" if missing else "")
                         + (f"; unexpected {sorted(extra)}" if extra else ""))
    txid = obj["txid"]
    if not isinstance(txid, str) or not _HEX64.fullmatch(txid):
        raise ValueError(f"txid must be 64 lowercase hex characters, got {txid!r}")
    if not _is_int(obj["time"]):
        raise ValueError("time must be an integer")
    if not isinstance(obj["coinbase"], bool):
        raise ValueError("coinbase must be a boolean")
    if not isinstance(obj["inputs"], list) or not isinstance(obj["outputs"], list):
        raise ValueError("inputs and outputs must be arrays")
    inputs = []
    for i in obj["inputs"]:
        if not isinstance(i, dict) or set(i) != {"txid", "vout"}:
            raise ValueError("input must be {\"txid\", \"vout\"}")
        if not isinstance(i["txid"], str) or not _HEX64.fullmatch(i["txid"]):
            raise ValueError(f"input txid must be 64 lowercase hex characters, got {i['txid']!r}")
        if not _is_int(i["vout"]):
            raise ValueError("input vout must be an integer")
        inputs.append(TxInput(i["txid"], i["vout"]))
    outputs = []
    for o in obj["outputs"]:
        if not isinstance(o, dict) or set(o) != {"addr", "value"}:
            raise ValueError("output must be {\"addr\", \"value\"}")
        if not isinstance(o["addr"], str) or not _is_int(o["value"]):
            raise ValueError("output addr must be a string and value an integer")
        outputs.append(TxOutput(o["addr"], o["value"]))
    try:
        return Transaction(txid, obj["time"], tuple(inputs), tuple(outputs), obj["coinbase"])
    except InvalidTransaction as e:
        raise ValueError(str(e)) from None


def iter_chain(path) -> Iterator[Transaction]:
    """Stream transactions from a chain file. Blank lines are ignored."""
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(lineno, f"malformed JSON: {e.msg}", path) from None
            try:
                yield transaction_from_obj(obj)
            except ValueError as e:
                raise ParseError(lineno, str(e), path) from None


def load_chain(path) -> list[Transaction]:
    """Read every transaction of a chain file, in file order.

    Only per-record checks happen here; chain validity (resolvable inputs,
    no double spends) is checked by ``build_index``.
    """
    return list(iter_chain(path))


def dumps_chain(transactions: Iterable[Transaction]) -> str:
    return "".join(transaction_to_json(tx) + "\n" for tx in transactions)


def save_chain(transactions: Iterable[Transaction], path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for tx in transactions:
            f.write(transaction_to_json(tx))
            f.write("\n")


# calibration files

_CAL_REQUIRED = ("c1_fee", "c2_shape", "c3_chain_shape", "c4_no_reuse", "c5_constant_fee")
_CAL_OPTIONAL = ("many_threshold",)
_PERCENT = re.compile(r"(\d+(?:\.\d+)?)%")
_FLAT = re.compile(r"(\d+) sat")


def parse_fee(text) -> MixingFee:
    """``"2.49%"`` -> 249 basis points; ``"10000 sat"`` -> flat 10,000."""
    if not isinstance(text, str):
        raise CalibrationError(f"c1_fee must be a string like '2%' or '10000 sat', got {text!r}")
    s = text.strip().replace(",", "")
    if s.startswith("-"):
        raise NegativeFee(f"negative mixing fee {text!r}")
    m = _PERCENT.fullmatch(s)
    if m:
        try:
            bp = Decimal(m.group(1)) * 100
        except InvalidOperation:
            raise CalibrationError(f"bad percentage {text!r}") from None
        if bp != bp.to_integral_value():
            raise CalibrationError(f"percentage {text!r} finer than a basis point")
        return MixingFee.percent(int(bp))
    m = _FLAT.fullmatch(s)
    if m:
        return MixingFee.flat(int(m.group(1)))
    raise CalibrationError(f"unrecognised fee {text!r}")


def _parse_shape(value, field, many):
    if value is None:
        return None
    if not isinstance(value, str):
        raise CalibrationError(f"{field} must be a shape keyword or null")
    return ShapePattern.from_keyword(value, many)


def calibration_from_obj(name, row) -> FilterCalibration:
    if not isinstance(row, dict):
        raise CalibrationError(f"{name}: calibration row must be an object")
    unknown = set(row) - set(_CAL_REQUIRED) - set(_CAL_OPTIONAL)
    if unknown:
        raise UnknownField(f"{name}: unknown calibration keys {sorted(unknown)}")
    missing = [k for k in _CAL_REQUIRED if k not in row]
    if missing:
        raise MissingField(f"{name}: missing calibration keys {missing}")
    many = row.get("many_threshold", 2)
    if type(many) is not int or many < 2:
        raise CalibrationError(f"{name}: many_threshold must be an integer >= 2")
    fee = None if row["c1_fee"] is None else parse_fee(row["c1_fee"])
    if not isinstance(row["c4_no_reuse"], bool):
        raise CalibrationError(f"{name}: c4_no_reuse must be true or false")
    c5 = row["c5_constant_fee"]
    if c5 is not None:
        if type(c5) is not int:
            raise CalibrationError(f"{name}: c5_constant_fee must be an integer or null")
        if c5 < 0:
            raise NegativeFee(f"{name}: negative constant fee {c5}")
    return FilterCalibration(
        c1_fee=fee,
        c2_shape=_parse_shape(row["c2_shape"], "c2_shape", many),
        c3_chain_shape=_parse_shape(row["c3_chain_shape"], "c3_chain_shape", many),
        c4_no_reuse=row["c4_no_reuse"],
        c5_constant_fee=c5,
    )


def calibration_to_obj(cal: FilterCalibration) -> dict:
    row = {
        "c1_fee": None if cal.c1_fee is None else str(cal.c1_fee),
        "c2_shape": None if cal.c2_shape is None else cal.c2_shape.keyword,
        "c3_chain_shape": None if cal.c3_chain_shape is None else cal.c3_chain_shape.keyword,
        "c4_no_reuse": cal.c4_no_reuse,
        "c5_constant_fee": cal.c5_constant_fee,
    }
    many = {s.min_outputs for s in (cal.c2_shape, cal.c3_chain_shape)
            if s is not None and s.min_outputs is not None}
    if many and many != {2}:
        row["many_threshold"] = max(many)
    return row


def parse_calibrations(obj) -> dict[str, FilterCalibration]:
    if not isinstance(obj, dict):
        raise CalibrationError("calibration document must map service names to rows")
    return {name: calibration_from_obj(name, row) for name, row in obj.items()}


def load_calibration(path) -> dict[str, FilterCalibration]:
    with open(path, encoding="utf-8") as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as e:
            raise CalibrationError(f"{path}: malformed JSON: {e}") from None
    return parse_calibrations(obj)


def dumps_calibration(cals: dict[str, FilterCalibration]) -> str:
    obj = {name: calibration_to_obj(cal) for name, cal in cals.items()}
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def save_calibration(cals: dict[str, FilterCalibration], path):
    Path(path).write_text(dumps_calibration(cals), encoding="utf-8")


def service_calibration_path():
    return resources.files("addrtaint") / "data" / "service_calibration.json"


def load_service_calibration() -> dict[str, FilterCalibration]:
    """The nine published service calibrations shipped with the package."""
    with resources.as_file(service_calibration_path()) as p:
        return load_calibration(p)


# case files

def case_to_obj(case: SampleCase) -> dict:
    return {
        "case_id": case.case_id,
        "service": case.service,
        "deposit_txids": list(case.deposit_txids),
        "targets": [[r.txid, r.vout] for r in case.targets],
        "change_addresses": list(case.change_addresses),
        "known_withdrawals": [[r.txid, r.vout] for r in case.known_withdrawals],
        "horizon_days": case.horizon_days,
    }


def case_from_obj(obj) -> SampleCase:
    if not isinstance(obj, dict):
        raise ValueError("case must be a JSON object")
    for k in ("case_id", "service", "deposit_txids"):
        if k not in obj:
            raise ValueError(f"case is missing {k!r}")
    unknown = set(obj) - {"case_id", "service", "deposit_txids", "targets",
                          "change_addresses", "known_withdrawals", "horizon_days"}
    if unknown:
        raise ValueError(f"unknown case keys {sorted(unknown)}")
    return SampleCase(
        case_id=str(obj["case_id"]),
        service=obj["service"],
        deposit_txids=tuple(obj["deposit_txids"]),
        targets=tuple(OutputRef(t, v) for t, v in obj.get("targets", ())),
        change_addresses=tuple(obj.get("change_addresses", ())),
        known_withdrawals=tuple(OutputRef(t, v) for t, v in obj.get("known_withdrawals", ())),
        horizon_days=obj.get("horizon_days"),
    )


def load_cases(path) -> list[SampleCase]:
    """Read a case file: a JSON array of cases, or a single case object."""
    with open(path, encoding="utf-8") as f:
        obj = json.load(f)
    if isinstance(obj, dict):
        obj = [obj]
    return [case_from_obj(o) for o in obj]


def save_cases(cases: Iterable[SampleCase], path):
    text = json.dumps([case_to_obj(c) for c in cases], indent=2) + "\n"
    Path(path).write_text(text, encoding="utf-8")


# taint results

def result_to_obj(result: TaintResult) -> dict:
    obj = {
        "method": result.method,
        "seed": result.seed,
        "window": result.window.as_dict(),
        "counts": {"outputs": len(result.tainted_outputs),
                   "addresses": len(result.tainted_addresses)},
        "tainted_outputs": [[r.txid, r.vout] for r in sorted(result.tainted_outputs)],
        "tainted_addresses": sorted(result.tainted_addresses),
    }
    if result.filtered:
        obj["applied_criteria"] = list(result.applied_criteria)
        obj["counts"]["dropped"] = len(result.dropped)
        obj["dropped"] = [[r.txid, r.vout, c] for r, c in sorted(result.dropped.items())]
    return obj


def result_from_obj(obj) -> TaintResult:
    w = obj["window"]
    window = TaintWindow(w["seed_time"], w["lookback"], w["horizon"])
    applied = obj.get("applied_criteria")
    return TaintResult(
        method=obj["method"],
        tainted_addresses=frozenset(obj["tainted_addresses"]),
        tainted_outputs=frozenset(OutputRef(t, v) for t, v in obj["tainted_outputs"]),
        window=window,
        seed=obj.get("seed", ""),
        applied_criteria=None if applied is None else tuple(applied),
        dropped=MappingProxyType({OutputRef(t, v): c for t, v, c in obj.get("dropped", ())}),
    )


def dumps_result(result: TaintResult) -> str:
    return json.dumps(result_to_obj(result), separators=(",", ":")) + "\n"


def load_result(path) -> TaintResult:
    with open(path, encoding="utf-8") as f:
        return result_from_obj(json.loads(f.read()))


# simulator scenarios and ground truth

def load_scenario(path) -> MixerScenario:
    with open(path, encoding="utf-8") as f:
        obj = json.load(f)
    if not isinstance(obj, dict):
        raise InvalidScenario("scenario file must hold a JSON object")
    return MixerScenario.from_dict(obj)


def dumps_scenario(scenario: MixerScenario) -> str:
    return json.dumps(scenario.to_dict(), indent=2) + "\n"


def truth_to_obj(truth: GroundTruth) -> dict:
    return {
        "service": truth.service,
        "pool_addresses": list(truth.pool_addresses),
        "delivery_addresses": list(truth.delivery_addresses),
        "deposits": [{
            "deposit_txids": list(d.deposit_txids),
            "receiver_addresses": list(d.receiver_addresses),
            "change_addresses": list(d.change_addresses),
            "deposit_value": d.deposit_value,
            "withdrawal_txids": list(d.withdrawal_txids),
            "withdrawal_value": d.withdrawal_value,
            "targets": [[r.txid, r.vout] for r in d.targets],
            "user_destinations": list(d.user_destinations),
        } for d in truth.deposits],
    }


def truth_from_obj(obj) -> GroundTruth:
    deposits = tuple(DepositTruth(
        deposit_txids=tuple(d["deposit_txids"]),
        receiver_addresses=tuple(d["receiver_addresses"]),
        change_addresses=tuple(d["change_addresses"]),
        withdrawal_txids=tuple(d["withdrawal_txids"]),
        targets=tuple(OutputRef(t, v) for t, v in d["targets"]),
        user_destinations=tuple(d["user_destinations"]),
        deposit_value=d["deposit_value"],
        withdrawal_value=d["withdrawal_value"],
    ) for d in obj["deposits"])
    return GroundTruth(obj["service"], deposits, tuple(obj.get("pool_addresses", ())),
                       tuple(obj.get("delivery_addresses", ())))


def dumps_truth(truth: GroundTruth) -> str:
    return json.dumps(truth_to_obj(truth), indent=2) + "\n"


def load_truth(path) -> GroundTruth:
    with open(path, encoding="utf-8") as f:
        return truth_from_obj(json.load(f))
