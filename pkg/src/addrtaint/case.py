"""Sample cases: a deposit to a mixer plus the withdrawal outputs to find."""
from __future__ import annotations

from dataclasses import dataclass

from .chain import DAY, ChainIndex, OutputRef
from .errors import InvalidWindow, UnknownTxid


@dataclass(frozen=True)
class SampleCase:
    """One tracking experiment.

    :param deposit_txids: transactions in which the user paid the mixer.
    :param targets: withdrawal outputs that must show up in a method's result.
    :param change_addresses: user change addresses in the deposit
        transactions; excluded from the seeds.
    :param known_withdrawals: withdrawal outputs of an earlier case of the
        same service, used to seed backward tainting (Method 4).
    :param horizon_days: maximum mixing time of the service, if it has one.
    """
    case_id: str
    service: str
    deposit_txids: tuple[str, ...]
    targets: tuple[OutputRef, ...] = ()
    change_addresses: tuple[str, ...] = ()
    known_withdrawals: tuple[OutputRef, ...] = ()
    horizon_days: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "deposit_txids", tuple(self.deposit_txids))
        object.__setattr__(self, "targets", tuple(OutputRef(*r) for r in self.targets))
        object.__setattr__(self, "change_addresses", tuple(self.change_addresses))
        object.__setattr__(self, "known_withdrawals",
                           tuple(OutputRef(*r) for r in self.known_withdrawals))
        if not self.deposit_txids:
            raise ValueError(f"case {self.case_id}: no deposit transactions")
        if self.horizon_days is not None and self.horizon_days <= 0:
            raise InvalidWindow(f"case {self.case_id}: horizon must be positive")

    def horizon_seconds(self, default: int = 3 * DAY) -> int:
        if self.horizon_days is None:
            return default
        return round(self.horizon_days * DAY)


def check_case(chain: ChainIndex, case: SampleCase):
    for txid in case.deposit_txids:
        if txid not in chain:
            raise UnknownTxid(f"case {case.case_id}: unknown deposit txid {txid}")
    for ref in case.targets + case.known_withdrawals:
        if ref.txid not in chain:
            raise UnknownTxid(f"case {case.case_id}: unknown txid {ref.txid}")
        chain.output(ref)


def seed_time(chain: ChainIndex, case: SampleCase) -> int:
    """Time of the earliest deposited transaction."""
    return min(chain.timestamp(t) for t in case.deposit_txids)


def receiver_outputs(chain: ChainIndex, case: SampleCase) -> list[OutputRef]:
    """Deposit outputs paid to the mixer, i.e. everything but user change."""
    change = set(case.change_addresses)
    refs = []
    for txid in case.deposit_txids:
        tx = chain.tx(txid)
        refs.extend(OutputRef(txid, vout) for vout, out in enumerate(tx.outputs)
                    if out.address not in change)
    return refs


def receiver_addresses(chain: ChainIndex, case: SampleCase) -> set[str]:
    return {chain.output(r).address for r in receiver_outputs(chain, case)}


def deposit_value(chain: ChainIndex, case: SampleCase) -> int:
    return sum(chain.output(r).value for r in receiver_outputs(chain, case))
