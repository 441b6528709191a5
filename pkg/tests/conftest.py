"""Shared fixtures: a small ledger builder and a random valid-chain generator."""
import hashlib
import random
import sys

import pytest

from addrtaint import Transaction, build_index, reference_chain_T1
from addrtaint.sim import T1_TXIDS


class Ledger:
    """Builds hand-made chains with readable labels for txids."""

    def __init__(self, tag="test"):
        self.tag = tag
        self.txs = []
        self.ids = {}

    def _txid(self, label):
        txid = hashlib.sha256(f"{self.tag}/{label}".encode()).hexdigest()
        self.ids[label] = txid
        return txid

    def coinbase(self, label, t, *outputs):
        tx = Transaction(self._txid(label), t, (), tuple(outputs), True)
        self.txs.append(tx)
        return tx.txid

    def spend(self, label, t, inputs, outputs):
        ins = [(self.ids[src], vout) for src, vout in inputs]
        tx = Transaction(self._txid(label), t, tuple(ins), tuple(outputs))
        self.txs.append(tx)
        return tx.txid

    def ref(self, label, vout=0):
        from addrtaint import OutputRef
        return OutputRef(self.ids[label], vout)

    def index(self):
        return build_index(self.txs)


def random_chain(seed, n_tx=50, n_addr=20, span=400, coinbase_rate=0.2):
    """A valid random chain: timestamps in [0, span), addresses from a small
    pool so reuse and input sharing happen often."""
    rng = random.Random(seed)
    addrs = [f"a{i}" for i in range(n_addr)]
    utxo = []      # (txid, vout, value, time)
    txs = []
    for n in range(n_tx):
        txid = hashlib.sha256(f"rand/{seed}/{n}".encode()).hexdigest()
        t = rng.randrange(span)
        usable = [u for u in utxo if u[3] <= t]
        if not usable or rng.random() < coinbase_rate:
            value = rng.randint(1_000, 100_000)
            outs = [(rng.choice(addrs), value)]
            txs.append(Transaction(txid, t, (), tuple(outs), True))
        else:
            picked = rng.sample(usable, min(len(usable), rng.randint(1, 3)))
            for u in picked:
                utxo.remove(u)
            total = sum(u[2] for u in picked)
            k = rng.randint(1, 3)
            spend = total - rng.randint(0, total // 10)
            cuts = sorted(rng.sample(range(1, spend), k - 1)) if spend > k else []
            parts = [b - a for a, b in zip([0, *cuts], [*cuts, spend])] or [spend]
            outs = [(rng.choice(addrs), v) for v in parts]
            txs.append(Transaction(txid, t, tuple((u[0], u[1]) for u in picked), tuple(outs)))
        for vout, (_, v) in enumerate(txs[-1].outputs):
            utxo.append((txid, vout, v, t))
    return txs


@pytest.fixture
def ledger():
    return Ledger()


@pytest.fixture(scope="session")
def t1():
    txs, truth = reference_chain_T1()
    return build_index(txs), truth


@pytest.fixture(scope="session")
def t1_ids():
    return T1_TXIDS


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
