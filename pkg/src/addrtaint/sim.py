"""Synthetic chains with a mixer whose deposit -> withdrawal mapping is known.

The mixer model:

* each deposit pays a fresh receiver address; the user keeps a change output;
* the receiver sweeps into the deposit pool after a short delay, or only
  after ``idle_time`` when ``idle_deposits`` is set (Bitcoin Fog style);
* withdrawals are paid from a peeling chain funded by the withdrawal pool.
  Every ``peel_chain_length`` withdrawals the pool funds a new chain head.
  With a ``single`` pool topology deposit and withdrawal pools are the same
  address; with ``disjoint`` they never interact;
* the pool spends its reserve coin lineage, never the swept deposits, so
  there is no output-level value path from a deposit to a withdrawal.

Background traffic is a random UTXO process over its own address universe.
It touches mixer-related coins only when ``user_activity`` is on: then
depositors may be funded from background coins, and users' change and
withdrawn coins are later spent by background transactions.
"""
from __future__ import annotations

import hashlib
import heapq
import logging
import random
from dataclasses import asdict, dataclass, field, fields, replace

from .case import SampleCase
from .chain import DAY, OutputRef, Transaction, TxInput, TxOutput
from .errors import InfeasibleScenario, InvalidScenario
from .filters import FilterCalibration, MixingFee, ShapePattern

log = logging.getLogger(__name__)

HOUR = 3_600
SHAPES = ("one-to-one", "one-to-two", "one-to-many")
TOPOLOGIES = ("single", "disjoint")

POOL_FUNDING_FEE = 20_000
SWEEP_FEE = 5_000
CHAIN_MARGIN = 100_000
_ROUND_FEES = (1_000, 5_000, 10_000, 20_000, 50_000)


@dataclass(frozen=True)
class Deposit:
    """A scheduled deposit; `time` is seconds after the scenario start."""
    time: int
    value: int


@dataclass(frozen=True)
class MixerScenario:
    seed: int = 0
    service: str = "Bitcoin Fog"
    start_time: int = 1_600_000_000
    duration: int = 10 * DAY
    background_txs: int = 1_000
    background_multi_input: float = 0.1
    background_address_reuse: float = 0.3
    user_activity: bool = True
    pool_topology: str = "single"
    fee_bp: int | None = 100
    fee_flat: int | None = None
    withdrawal_shape: str = "one-to-two"
    network_fee: int | None = 50_000
    payout_delay: tuple[int, int] = (2 * HOUR, DAY)
    never_reuse: bool = True
    deposits: tuple[Deposit, ...] = (Deposit(6 * DAY, 50_000_000),
                                     Deposit(6 * DAY + 4 * HOUR, 30_000_000))
    idle_deposits: bool = False
    idle_time: int = 180 * DAY
    peel_chain_length: int = 4
    pool_reserve: int = 10 ** 12

    def __post_init__(self):
        object.__setattr__(self, "payout_delay", tuple(self.payout_delay))
        object.__setattr__(self, "deposits", tuple(
            d if isinstance(d, Deposit) else Deposit(**d) if isinstance(d, dict) else Deposit(*d)
            for d in self.deposits))
        self.validate()

    def validate(self):
        def bad(msg):
            raise InvalidScenario(msg)

        if not 0 <= self.seed < 2 ** 64:
            bad("seed must be an unsigned 64-bit integer")
        if self.duration <= 0:
            bad("duration must be positive")
        if self.background_txs < 0:
            bad("background_txs must be non-negative")
        for name in ("background_multi_input", "background_address_reuse"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                bad(f"{name} must be a probability")
        if self.pool_topology not in TOPOLOGIES:
            bad(f"pool_topology must be one of {TOPOLOGIES}")
        if self.withdrawal_shape not in SHAPES:
            bad(f"withdrawal_shape must be one of {SHAPES}")
        if (self.fee_bp is None) == (self.fee_flat is None):
            bad("exactly one of fee_bp and fee_flat must be set")
        if self.fee_bp is not None and not 0 <= self.fee_bp < 10_000:
            bad("fee_bp must be in [0, 10000)")
        if self.fee_flat is not None and self.fee_flat < 0:
            bad("fee_flat must be non-negative")
        if self.network_fee is not None and self.network_fee <= 0:
            bad("network_fee must be positive")
        lo, hi = self.payout_delay
        if not 0 < lo <= hi:
            bad("payout_delay must satisfy 0 < min <= max")
        if not self.deposits:
            bad("at least one deposit is required")
        if self.idle_time <= 0 or self.peel_chain_length < 1 or self.pool_reserve <= 0:
            bad("idle_time, peel_chain_length and pool_reserve must be positive")
        for d in self.deposits:
            if d.value <= 0:
                bad("deposit values must be positive")
            if not 0 <= d.time or d.time + hi > self.duration:
                bad(f"deposit at +{d.time}s cannot be paid out within the scenario duration")
            if self.mixing_fee.max_withdrawal(d.value) <= 0:
                bad(f"deposit of {d.value} sat does not cover the mixing fee")

    @property
    def mixing_fee(self) -> MixingFee:
        if self.fee_bp is not None:
            return MixingFee.percent(self.fee_bp)
        return MixingFee.flat(self.fee_flat)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["payout_delay"] = list(self.payout_delay)
        d["deposits"] = [{"time": x.time, "value": x.value} for x in self.deposits]
        return d

    @classmethod
    def from_dict(cls, obj) -> "MixerScenario":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise InvalidScenario(f"unknown scenario keys {sorted(unknown)}")
        return cls(**obj)


@dataclass(frozen=True)
class DepositTruth:
    deposit_txids: tuple[str, ...]
    receiver_addresses: tuple[str, ...]
    change_addresses: tuple[str, ...]
    withdrawal_txids: tuple[str, ...]
    targets: tuple[OutputRef, ...]
    user_destinations: tuple[str, ...]
    deposit_value: int
    withdrawal_value: int


@dataclass(frozen=True)
class GroundTruth:
    service: str
    deposits: tuple[DepositTruth, ...]
    pool_addresses: tuple[str, ...] = ()
    delivery_addresses: tuple[str, ...] = ()

    def cases(self, horizon_days: float | None = None) -> list[SampleCase]:
        """One sample case per deposit. Each case after the first gets the
        previous deposit's withdrawal outputs as its known prior case."""
        out = []
        for i, d in enumerate(self.deposits):
            known = self.deposits[i - 1].targets if i else ()
            out.append(SampleCase(
                case_id=f"{i + 1}",
                service=self.service,
                deposit_txids=d.deposit_txids,
                targets=d.targets,
                change_addresses=d.change_addresses,
                known_withdrawals=known,
                horizon_days=horizon_days,
            ))
        return out


class _Builder:
    """Accumulates transactions with deterministic txids."""

    def __init__(self, tag):
        self.txs: list[Transaction] = []
        self._tag = tag
        self._n = 0

    def _txid(self):
        self._n += 1
        return hashlib.sha256(f"addrtaint-sim/{self._tag}/{self._n}".encode()).hexdigest()

    def add(self, t, inputs, outputs):
        """`inputs` are coins ``(ref, value, address)``; returns the new coins."""
        txid = self._txid()
        tx = Transaction(txid, t, tuple(TxInput(*c[0]) for c in inputs),
                         tuple(TxOutput(a, v) for a, v in outputs), is_coinbase=not inputs)
        self.txs.append(tx)
        return [(OutputRef(txid, i), v, a) for i, (a, v) in enumerate(outputs)]


def _split(rng, amount, parts):
    """`amount` as `parts` positive integers."""
    if parts == 1:
        return [amount]
    cuts = sorted(rng.sample(range(1, amount), parts - 1))
    bounds = [0, *cuts, amount]
    return [b - a for a, b in zip(bounds, bounds[1:])]


def _background_fee(rng):
    if rng.random() < 0.2:
        return rng.choice(_ROUND_FEES)
    return rng.randint(150, 30_000)


class _Background:
    def __init__(self, rng, builder, sc):
        self.rng = rng
        self.b = builder
        self.sc = sc
        self.utxos = []
        self.addrs = []
        self.pending = []  # (available_time, seq, coin): user coins not yet spendable
        self._seq = 0

    def address(self):
        if self.addrs and self.rng.random() < self.sc.background_address_reuse:
            return self.rng.choice(self.addrs)
        a = f"bg{len(self.addrs)}"
        self.addrs.append(a)
        return a

    def release(self, t):
        while self.pending and self.pending[0][0] <= t:
            self.utxos.append(heapq.heappop(self.pending)[2])

    def hand_over(self, t, coin):
        self._seq += 1
        heapq.heappush(self.pending, (t, self._seq, coin))

    def take(self, i):
        u = self.utxos
        u[i], u[-1] = u[-1], u[i]
        return u.pop()

    def take_at_least(self, value, tries=20):
        rng = self.rng
        for _ in range(tries):
            if not self.utxos:
                return None
            i = rng.randrange(len(self.utxos))
            if self.utxos[i][1] >= value:
                return self.take(i)
        return None

    def step(self, t):
        rng = self.rng
        self.release(t)
        if len(self.utxos) < 4 or rng.random() < 0.02:
            value = rng.randint(1, 50) * 100_000_000
            self.utxos.extend(self.b.add(t, [], [(self.address(), value)]))
            return
        k = 1
        if rng.random() < self.sc.background_multi_input:
            k = rng.randint(2, 3)
        inputs = [self.take(rng.randrange(len(self.utxos))) for _ in range(min(k, len(self.utxos)))]
        total = sum(c[1] for c in inputs)
        n_out = min(rng.choice((1, 2, 2, 2, 3)), total)
        fee = min(_background_fee(rng), total - n_out)
        values = _split(rng, total - fee, n_out)
        self.utxos.extend(self.b.add(t, inputs, [(self.address(), v) for v in values]))


@dataclass
class _Payout:
    deposit: int
    time: int
    value: int
    network_fee: int
    parts: int
    txids: list = field(default_factory=list)
    targets: list = field(default_factory=list)
    destinations: list = field(default_factory=list)


def simulate(scenario: MixerScenario) -> tuple[list[Transaction], GroundTruth]:
    """Generate a chain and its ground truth. Deterministic in the scenario.

    Transactions come back in canonical ``(timestamp, txid)`` order.
    Raises InfeasibleScenario when the pool reserve cannot fund the payouts.
    """
    sc = scenario
    rng = random.Random(sc.seed)
    b = _Builder(sc.seed)
    bg = _Background(rng, b, sc)
    start = sc.start_time
    fee_policy = sc.mixing_fee

    pool_in = "mix-pool"
    pool_out = "mix-pool" if sc.pool_topology == "single" else "mix-pool-out"
    if sc.pool_topology == "disjoint":
        pool_in = "mix-pool-in"

    # plan deposits and payouts
    deposits = sorted(enumerate(sc.deposits), key=lambda x: (x[1].time, x[0]))
    payouts = []
    for i, d in deposits:
        t_dep = start + d.time
        delay = rng.randint(*sc.payout_delay)
        nf = sc.network_fee if sc.network_fee is not None else rng.randint(5_000, 60_000)
        parts = rng.randint(2, 4) if sc.withdrawal_shape == "one-to-many" else 1
        payouts.append(_Payout(i, t_dep + delay, fee_policy.max_withdrawal(d.value), nf, parts))
    payouts.sort(key=lambda p: (p.time, p.deposit))

    chains = [payouts[k:k + sc.peel_chain_length]
              for k in range(0, len(payouts), sc.peel_chain_length)]
    hops = 2 if sc.withdrawal_shape == "one-to-one" else 1
    needs = [sum(p.value + hops * p.network_fee for p in ch) + CHAIN_MARGIN for ch in chains]
    if sum(needs) + POOL_FUNDING_FEE * len(chains) >= sc.pool_reserve:
        raise InfeasibleScenario(
            f"pool reserve {sc.pool_reserve} sat cannot fund {sum(needs)} sat of payouts")

    # events: (time, priority, seq, kind, payload)
    events = []
    seq = 0

    def push(t, kind, payload=None, prio=1):
        nonlocal seq
        seq += 1
        events.append((t, prio, seq, kind, payload))

    push(start, "reserve", prio=0)
    for i, d in deposits:
        push(start + d.time, "deposit", i)
    last_funding = start
    for j, ch in enumerate(chains):
        t_fund = max(ch[0].time - rng.randint(600, 1800), last_funding + 1)
        last_funding = t_fund
        push(t_fund, "fund", j)
        prev = t_fund
        for p in ch:
            p.time = max(p.time, prev + 1)
            prev = p.time + (600 if hops == 2 else 0)
            push(p.time, "payout", p)
    if sc.background_txs:
        span = sc.duration
        for t in sorted(start + rng.randrange(span) for _ in range(sc.background_txs)):
            push(t, "bg", prio=2)
    events.sort(key=lambda e: e[:3])

    reserve = None
    chain_coin = {}
    chain_of = {id(p): j for j, ch in enumerate(chains) for p in ch}
    truth = {}
    delivery = []
    dlv_counter = 0

    def delivery_address():
        nonlocal dlv_counter
        dlv_counter += 1
        a = f"mix-dlv{dlv_counter}"
        delivery.append(a)
        return a

    for t, _, _, kind, payload in events:
        if kind == "bg":
            bg.step(t)
        elif kind == "reserve":
            reserve = b.add(t, [], [(pool_out, sc.pool_reserve)])[0]
        elif kind == "deposit":
            i = payload
            value = sc.deposits[i].value
            user_fee = rng.randint(1_000, 5_000)
            need = value + user_fee + 1
            coin = None
            if sc.user_activity:
                bg.release(t)
                coin = bg.take_at_least(need)
            if coin is None:
                funding = need + rng.randint(10_000, 100_000_000)
                coin = b.add(t - HOUR, [], [(f"user{i}", funding)])[0]
            receiver, change = f"mix-recv{i}", f"user{i}-change"
            rx, ch_coin = b.add(t, [coin], [(receiver, value), (change, coin[1] - value - user_fee)])
            truth[i] = {"deposit_txids": [rx[0].txid], "receiver": receiver, "change": change,
                        "value": value}
            if sc.user_activity:
                bg.hand_over(t, ch_coin)
            t_sweep = t + (sc.idle_time if sc.idle_deposits else rng.randint(600, 3600))
            if value > SWEEP_FEE:
                b.add(t_sweep, [rx], [(pool_in, value - SWEEP_FEE)])
        elif kind == "fund":
            j = payload
            head = delivery_address()
            rest = reserve[1] - needs[j] - POOL_FUNDING_FEE
            coins = b.add(t, [reserve], [(head, needs[j]), (pool_out, rest)])
            chain_coin[j], reserve = coins
        elif kind == "payout":
            p = payload
            j = chain_of[id(p)]
            coin = chain_coin[j]
            nxt = delivery_address() if sc.never_reuse else coin[2]
            rest = coin[1] - p.value - hops * p.network_fee
            d = p.deposit
            if sc.withdrawal_shape == "one-to-one":
                hop = f"mix-hop{d}"
                delivery.append(hop)
                hop_coin, chain_coin[j] = b.add(t, [coin], [(hop, p.value + p.network_fee), (nxt, rest)])
                p.txids.append(b.txs[-1].txid)
                dest = f"dest{d}"
                out = b.add(t + 600, [hop_coin], [(dest, p.value)])
                p.txids.append(b.txs[-1].txid)
                p.targets.append(out[0][0])
                p.destinations.append(dest)
                user_coins = [(t + 600, out[0])]
            else:
                values = _split(rng, p.value, p.parts)
                dests = [f"dest{d}" if p.parts == 1 else f"dest{d}.{k}" for k in range(p.parts)]
                outputs = list(zip(dests, values)) + [(nxt, rest)]
                rng.shuffle(outputs)
                out = b.add(t, [coin], outputs)
                p.txids.append(b.txs[-1].txid)
                by_addr = {c[2]: c for c in out}
                chain_coin[j] = by_addr[nxt]
                p.targets.extend(by_addr[a][0] for a in dests)
                p.destinations.extend(dests)
                user_coins = [(t, by_addr[a]) for a in dests]
            if sc.user_activity:
                for when, c in user_coins:
                    bg.hand_over(when, c)

    by_deposit = {p.deposit: p for p in payouts}
    records = []
    for i, d in enumerate(sc.deposits):
        p = by_deposit[i]
        tr = truth[i]
        records.append(DepositTruth(
            deposit_txids=tuple(tr["deposit_txids"]),
            receiver_addresses=(tr["receiver"],),
            change_addresses=(tr["change"],),
            withdrawal_txids=tuple(p.txids),
            targets=tuple(p.targets),
            user_destinations=tuple(p.destinations),
            deposit_value=tr["value"],
            withdrawal_value=p.value,
        ))
    pools = tuple(dict.fromkeys((pool_in, pool_out)))
    txs = sorted(b.txs, key=lambda tx: (tx.timestamp, tx.txid))
    log.debug("simulated %d transactions (%d background)", len(txs), sc.background_txs)
    return txs, GroundTruth(sc.service, tuple(records), pools, tuple(delivery))


def calibration_for(scenario: MixerScenario) -> FilterCalibration:
    """The criteria calibration that describes a scenario's mixer exactly."""
    final_shape = scenario.withdrawal_shape
    chain_shape = "one-to-two" if final_shape == "one-to-one" else final_shape
    return FilterCalibration(
        c1_fee=scenario.mixing_fee,
        c2_shape=ShapePattern.from_keyword(final_shape),
        c3_chain_shape=ShapePattern.from_keyword(chain_shape),
        c4_no_reuse=scenario.never_reuse,
        c5_constant_fee=scenario.network_fee,
    )


# reference chain T1

def _t1_txid(label):
    return hashlib.sha256(f"T1/{label}".encode()).hexdigest()


T1_TXIDS = {label: _t1_txid(label) for label in ("tx0", "tx1", "tx2", "tx3", "tx4", "tx5")}

T1_CALIBRATION = FilterCalibration(
    c1_fee=MixingFee.percent(100),
    c2_shape=ShapePattern.from_keyword("one-to-two"),
    c3_chain_shape=ShapePattern.from_keyword("one-to-two"),
    c4_no_reuse=True,
    c5_constant_fee=1_000,
)


def reference_chain_T1() -> tuple[list[Transaction], GroundTruth]:
    """The fixed six-transaction chain used throughout the examples.

    ::

        tx0 t=0    coinbase -> A 100,000
        tx2 t=0    coinbase -> C 200,000
        tx3 t=50   C -> D 150,000, C2 49,000
        tx1 t=100  A -> M_recv 50,000, A2 49,000     (deposit, A2 is change)
        tx4 t=200  D -> B 48,000, D2 101,000          (withdrawal to B)
        tx5 t=300  M_recv -> C 49,000

    Every non-coinbase transaction pays a 1,000 sat fee.
    """
    x = T1_TXIDS
    txs = [
        Transaction(x["tx0"], 0, (), (TxOutput("A", 100_000),), True),
        Transaction(x["tx2"], 0, (), (TxOutput("C", 200_000),), True),
        Transaction(x["tx3"], 50, (TxInput(x["tx2"], 0),),
                    (TxOutput("D", 150_000), TxOutput("C2", 49_000))),
        Transaction(x["tx1"], 100, (TxInput(x["tx0"], 0),),
                    (TxOutput("M_recv", 50_000), TxOutput("A2", 49_000))),
        Transaction(x["tx4"], 200, (TxInput(x["tx3"], 0),),
                    (TxOutput("B", 48_000), TxOutput("D2", 101_000))),
        Transaction(x["tx5"], 300, (TxInput(x["tx1"], 0),), (TxOutput("C", 49_000),)),
    ]
    txs.sort(key=lambda tx: (tx.timestamp, tx.txid))
    truth = GroundTruth("T1", (DepositTruth(
        deposit_txids=(x["tx1"],),
        receiver_addresses=("M_recv",),
        change_addresses=("A2",),
        withdrawal_txids=(x["tx4"],),
        targets=(OutputRef(x["tx4"], 0),),
        user_destinations=("B",),
        deposit_value=50_000,
        withdrawal_value=48_000,
    ),), pool_addresses=("C",), delivery_addresses=("D",))
    return txs, truth


# preset scenarios

def reference_scenario(seed: int = 0) -> MixerScenario:
    """No background, one deposit, single pool, one-to-two peel."""
    return MixerScenario(seed=seed, service="Bitcoin Fog", background_txs=0,
                         deposits=(Deposit(6 * DAY, 50_000_000),), user_activity=False)


def disjoint_pool_scenario(seed: int = 0, background_txs: int = 1_000) -> MixerScenario:
    """Scenario D1: separate deposit and withdrawal pools, idle deposits."""
    return MixerScenario(seed=seed, service="Bitcoin Fog", background_txs=background_txs,
                         pool_topology="disjoint", idle_deposits=True, user_activity=False,
                         fee_bp=100, withdrawal_shape="one-to-two", network_fee=50_000,
                         never_reuse=True)


def helix_scenario(seed: int = 0, background_txs: int = 90_000) -> MixerScenario:
    """Helix Light style: 2% fee, one-to-many peels, constant 50,000 sat fee."""
    return MixerScenario(seed=seed, service="Helix Light", background_txs=background_txs,
                         duration=8 * DAY, deposits=(Deposit(5 * DAY, 80_000_000),
                                                     Deposit(5 * DAY + 6 * HOUR, 25_000_000)),
                         fee_bp=200, withdrawal_shape="one-to-many", network_fee=50_000,
                         never_reuse=True, payout_delay=(HOUR, 2 * DAY))


def random_scenario(seed: int, background_txs: int = 5_000) -> MixerScenario:
    """A scenario with every mixer knob drawn at random from `seed`."""
    rng = random.Random(f"scenario/{seed}")
    duration = rng.randint(9, 14) * DAY
    n_dep = rng.randint(1, 4)
    lo = rng.randint(1, 6) * HOUR
    hi = lo + rng.randint(1, 36) * HOUR
    deposits = tuple(Deposit(rng.randint(5 * DAY, duration - hi), rng.randint(1, 200) * 1_000_000)
                     for _ in range(n_dep))
    percent = rng.random() < 0.85
    return MixerScenario(
        seed=seed,
        service="random",
        duration=duration,
        background_txs=background_txs,
        background_multi_input=rng.uniform(0.0, 0.3),
        background_address_reuse=rng.uniform(0.0, 0.6),
        user_activity=rng.random() < 0.7,
        pool_topology=rng.choice(TOPOLOGIES),
        fee_bp=rng.choice((50, 100, 150, 200, 249)) if percent else None,
        fee_flat=None if percent else 10_000,
        withdrawal_shape=rng.choice(SHAPES),
        network_fee=rng.choice((10_000, 50_000, None)),
        payout_delay=(lo, hi),
        never_reuse=rng.random() < 0.8,
        deposits=deposits,
        idle_deposits=rng.random() < 0.3,
        peel_chain_length=rng.randint(1, 6),
    )


PRESETS = {
    "reference": reference_scenario,
    "D1": disjoint_pool_scenario,
    "helix": helix_scenario,
}


def preset(name: str, seed: int = 0) -> MixerScenario:
    try:
        return PRESETS[name](seed)
    except KeyError:
        raise InvalidScenario(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def with_seed(scenario: MixerScenario, seed: int) -> MixerScenario:
    return replace(scenario, seed=seed)
