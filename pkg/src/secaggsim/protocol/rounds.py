"""Round configuration and orchestration of the three protocols.

A round driver owns the synchrony structure: it asks live clients for
their stage-opening messages, pushes everything through the bus (which
meters bytes and applies stage-atomic dropout), feeds deliveries back
into client state machines, and injects the bus-issued contributor set
between the input and output halves of each protocol.

The bus is duck-typed; any object with the MessageBus surface works, so
the protocol layer stays independent of the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from ..errors import (
    BadPacking,
    BadThreshold,
    InsufficientContributors,
    InsufficientSurvivors,
)
from ..field import DEFAULT_FIELD, FieldPrime, FixedPointConfig
from ..masking import DH_GROUP_2048, DhParams, LweParams, lwe_matrix_ops
from .clients import AggregateResult, LweClient, NvClient, PwClient
from .messages import BUS_SENDER, ContributorSetPayload, MsgKind, ProtocolMessage

NV = "nv"
LWE = "lwe"
PW = "pw"

# Ordered stage labels per protocol; dropout is stage-atomic against these.
STAGES = {
    NV: ("input_shares", "aggregate_shares"),
    LWE: ("secret_shares", "masked_vector", "sum_shares"),
    PW: ("setup", "masked_vector", "unmask_shares"),
}

DEFAULT_PACK_WIDTH = 64


def default_threshold(n: int) -> int:
    return n // 2 + 1


@dataclass
class RoundConfig:
    """Everything one aggregation round needs.

    t defaults to floor(n/2)+1.  The pack width defaults to 64 but is
    clamped so that reconstruction stays possible with planned_dropouts
    clients gone: k <= n - planned_dropouts - t + 1 (floor 1).  An
    explicitly given k is honored and only validated against n >= t+k-1.
    """

    protocol: str
    n: int
    m: int
    t: int | None = None
    k: int | None = None
    field: FieldPrime = DEFAULT_FIELD
    fp: FixedPointConfig = dc_field(default_factory=FixedPointConfig)
    lwe: LweParams | None = None
    dh: DhParams | None = None
    personal_mask: bool = True
    planned_dropouts: int = 0

    def __post_init__(self):
        if self.protocol not in STAGES:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.n < 2:
            raise ValueError("need at least 2 clients")
        if self.t is None:
            self.t = default_threshold(self.n)
        if not 0 < self.t <= self.n:
            raise BadThreshold(f"need 0 < t <= n, got t={self.t}, n={self.n}")
        if self.protocol == PW and (self.n < 3 or self.t < 2):
            raise BadThreshold("pairwise masking needs n >= 3 and t >= 2")
        if self.k is None:
            self.k = max(1, min(DEFAULT_PACK_WIDTH,
                                self.n - self.planned_dropouts - self.t + 1))
        if self.n < self.t + self.k - 1:
            raise BadPacking(
                f"pack width k={self.k} needs n >= t+k-1 (n={self.n}, t={self.t})")
        if self.protocol == LWE and self.lwe is None:
            self.lwe = LweParams()
        if self.protocol == PW and self.dh is None:
            self.dh = DH_GROUP_2048
        self.fp.check_capacity(self.n, self.field)

    @property
    def stages(self) -> tuple[str, ...]:
        return STAGES[self.protocol]


def contributor_set(delivery_record, stage: str) -> tuple[int, ...]:
    """The agreed round membership: clients whose stage-critical message
    reached every survivor.  Dropout is stage-atomic, so this is exactly
    the set of senders at that stage -- identical at every client."""
    return tuple(sorted(delivery_record[stage]))


def client_on_message(client, msg: ProtocolMessage):
    """Functional view of the client transition: (state, msg) -> outbound.

    The state object is mutated in place and returned for convenience.
    """
    return client, client.on_message(msg)


def _deliver(clients, delivered) -> list:
    out = []
    for rcpt, msg in delivered:
        out.extend(clients[rcpt].on_message(msg))
    return out


def _contributor_msgs(bus, contributors, stage):
    payload = ContributorSetPayload(tuple(contributors))
    msg = ProtocolMessage(kind=MsgKind.CONTRIBUTOR_SET, sender=BUS_SENDER,
                          round=bus.round, payload=payload)
    return bus.control(stage, msg)


def _finalize(clients, bus, cfg) -> AggregateResult:
    live = bus.live_at_end()
    for c in clients:
        bus.record_field_ops(c.id, c.ops)
    if not live:
        raise InsufficientSurvivors("no client survived the round")
    results = [clients[i].finalize() for i in live]
    first = results[0]
    for r in results[1:]:
        # every survivor must land on the bit-identical aggregate
        assert r.contributors == first.contributors
        assert np.array_equal(r.field_sum, first.field_sum)
    return first


def _check_inputs(inputs, cfg: RoundConfig):
    if len(inputs) != cfg.n:
        raise ValueError(f"{len(inputs)} inputs for n={cfg.n} clients")


def nv_round(inputs, cfg: RoundConfig, bus) -> AggregateResult:
    """Share-vector aggregation: packed input shares out, contributor set
    announced, aggregated shares broadcast, reconstruct and average."""
    _check_inputs(inputs, cfg)
    st_input, st_agg = cfg.stages
    clients = [NvClient(i, cfg, inputs[i], bus.client_rng(i), bus.round)
               for i in range(cfg.n)]
    outbox = []
    for c in clients:
        if bus.alive(c.id, st_input):
            outbox.extend(c.start())
    pending = _deliver(clients, bus.exchange(st_input, outbox))
    contributors = contributor_set(bus.delivery_record(), st_input)
    if not contributors:
        raise InsufficientContributors("every client dropped before sharing")
    pending += _deliver(clients, _contributor_msgs(bus, contributors, st_agg))
    _deliver(clients, bus.exchange(st_agg, pending))
    return _finalize(clients, bus, cfg)


def lwe_round(inputs, cfg: RoundConfig, bus) -> AggregateResult:
    """LWE-masked aggregation: secret vectors are Shamir-shared, masked
    vectors broadcast, and only the summed secret is ever reconstructed."""
    _check_inputs(inputs, cfg)
    st_shares, st_masked, st_sum = cfg.stages
    matrix_ops = lwe_matrix_ops(cfg.lwe, cfg.m, cfg.field)
    clients = [LweClient(i, cfg, inputs[i], bus.client_rng(i), matrix_ops,
                         bus.round)
               for i in range(cfg.n)]
    outbox = []
    for c in clients:
        if bus.alive(c.id, st_shares):
            outbox.extend(c.start())
    _deliver(clients, bus.exchange(st_shares, outbox))
    outbox = []
    for c in clients:
        if bus.alive(c.id, st_masked):
            outbox.extend(c.emit_masked())
    _deliver(clients, bus.exchange(st_masked, outbox))
    contributors = contributor_set(bus.delivery_record(), st_masked)
    if not contributors:
        raise InsufficientContributors("no masked vector was delivered")
    pending = _deliver(clients, _contributor_msgs(bus, contributors, st_sum))
    _deliver(clients, bus.exchange(st_sum, pending))
    return _finalize(clients, bus, cfg)


def pw_round(inputs, cfg: RoundConfig, bus) -> AggregateResult:
    """Pairwise-masked aggregation with dropout recovery: reconstruct the
    DH key of clients that vanished after setup, the personal seed of
    everyone whose masked vector counted -- never both."""
    _check_inputs(inputs, cfg)
    st_setup, st_masked, st_unmask = cfg.stages
    clients = [PwClient(i, cfg, inputs[i], bus.client_rng(i), bus.round)
               for i in range(cfg.n)]
    outbox = []
    for c in clients:
        if bus.alive(c.id, st_setup):
            outbox.extend(c.start())
    _deliver(clients, bus.exchange(st_setup, outbox))
    outbox = []
    for c in clients:
        if bus.alive(c.id, st_masked):
            outbox.extend(c.emit_masked())
    _deliver(clients, bus.exchange(st_masked, outbox))
    contributors = contributor_set(bus.delivery_record(), st_masked)
    if not contributors:
        raise InsufficientContributors("no masked vector was delivered")
    pending = _deliver(clients, _contributor_msgs(bus, contributors, st_unmask))
    _deliver(clients, bus.exchange(st_unmask, pending))
    return _finalize(clients, bus, cfg)


ROUND_FNS = {NV: nv_round, LWE: lwe_round, PW: pw_round}


def run_round(inputs, cfg: RoundConfig, bus) -> AggregateResult:
    return ROUND_FNS[cfg.protocol](inputs, cfg, bus)
