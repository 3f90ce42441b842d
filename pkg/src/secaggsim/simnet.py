"""Deterministic in-process message bus with dropout injection and meters.

Logical time only: dropout here is step-granular, so a latency model
would add noise without adding coverage.  A client scheduled to
drop at stage S sends zero bytes at stages >= S and receives nothing from
stage S on; bytes addressed to it are still counted ("addressed to
dropped") so complexity comparisons stay well-defined under dropout.

Seed derivation: client i's generator is seeded with
SHA-256(master_seed || "client" || i), the dropout schedule with
SHA-256(master_seed || "dropout"), and the LWE public matrix with
SHA-256(master_seed || "A-matrix").  Identical SimConfig => byte-identical
SimReport, wall_time aside.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .errors import ProtocolError, TooManyDropouts
from .field import FieldPrime, FixedPointConfig, elems_to_bytes, encode_vec
from .masking import LweParams
from .protocol.clients import AggregateResult, OpsTally
from .protocol.messages import (
    HEADER_BYTES,
    MsgKind,
    ProtocolMessage,
    SECRET_DH_KEY,
    SHARE_VECTOR_HEADER_BYTES,
    unmask_entry_bytes,
)
from .protocol.rounds import LWE, NV, PW, ROUND_FNS, STAGES, RoundConfig
from .shamir import chunk_bits_for

CONTROL_STAGE = "control"
UNIFORM_POLICY = "uniform"


def _derive_seed(master_seed: int, *parts: bytes) -> int:
    h = hashlib.sha256()
    h.update(int(master_seed).to_bytes(8, "big", signed=False))
    for p in parts:
        h.update(p)
    return int.from_bytes(h.digest(), "big")


def client_seed(master_seed: int, cid: int) -> int:
    return _derive_seed(master_seed, b"client", cid.to_bytes(4, "big"))


def schedule_seed(master_seed: int) -> int:
    return _derive_seed(master_seed, b"dropout")


def matrix_seed(master_seed: int) -> bytes:
    h = hashlib.sha256()
    h.update(int(master_seed).to_bytes(8, "big", signed=False))
    h.update(b"A-matrix")
    return h.digest()


# --- dropout schedule ---------------------------------------------------------


@dataclass(frozen=True)
class DropoutSchedule:
    """Which clients silently stop, and at which protocol stage."""

    stages: dict[int, str]

    @property
    def dropped(self) -> tuple[int, ...]:
        return tuple(sorted(self.stages))

    def to_dict(self) -> dict:
        return {str(cid): st for cid, st in sorted(self.stages.items())}


def make_dropout_schedule(seed: int, n: int, rate: float, policy: str,
                          stage_names: tuple[str, ...],
                          min_survivors: int | None = None) -> DropoutSchedule:
    """Sample floor(rate*n) distinct clients and a stop stage for each,
    deterministically in the seed."""
    if not 0 <= rate <= 1:
        raise ValueError("dropout rate must be in [0, 1]")
    count = int(rate * n)
    if min_survivors is not None and n - count < min_survivors:
        raise TooManyDropouts(
            f"{count} dropouts leave {n - count} < {min_survivors} survivors")
    rng = np.random.Generator(np.random.PCG64(seed))
    dropped = sorted(int(c) for c in rng.choice(n, size=count, replace=False))
    stages = {}
    for cid in dropped:
        if policy == UNIFORM_POLICY:
            stages[cid] = stage_names[int(rng.integers(0, len(stage_names)))]
        else:
            if policy not in stage_names:
                raise ValueError(f"unknown stage {policy!r}; "
                                 f"choose from {stage_names} or 'uniform'")
            stages[cid] = policy
    return DropoutSchedule(stages=stages)


# --- metrics -------------------------------------------------------------------


@dataclass
class Metrics:
    per_client: dict[int, dict] = dc_field(default_factory=dict)
    per_stage: dict[str, dict] = dc_field(default_factory=dict)
    field_ops: dict[int, dict] = dc_field(default_factory=dict)

    def _client(self, cid: int) -> dict:
        return self.per_client.setdefault(
            cid, {"messages_sent": 0, "bytes_sent": 0, "bytes_received": 0})

    def _stage(self, stage: str) -> dict:
        return self.per_stage.setdefault(
            stage, {"messages_sent": 0, "bytes_sent": 0,
                    "bytes_delivered": 0, "bytes_to_dropped": 0})

    def record_send(self, stage: str, sender: int, nbytes: int,
                    delivered: bool, recipient: int):
        row = self._stage(stage)
        row["messages_sent"] += 1
        row["bytes_sent"] += nbytes
        if sender >= 0:
            c = self._client(sender)
            c["messages_sent"] += 1
            c["bytes_sent"] += nbytes
        if delivered:
            row["bytes_delivered"] += nbytes
            if sender >= 0:
                self._client(recipient)["bytes_received"] += nbytes
        else:
            row["bytes_to_dropped"] += nbytes

    def record_control(self, nbytes: int, delivered: bool):
        row = self._stage(CONTROL_STAGE)
        row["messages_sent"] += 1
        row["bytes_sent"] += nbytes
        if delivered:
            row["bytes_delivered"] += nbytes
        else:
            row["bytes_to_dropped"] += nbytes

    @property
    def total_messages(self) -> int:
        return sum(r["messages_sent"] for r in self.per_stage.values())

    @property
    def total_bytes(self) -> int:
        return sum(r["bytes_sent"] for r in self.per_stage.values())

    @property
    def total_field_ops(self) -> int:
        return sum(sum(ops.values()) for ops in self.field_ops.values())

    @property
    def control_messages(self) -> int:
        return self.per_stage.get(CONTROL_STAGE, {}).get("messages_sent", 0)

    @property
    def control_bytes(self) -> int:
        return self.per_stage.get(CONTROL_STAGE, {}).get("bytes_sent", 0)

    def conservation_holds(self) -> bool:
        return all(r["bytes_sent"] == r["bytes_delivered"] + r["bytes_to_dropped"]
                   for r in self.per_stage.values())

    def to_dict(self) -> dict:
        return {
            "per_client": {str(c): dict(v)
                           for c, v in sorted(self.per_client.items())},
            "per_stage": {s: dict(v)
                          for s, v in sorted(self.per_stage.items())},
            "field_ops": {str(c): dict(v)
                          for c, v in sorted(self.field_ops.items())},
            "totals": {
                "messages": self.total_messages,
                "bytes": self.total_bytes,
                "field_ops": self.total_field_ops,
            },
        }


# --- the bus -------------------------------------------------------------------


class MessageBus:
    """Synchronous, stage-stepped delivery with per-sender FIFO order.

    Delivery order is fully deterministic: messages of one stage are
    processed sorted by (sender, kind, recipient).  Clients may be run in
    any order by a parallel driver as long as that delivery order is kept;
    this implementation is sequential.
    """

    def __init__(self, cfg: RoundConfig, master_seed: int,
                 schedule: DropoutSchedule | None = None,
                 record_transcript: bool = False):
        self.cfg = cfg
        self.n = cfg.n
        self.master_seed = master_seed
        self.schedule = schedule or DropoutSchedule(stages={})
        self.stage_order = cfg.stages
        self.metrics = Metrics()
        self.round = 0
        self.transcript: list[tuple[int, ProtocolMessage]] = []
        self._record = record_transcript
        self._rngs = {
            i: np.random.Generator(np.random.PCG64(client_seed(master_seed, i)))
            for i in range(cfg.n)
        }
        self._drop_idx = {
            cid: self.stage_order.index(st)
            for cid, st in self.schedule.stages.items()
        }
        self._senders: dict[str, set[int]] = {}

    def next_round(self):
        self.round += 1
        self._senders = {}

    def client_rng(self, cid: int) -> np.random.Generator:
        return self._rngs[cid]

    def _stage_idx(self, stage: str) -> int:
        return self.stage_order.index(stage)

    def alive(self, cid: int, stage: str) -> bool:
        idx = self._drop_idx.get(cid)
        return idx is None or self._stage_idx(stage) < idx

    def live_at(self, stage: str) -> list[int]:
        return [i for i in range(self.n) if self.alive(i, stage)]

    def live_at_end(self) -> list[int]:
        return [i for i in range(self.n) if i not in self._drop_idx]

    def exchange(self, stage: str, outbox) -> list[tuple[int, ProtocolMessage]]:
        """Deliver one stage's traffic; returns (recipient, message) pairs
        in deterministic order."""
        delivered = []
        senders = self._senders.setdefault(stage, set())
        for rcpt, msg in sorted(outbox, key=lambda p: (p[1].sender,
                                                       int(p[1].kind), p[0])):
            if not self.alive(msg.sender, stage):
                continue  # dropped clients send nothing from their stage on
            senders.add(msg.sender)
            ok = self.alive(rcpt, stage)
            self.metrics.record_send(stage, msg.sender, msg.wire_size,
                                     ok, rcpt)
            if ok:
                delivered.append((rcpt, msg))
                if self._record:
                    self.transcript.append((rcpt, msg))
        return delivered

    def control(self, stage: str, msg: ProtocolMessage):
        """Bus-issued broadcast (contributor set), metered separately."""
        delivered = []
        size = msg.wire_size
        for rcpt in range(self.n):
            ok = self.alive(rcpt, stage)
            self.metrics.record_control(size, ok)
            if ok:
                delivered.append((rcpt, msg))
                if self._record:
                    self.transcript.append((rcpt, msg))
        return delivered

    def delivery_record(self) -> dict[str, tuple[int, ...]]:
        return {st: tuple(sorted(s)) for st, s in self._senders.items()}

    def record_field_ops(self, cid: int, ops: OpsTally):
        row = self.metrics.field_ops.setdefault(
            cid, {"add": 0, "mul": 0, "inv": 0})
        row["add"] += ops.add
        row["mul"] += ops.mul
        row["inv"] += ops.inv


# --- simulation ----------------------------------------------------------------


@dataclass
class SimConfig:
    """Simulation parameters.  A dropout rate that leaves fewer than t
    survivors is allowed through: the round then fails with
    InsufficientSurvivors in the report instead of refusing to start."""

    round_cfg: RoundConfig
    master_seed: int = 0
    dropout_rate: float = 0.0
    dropout_stage_policy: str = UNIFORM_POLICY
    rounds: int = 1

    def survivors_floor_ok(self) -> bool:
        n, t = self.round_cfg.n, self.round_cfg.t
        return n - int(self.dropout_rate * n) >= t


@dataclass
class SimReport:
    result: AggregateResult | None
    failure: str | None
    metrics: Metrics
    schedule: DropoutSchedule
    wall_time: float
    config: dict
    inputs: list | None = None        # kept only on request, for scanners
    transcript: list | None = None

    def to_dict(self, max_inline_vector: int = 1024) -> dict:
        if self.result is None:
            result = None
        else:
            avg = self.result.average
            if len(avg) <= max_inline_vector:
                avg_repr = [float(v) for v in avg]
            else:
                avg_repr = {
                    "len": len(avg),
                    "sha256": hashlib.sha256(
                        np.asarray(avg, dtype="<f8").tobytes()).hexdigest(),
                    "head": [float(v) for v in avg[:8]],
                }
            result = {
                "average": avg_repr,
                "contributors": list(self.result.contributors),
                "exact": self.result.exact,
                "noise_sigma_effective": self.result.noise_sigma_effective,
            }
        return {
            "result": result,
            "failure": self.failure,
            "metrics": self.metrics.to_dict(),
            "schedule": self.schedule.to_dict(),
            "config": self.config,
            "wall_time": self.wall_time,
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=indent)


def _config_dict(cfg: RoundConfig, sim: SimConfig) -> dict:
    out = {
        "protocol": cfg.protocol, "n": cfg.n, "t": cfg.t, "m": cfg.m,
        "k": cfg.k, "q": cfg.field.q, "frac_bits": cfg.fp.frac_bits,
        "clip_magnitude": cfg.fp.clip_magnitude,
        "master_seed": sim.master_seed, "dropout_rate": sim.dropout_rate,
        "dropout_stage_policy": sim.dropout_stage_policy,
        "rounds": sim.rounds,
    }
    if cfg.protocol == LWE:
        out["n_lwe"] = cfg.lwe.n_lwe
        out["sigma"] = cfg.lwe.sigma
        out["matrix_seed"] = cfg.lwe.matrix_seed.hex()
    if cfg.protocol == PW:
        out["dh_bits"] = cfg.dh.p.bit_length()
        out["personal_mask"] = cfg.personal_mask
    return out


def run_simulation(cfg: SimConfig, keep_transcript: bool = False) -> SimReport:
    """Execute `rounds` aggregation rounds under the dropout schedule.

    Inputs are synthetic: each client's update is drawn uniformly from
    [-1, 1]^m from its own seeded generator at the start of every round.
    Protocol failures land in the report; they do not raise.
    """
    rc = cfg.round_cfg
    if rc.protocol == LWE and rc.lwe.matrix_seed == bytes(32):
        # default sentinel: derive the public matrix seed from the master
        rc = replace(rc, lwe=LweParams(
            n_lwe=rc.lwe.n_lwe, sigma=rc.lwe.sigma,
            matrix_seed=matrix_seed(cfg.master_seed)))
    schedule = make_dropout_schedule(
        schedule_seed(cfg.master_seed), rc.n, cfg.dropout_rate,
        cfg.dropout_stage_policy, rc.stages)
    bus = MessageBus(rc, cfg.master_seed, schedule,
                     record_transcript=keep_transcript)
    round_fn = ROUND_FNS[rc.protocol]
    result = None
    failure = None
    inputs = None
    start = time.perf_counter()
    for r in range(cfg.rounds):
        inputs = [bus.client_rng(i).uniform(-1.0, 1.0, size=rc.m)
                  for i in range(rc.n)]
        try:
            result = round_fn(inputs, rc, bus)
        except ProtocolError as exc:
            result = None
            failure = f"{type(exc).__name__}: {exc}"
            break
        if r + 1 < cfg.rounds:
            bus.next_round()
    wall = time.perf_counter() - start
    return SimReport(
        result=result, failure=failure, metrics=bus.metrics,
        schedule=schedule, wall_time=wall, config=_config_dict(rc, cfg),
        inputs=inputs if keep_transcript else None,
        transcript=bus.transcript if keep_transcript else None)


# --- closed-form meter expectations ---------------------------------------------


def meter_expectations(cfg: RoundConfig, rounds: int = 1) -> dict:
    """Expected per-stage message and byte counts for a no-dropout round,
    straight from the wire format.  Measured metrics must match exactly."""
    n, m = cfg.n, cfg.m
    pair_msgs = n * (n - 1)
    hdr = HEADER_BYTES

    def sv_payload(length: int) -> int:
        chunks = max(1, -(-length // cfg.k))
        return SHARE_VECTOR_HEADER_BYTES + 8 * chunks

    def vec_payload(length: int) -> int:
        return 4 + 8 * length

    control_payload = 4 + 4 * n
    stages: dict[str, dict] = {}

    def put(stage: str, messages: int, payload: int):
        row = stages.setdefault(stage, {"messages_sent": 0, "bytes_sent": 0})
        row["messages_sent"] += messages
        row["bytes_sent"] += messages * (hdr + payload)

    if cfg.protocol == NV:
        put("input_shares", pair_msgs, sv_payload(m))
        put(CONTROL_STAGE, n, control_payload)
        put("aggregate_shares", pair_msgs, sv_payload(m))
    elif cfg.protocol == LWE:
        put("secret_shares", pair_msgs, sv_payload(cfg.lwe.n_lwe))
        put("masked_vector", pair_msgs, vec_payload(m))
        put(CONTROL_STAGE, n, control_payload)
        put("sum_shares", pair_msgs, sv_payload(cfg.lwe.n_lwe))
    elif cfg.protocol == PW:
        cb = chunk_bits_for(cfg.field)
        key_chunks = max(1, -(-cfg.dh.subgroup_order.bit_length() // cb))
        seed_chunks = max(1, -(-256 // cb))
        put("setup", pair_msgs, cfg.dh.residue_bytes)
        put("setup", pair_msgs, 4 + 8 * key_chunks)
        if cfg.personal_mask:
            put("setup", pair_msgs, 4 + 8 * seed_chunks)
        put("masked_vector", pair_msgs, vec_payload(m))
        put(CONTROL_STAGE, n, control_payload)
        if cfg.personal_mask:
            unmask_payload = 4 + n * unmask_entry_bytes(seed_chunks)
            put("unmask_shares", pair_msgs, unmask_payload)
    for row in stages.values():
        row["messages_sent"] *= rounds
        row["bytes_sent"] *= rounds
    total_msgs = sum(r["messages_sent"] for r in stages.values())
    total_bytes = sum(r["bytes_sent"] for r in stages.values())
    return {
        "per_stage": stages,
        "totals": {"messages": total_msgs, "bytes": total_bytes},
    }


def metrics_match_expectations(metrics: Metrics, expected: dict) -> bool:
    """Exact comparison for no-dropout runs."""
    for stage, row in expected["per_stage"].items():
        got = metrics.per_stage.get(stage)
        if got is None:
            return False
        if got["messages_sent"] != row["messages_sent"]:
            return False
        if got["bytes_sent"] != row["bytes_sent"]:
            return False
        if got["bytes_delivered"] != got["bytes_sent"]:
            return False
    return (metrics.total_messages == expected["totals"]["messages"]
            and metrics.total_bytes == expected["totals"]["bytes"])


# --- transcript hygiene ----------------------------------------------------------


def coalition_view(report: SimReport, coalition: set[int]) -> dict:
    """What a semi-honest coalition learns from delivered traffic.

    Counts distinct share points visible per (secret kind, owner) and
    scans payload bytes for any honest client's unmasked encoded input.
    Secrets the protocol opens on purpose (the DH key of a client that
    dropped after setup, the personal seed of a contributor) are tallied
    under `opened`; everything else must stay below t shares.
    """
    if report.transcript is None or report.inputs is None:
        raise ValueError("run the simulation with keep_transcript=True")
    cfg = report.config
    n = cfg["n"]
    contributors = set(report.result.contributors) if report.result else set()
    stage_order = STAGES[cfg["protocol"]]
    setup_complete = {
        i for i in range(n)
        if report.schedule.stages.get(i) is None
        or stage_order.index(report.schedule.stages[i]) >= 1
    }
    opened_kinds = ({("dh_key", k) for k in setup_complete - contributors}
                    | {("seed", i) for i in contributors})
    share_points: dict[tuple[str, int], set[int]] = {}
    raw_input_hits = []
    fld = FieldPrime(cfg["q"])
    fp = FixedPointConfig(cfg["frac_bits"], cfg["clip_magnitude"])
    encoded = {i: elems_to_bytes(encode_vec(report.inputs[i], fp, fld))
               for i in range(n) if i not in coalition}

    def saw(kind: str, owner: int, x: int):
        share_points.setdefault((kind, owner), set()).add(x)

    for rcpt, msg in report.transcript:
        if rcpt not in coalition:
            continue
        if msg.kind == MsgKind.INPUT_SHARE_VECTOR:
            saw("input", msg.sender, msg.payload.sv.x)
        elif msg.kind == MsgKind.KEY_SHARE:
            if cfg["protocol"] == LWE:
                saw("lwe_s", msg.sender, msg.payload.sv.x)
            else:
                saw("dh_key", msg.sender, rcpt + 1)
        elif msg.kind == MsgKind.PERSONAL_SEED_SHARE:
            saw("seed", msg.sender, rcpt + 1)
        elif msg.kind == MsgKind.UNMASK_SHARE:
            for e in msg.payload.entries:
                kind = "dh_key" if e.secret_type == SECRET_DH_KEY else "seed"
                saw(kind, e.target, msg.sender + 1)
        elif msg.kind in (MsgKind.MASKED_VECTOR, MsgKind.AGGREGATED_SHARE_VECTOR):
            body = msg.to_bytes()
            for owner, blob in encoded.items():
                if blob and blob in body:
                    raw_input_hits.append((owner, msg.kind.name))
    private = {}
    opened = {}
    for key, xs in share_points.items():
        kind, owner = key
        if owner in coalition:
            continue  # their own secrets are theirs to know
        bucket = opened if key in opened_kinds else private
        bucket[key] = len(xs)
    return {
        "private_share_counts": private,
        "opened_share_counts": opened,
        "raw_input_hits": raw_input_hits,
        "threshold": cfg["t"],
    }
