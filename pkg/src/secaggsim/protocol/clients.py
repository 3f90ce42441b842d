"""Per-client state machines for the three aggregation protocols.

Each client is single-threaded and event-driven: peer traffic and the
bus-issued contributor set arrive through on_message, which returns any
outbound messages the event triggers.  Stage starts that in a real
deployment would come from a synchrony barrier (begin masking, begin the
round) are explicit method calls made by the round driver.

Clients never see who dropped except through the contributor set, keep
per-sender buffers separate until that set arrives, and reject duplicate
or out-of-stage messages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import (
    DuplicateSender,
    InsufficientContributors,
    InsufficientSurvivors,
    MissingKeyShares,
    SafetyViolation,
    UnexpectedMessage,
)
from ..field import add_mod, decode_vec, encode_vec, sub_mod, sum_mod
from ..masking import (
    TAG_PAIRWISE,
    TAG_PERSONAL,
    dh_agree,
    dh_keygen,
    gaussian_error,
    stream_expand,
)
from ..shamir import (
    add_share_vectors,
    reconstruct_integer,
    reconstruct_vector,
    share_integer,
    share_vector,
)
from .messages import (
    SECRET_DH_KEY,
    SECRET_PERSONAL_SEED,
    ChunkSharePayload,
    MsgKind,
    ProtocolMessage,
    PubKeyPayload,
    ShareVectorPayload,
    UnmaskEntry,
    UnmaskPayload,
    VectorPayload,
)

PERSONAL_SEED_BITS = 256


class OpsTally:
    """Analytic count of the field operations a client performs.

    Counts reflect the logical work of the protocol step; shared caches in
    the implementation do not reduce them.
    """

    __slots__ = ("add", "mul", "inv")

    def __init__(self):
        self.add = 0
        self.mul = 0
        self.inv = 0

    def as_dict(self) -> dict:
        return {"add": self.add, "mul": self.mul, "inv": self.inv}


@dataclass
class AggregateResult:
    """Outcome of one aggregation round, identical at every survivor."""

    average: np.ndarray
    contributors: tuple[int, ...]
    exact: bool
    field_sum: np.ndarray
    noise_sigma_effective: float | None = None


class BaseClient:
    def __init__(self, cid: int, cfg, w, rng, round_index: int = 0):
        self.id = cid
        self.cfg = cfg
        self.rng = rng
        self.round = round_index
        self.ops = OpsTally()
        self.contributors: tuple[int, ...] | None = None
        self._seen: set[tuple[MsgKind, int]] = set()
        if w is not None:
            if len(w) != cfg.m:
                raise ValueError(f"input has {len(w)} coords, config says {cfg.m}")
            self.enc_w = encode_vec(w, cfg.fp, cfg.field)

    def _msg(self, kind: MsgKind, payload) -> ProtocolMessage:
        return ProtocolMessage(kind=kind, sender=self.id, round=self.round,
                               payload=payload)

    def _broadcast(self, kind: MsgKind, payload) -> list[tuple[int, ProtocolMessage]]:
        """Same message object (one serialization) to every peer."""
        msg = self._msg(kind, payload)
        return [(j, msg) for j in range(self.cfg.n) if j != self.id]

    def _accept(self, msg: ProtocolMessage, allowed: tuple[MsgKind, ...]):
        if msg.round != self.round:
            raise UnexpectedMessage(
                f"client {self.id}: round {msg.round} != {self.round}")
        if msg.kind not in allowed:
            raise UnexpectedMessage(
                f"client {self.id}: {msg.kind.name} not expected now")
        key = (msg.kind, msg.sender)
        if key in self._seen:
            raise DuplicateSender(
                f"client {self.id}: second {msg.kind.name} from {msg.sender}")
        self._seen.add(key)

    def _set_contributors(self, ids: tuple[int, ...]):
        if not ids:
            raise InsufficientContributors("empty contributor set")
        if self.contributors is not None and self.contributors != ids:
            raise UnexpectedMessage(
                f"client {self.id}: contributor set changed")
        self.contributors = ids


# --- share-vector protocol (plain/packed Shamir) ------------------------------


class NvClient(BaseClient):
    """Algorithm: packed-share the encoded input to everyone, sum the
    received per-sender share vectors over the contributor set, broadcast
    the aggregated share, reconstruct once t+k-1 points are in hand."""

    def __init__(self, cid, cfg, w, rng, round_index: int = 0):
        super().__init__(cid, cfg, w, rng, round_index)
        self._input_shares: dict[int, object] = {}
        self._agg_shares: dict[int, object] = {}
        self._emitted_agg = False

    def start(self) -> list[tuple[int, ProtocolMessage]]:
        cfg = self.cfg
        svs = share_vector([int(v) for v in self.enc_w], cfg.t, cfg.n, cfg.k,
                           self.rng, cfg.field)
        chunks = svs[0].chunk_count
        d = cfg.t + cfg.k - 1
        self.ops.mul += chunks * (cfg.n - cfg.t + 1) * d
        self.ops.add += chunks * (cfg.n - cfg.t + 1) * (d - 1)
        self._input_shares[self.id] = svs[self.id]
        return [(j, self._msg(MsgKind.INPUT_SHARE_VECTOR,
                              ShareVectorPayload(svs[j])))
                for j in range(cfg.n) if j != self.id]

    def on_message(self, msg: ProtocolMessage) -> list[tuple[int, ProtocolMessage]]:
        self._accept(msg, (MsgKind.INPUT_SHARE_VECTOR,
                           MsgKind.CONTRIBUTOR_SET,
                           MsgKind.AGGREGATED_SHARE_VECTOR))
        if msg.kind == MsgKind.INPUT_SHARE_VECTOR:
            if self._emitted_agg:
                raise UnexpectedMessage(
                    f"client {self.id}: input share after aggregation began")
            self._input_shares[msg.sender] = msg.payload.sv
            if len(self._input_shares) == self.cfg.n:
                # full participation: no need to wait for the contributor set
                return self._emit_aggregate(tuple(range(self.cfg.n)))
            return []
        if msg.kind == MsgKind.CONTRIBUTOR_SET:
            self._set_contributors(msg.payload.ids)
            if not self._emitted_agg:
                return self._emit_aggregate(self.contributors)
            return []
        # AGGREGATED_SHARE_VECTOR
        self._agg_shares[msg.sender] = msg.payload.sv
        return []

    def _emit_aggregate(self, contributors) -> list[tuple[int, ProtocolMessage]]:
        self._set_contributors(tuple(sorted(contributors)))
        self._emitted_agg = True
        missing = [s for s in self.contributors if s not in self._input_shares]
        if missing:
            raise MissingKeyShares(
                f"client {self.id}: no input shares from contributors {missing}")
        agg = None
        for s in self.contributors:
            sv = self._input_shares[s]
            agg = sv if agg is None else add_share_vectors(agg, sv)
        self.ops.add += agg.chunk_count * (len(self.contributors) - 1)
        self._agg_shares[self.id] = agg
        return self._broadcast(MsgKind.AGGREGATED_SHARE_VECTOR,
                               ShareVectorPayload(agg))

    def finalize(self) -> AggregateResult:
        cfg = self.cfg
        need = cfg.t + cfg.k - 1
        if self.contributors is None:
            raise InsufficientContributors(f"client {self.id}: no contributor set")
        if len(self._agg_shares) < need:
            raise InsufficientSurvivors(
                f"client {self.id}: {len(self._agg_shares)} aggregated shares"
                f" < t+k-1 = {need}")
        svs = list(self._agg_shares.values())
        vec = reconstruct_vector(svs)
        chunks = svs[0].chunk_count
        self.ops.mul += chunks * cfg.k * need
        self.ops.add += chunks * cfg.k * (need - 1)
        field_sum = np.array(vec, dtype=np.uint64)
        avg = decode_vec(field_sum, len(self.contributors), cfg.fp,
                         cfg.field) / len(self.contributors)
        return AggregateResult(average=avg, contributors=self.contributors,
                               exact=True, field_sum=field_sum)


# --- LWE-masking protocol ------------------------------------------------------


class LweClient(BaseClient):
    """Mask the encoded input with A.s + e, Shamir-share s, and remove
    only the aggregate A.s_sum after reconstructing the summed secret."""

    def __init__(self, cid, cfg, w, rng, matrix_ops, round_index: int = 0):
        super().__init__(cid, cfg, w, rng, round_index)
        self.A = matrix_ops  # shared, read-only
        self.s = rng.integers(0, cfg.field.q, size=cfg.lwe.n_lwe,
                              dtype=np.uint64)
        self._s_shares: dict[int, object] = {}
        self._masked: dict[int, np.ndarray] = {}
        self._sum_shares: dict[int, object] = {}

    def start(self) -> list[tuple[int, ProtocolMessage]]:
        cfg = self.cfg
        svs = share_vector([int(v) for v in self.s], cfg.t, cfg.n, cfg.k,
                           self.rng, cfg.field)
        chunks = svs[0].chunk_count
        d = cfg.t + cfg.k - 1
        self.ops.mul += chunks * (cfg.n - cfg.t + 1) * d
        self.ops.add += chunks * (cfg.n - cfg.t + 1) * (d - 1)
        self._s_shares[self.id] = svs[self.id]
        return [(j, self._msg(MsgKind.KEY_SHARE, ShareVectorPayload(svs[j])))
                for j in range(cfg.n) if j != self.id]

    def emit_masked(self) -> list[tuple[int, ProtocolMessage]]:
        cfg = self.cfg
        e = gaussian_error(cfg.lwe.sigma, cfg.m, self.rng, cfg.field)
        h = add_mod(self.enc_w, self.A.matvec(self.s), cfg.field)
        h = add_mod(h, e, cfg.field)
        self.ops.mul += cfg.m * cfg.lwe.n_lwe
        self.ops.add += cfg.m * (cfg.lwe.n_lwe + 1)
        self._masked[self.id] = h
        return self._broadcast(MsgKind.MASKED_VECTOR, VectorPayload(h))

    def on_message(self, msg: ProtocolMessage) -> list[tuple[int, ProtocolMessage]]:
        self._accept(msg, (MsgKind.KEY_SHARE, MsgKind.MASKED_VECTOR,
                           MsgKind.CONTRIBUTOR_SET, MsgKind.SECRET_SUM_SHARE))
        if msg.kind == MsgKind.KEY_SHARE:
            self._s_shares[msg.sender] = msg.payload.sv
            return []
        if msg.kind == MsgKind.MASKED_VECTOR:
            self._masked[msg.sender] = msg.payload.vec
            return []
        if msg.kind == MsgKind.CONTRIBUTOR_SET:
            self._set_contributors(msg.payload.ids)
            missing = [s for s in self.contributors if s not in self._s_shares]
            if missing:
                raise MissingKeyShares(
                    f"client {self.id}: contributors {missing} never shared s")
            agg = None
            for s in self.contributors:
                sv = self._s_shares[s]
                agg = sv if agg is None else add_share_vectors(agg, sv)
            self.ops.add += agg.chunk_count * (len(self.contributors) - 1)
            self._sum_shares[self.id] = agg
            return self._broadcast(MsgKind.SECRET_SUM_SHARE,
                                   ShareVectorPayload(agg))
        # SECRET_SUM_SHARE
        self._sum_shares[msg.sender] = msg.payload.sv
        return []

    def finalize(self) -> AggregateResult:
        cfg = self.cfg
        need = cfg.t + cfg.k - 1
        if self.contributors is None:
            raise InsufficientContributors(f"client {self.id}: no contributor set")
        if len(self._sum_shares) < need:
            raise InsufficientSurvivors(
                f"client {self.id}: {len(self._sum_shares)} sum shares"
                f" < t+k-1 = {need}")
        missing_h = [s for s in self.contributors if s not in self._masked]
        if missing_h:
            raise InsufficientContributors(
                f"client {self.id}: masked vectors missing from {missing_h}")
        svs = list(self._sum_shares.values())
        s_sum = np.array(reconstruct_vector(svs), dtype=np.uint64)
        chunks = svs[0].chunk_count
        self.ops.mul += chunks * cfg.k * need
        self.ops.add += chunks * cfg.k * (need - 1)
        h_sum = sum_mod((self._masked[s] for s in self.contributors), cfg.field)
        field_sum = sub_mod(h_sum, self.A.matvec(s_sum), cfg.field)
        self.ops.mul += cfg.m * cfg.lwe.n_lwe
        self.ops.add += cfg.m * (cfg.lwe.n_lwe + len(self.contributors))
        n_contrib = len(self.contributors)
        avg = decode_vec(field_sum, n_contrib, cfg.fp, cfg.field) / n_contrib
        return AggregateResult(
            average=avg, contributors=self.contributors, exact=False,
            field_sum=field_sum,
            noise_sigma_effective=cfg.lwe.sigma * float(np.sqrt(n_contrib)))


# --- pairwise-masking protocol --------------------------------------------------


class PwClient(BaseClient):
    """Double masking with DH-derived pairwise streams.

    Pairwise masks cancel between surviving pairs; a personal mask makes
    it safe to include clients that dropped after their masked vector went
    out.  Recovery opens exactly one secret per peer: the DH key of a
    client that never broadcast, or the personal seed of one that did.
    """

    def __init__(self, cid, cfg, w, rng, round_index: int = 0):
        super().__init__(cid, cfg, w, rng, round_index)
        self.keypair = dh_keygen(cfg.dh, rng)
        self.personal_seed = rng.bytes(32) if cfg.personal_mask else None
        self._pks: dict[int, int] = {cid: self.keypair.pk}
        # held shares: my evaluation point of each owner's chunked secret
        self._key_shares: dict[int, tuple[int, ...]] = {}
        self._seed_shares: dict[int, tuple[int, ...]] = {}
        self._masked: dict[int, np.ndarray] = {}
        # opened shares from unmask broadcasts: target -> {x: chunks}
        self._opened: dict[tuple[int, int], dict[int, tuple[int, ...]]] = {}
        self._emitted_unmask = False

    @property
    def _order_bits(self) -> int:
        return self.cfg.dh.subgroup_order.bit_length()

    def start(self) -> list[tuple[int, ProtocolMessage]]:
        cfg = self.cfg
        out = self._broadcast(MsgKind.PUB_KEY,
                              PubKeyPayload(self.keypair.pk,
                                            cfg.dh.residue_bytes))
        key_shares = share_integer(self.keypair.sk, self._order_bits,
                                   cfg.t, cfg.n, self.rng, cfg.field)
        self._key_shares[self.id] = key_shares[self.id][1]
        out += [(j, self._msg(MsgKind.KEY_SHARE,
                              ChunkSharePayload(key_shares[j][1])))
                for j in range(cfg.n) if j != self.id]
        if cfg.personal_mask:
            seed_int = int.from_bytes(self.personal_seed, "big")
            seed_shares = share_integer(seed_int, PERSONAL_SEED_BITS,
                                        cfg.t, cfg.n, self.rng, cfg.field)
            self._seed_shares[self.id] = seed_shares[self.id][1]
            out += [(j, self._msg(MsgKind.PERSONAL_SEED_SHARE,
                                  ChunkSharePayload(seed_shares[j][1])))
                    for j in range(cfg.n) if j != self.id]
        return out

    def emit_masked(self) -> list[tuple[int, ProtocolMessage]]:
        cfg = self.cfg
        y = self.enc_w.copy()
        if cfg.personal_mask:
            y = add_mod(y, stream_expand(self.personal_seed, TAG_PERSONAL,
                                         cfg.m, cfg.field), cfg.field)
            self.ops.add += cfg.m
        for j in sorted(self._pks):
            if j == self.id:
                continue
            seed = dh_agree(self.keypair.sk, self._pks[j], cfg.dh)
            stream = stream_expand(seed, TAG_PAIRWISE, cfg.m, cfg.field)
            if self.id < j:
                y = add_mod(y, stream, cfg.field)
            else:
                y = sub_mod(y, stream, cfg.field)
            self.ops.add += cfg.m
        self._masked[self.id] = y
        return self._broadcast(MsgKind.MASKED_VECTOR, VectorPayload(y))

    def on_message(self, msg: ProtocolMessage) -> list[tuple[int, ProtocolMessage]]:
        self._accept(msg, (MsgKind.PUB_KEY, MsgKind.KEY_SHARE,
                           MsgKind.PERSONAL_SEED_SHARE, MsgKind.MASKED_VECTOR,
                           MsgKind.CONTRIBUTOR_SET, MsgKind.UNMASK_SHARE))
        if msg.kind == MsgKind.PUB_KEY:
            self._pks[msg.sender] = msg.payload.residue
            return []
        if msg.kind == MsgKind.KEY_SHARE:
            self._key_shares[msg.sender] = msg.payload.chunks
            return []
        if msg.kind == MsgKind.PERSONAL_SEED_SHARE:
            if not self.cfg.personal_mask:
                raise UnexpectedMessage(
                    f"client {self.id}: seed share with personal masking off")
            self._seed_shares[msg.sender] = msg.payload.chunks
            return []
        if msg.kind == MsgKind.MASKED_VECTOR:
            self._masked[msg.sender] = msg.payload.vec
            return []
        if msg.kind == MsgKind.CONTRIBUTOR_SET:
            self._set_contributors(msg.payload.ids)
            return self._emit_unmask()
        # UNMASK_SHARE: the sender opens its held share (point sender+1)
        for entry in msg.payload.entries:
            self._opened.setdefault((entry.secret_type, entry.target), {})[
                msg.sender + 1] = entry.chunks
        return []

    def _classify(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """(contributors, dropped-after-setup): the second group finished
        key setup but never broadcast a masked vector."""
        setup_set = set(self._pks)
        dropped = tuple(sorted(setup_set - set(self.contributors)))
        stray = set(self.contributors) - setup_set
        if stray:
            raise MissingKeyShares(
                f"client {self.id}: contributors {sorted(stray)} skipped setup")
        return self.contributors, dropped

    def _emit_unmask(self) -> list[tuple[int, ProtocolMessage]]:
        if self._emitted_unmask:
            return []
        self._emitted_unmask = True
        contributors, dropped = self._classify()
        overlap = set(contributors) & set(dropped)
        if overlap:
            raise SafetyViolation(
                f"client {self.id}: both secrets of {sorted(overlap)} requested")
        entries = []
        for k in dropped:
            entries.append(UnmaskEntry(k, SECRET_DH_KEY, self._key_shares[k]))
        if self.cfg.personal_mask:
            for i in contributors:
                entries.append(UnmaskEntry(i, SECRET_PERSONAL_SEED,
                                           self._seed_shares[i]))
        if not entries:
            return []
        return self._broadcast(MsgKind.UNMASK_SHARE,
                               UnmaskPayload(tuple(entries)))

    def _reconstruct_secret(self, secret_type: int, target: int,
                            total_bits: int) -> int:
        held = (self._key_shares if secret_type == SECRET_DH_KEY
                else self._seed_shares)
        shares = dict(self._opened.get((secret_type, target), {}))
        if target in held:
            shares[self.id + 1] = held[target]
        if len(shares) < self.cfg.t:
            raise InsufficientSurvivors(
                f"client {self.id}: {len(shares)} shares of client {target}'s "
                f"secret < t = {self.cfg.t}")
        self.ops.inv += len(shares)
        return reconstruct_integer(sorted(shares.items()), self.cfg.t,
                                   total_bits, self.cfg.field)

    def finalize(self) -> AggregateResult:
        cfg = self.cfg
        if self.contributors is None:
            raise InsufficientContributors(f"client {self.id}: no contributor set")
        contributors, dropped = self._classify()
        v = sum_mod((self._masked[i] for i in contributors), cfg.field)
        self.ops.add += cfg.m * (len(contributors) - 1)
        if cfg.personal_mask:
            for i in contributors:
                seed_int = self._reconstruct_secret(SECRET_PERSONAL_SEED, i,
                                                    PERSONAL_SEED_BITS)
                seed = seed_int.to_bytes(32, "big")
                v = sub_mod(v, stream_expand(seed, TAG_PERSONAL, cfg.m,
                                             cfg.field), cfg.field)
                self.ops.add += cfg.m
        for k in dropped:
            a_k = self._reconstruct_secret(SECRET_DH_KEY, k, self._order_bits)
            for j in contributors:
                seed = dh_agree(a_k, self._pks[j], cfg.dh)
                stream = stream_expand(seed, TAG_PAIRWISE, cfg.m, cfg.field)
                if j < k:
                    v = sub_mod(v, stream, cfg.field)
                else:
                    v = add_mod(v, stream, cfg.field)
                self.ops.add += cfg.m
        n_contrib = len(contributors)
        avg = decode_vec(v, n_contrib, cfg.fp, cfg.field) / n_contrib
        return AggregateResult(average=avg, contributors=contributors,
                               exact=True, field_sum=v)
