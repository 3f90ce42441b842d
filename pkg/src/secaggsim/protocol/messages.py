"""Typed protocol messages and their bit-exact wire encoding.

Wire layout: 1-byte kind, 4-byte sender, 4-byte round, 4-byte payload
length, then the payload.  Field elements are 8-byte big-endian words;
group residues are fixed-width big-endian.  The byte meters in the
simulator hang off these encodings, so they are part of the contract.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field
from enum import IntEnum

import numpy as np

from ..field import elems_to_bytes
from ..shamir import ShareVector

# Control messages are issued by the bus, not by a client.
BUS_SENDER = 0xFFFFFFFF

HEADER_BYTES = 13
SHARE_VECTOR_HEADER_BYTES = 16


class MsgKind(IntEnum):
    PUB_KEY = 1
    KEY_SHARE = 2
    PERSONAL_SEED_SHARE = 3
    INPUT_SHARE_VECTOR = 4
    MASKED_VECTOR = 5
    AGGREGATED_SHARE_VECTOR = 6
    SECRET_SUM_SHARE = 7
    UNMASK_SHARE = 8
    CONTRIBUTOR_SET = 9


@dataclass(frozen=True)
class PubKeyPayload:
    residue: int
    width: int

    def to_bytes(self) -> bytes:
        return self.residue.to_bytes(self.width, "big")


@dataclass(frozen=True)
class ShareVectorPayload:
    """Per-recipient share of a vector: 16-byte header (chunk count,
    vector length, t, k as 4-byte big-endian each) then one 8-byte word
    per chunk.  The evaluation point is implied by the recipient."""

    sv: ShareVector

    def to_bytes(self) -> bytes:
        head = struct.pack(">IIII", self.sv.chunk_count, self.sv.vec_len,
                           self.sv.t, self.sv.k)
        body = b"".join(v.to_bytes(8, "big") for v in self.sv.values)
        return head + body


@dataclass(frozen=True)
class ChunkSharePayload:
    """Share of a chunked wide integer (a DH secret key or a 32-byte
    seed) at the recipient's implicit point: 4-byte chunk count then
    8 bytes per chunk."""

    chunks: tuple[int, ...]

    def to_bytes(self) -> bytes:
        return struct.pack(">I", len(self.chunks)) + b"".join(
            c.to_bytes(8, "big") for c in self.chunks)


@dataclass(frozen=True)
class VectorPayload:
    """A full field vector (masked model update): 4-byte length then
    8 bytes per element."""

    vec: np.ndarray

    def to_bytes(self) -> bytes:
        return struct.pack(">I", len(self.vec)) + elems_to_bytes(self.vec)


SECRET_DH_KEY = 0
SECRET_PERSONAL_SEED = 1


@dataclass(frozen=True)
class UnmaskEntry:
    target: int
    secret_type: int  # SECRET_DH_KEY or SECRET_PERSONAL_SEED
    chunks: tuple[int, ...]


@dataclass(frozen=True)
class UnmaskPayload:
    """The sender's stored shares for every secret being opened: 4-byte
    entry count, then per entry 4-byte target id, 1-byte secret type,
    4-byte chunk count and 8 bytes per chunk."""

    entries: tuple[UnmaskEntry, ...]

    def to_bytes(self) -> bytes:
        parts = [struct.pack(">I", len(self.entries))]
        for e in self.entries:
            parts.append(struct.pack(">IBI", e.target, e.secret_type,
                                     len(e.chunks)))
            parts.extend(c.to_bytes(8, "big") for c in e.chunks)
        return b"".join(parts)


@dataclass(frozen=True)
class ContributorSetPayload:
    ids: tuple[int, ...]

    def to_bytes(self) -> bytes:
        return struct.pack(">I", len(self.ids)) + b"".join(
            struct.pack(">I", i) for i in self.ids)


@dataclass
class ProtocolMessage:
    kind: MsgKind
    sender: int
    round: int
    payload: object
    _wire: bytes | None = dc_field(default=None, repr=False, compare=False)

    def to_bytes(self) -> bytes:
        # broadcast payloads serialize once and share the result
        if self._wire is None:
            body = self.payload.to_bytes()
            self._wire = struct.pack(">BIII", int(self.kind), self.sender,
                                     self.round, len(body)) + body
        return self._wire

    @property
    def wire_size(self) -> int:
        return len(self.to_bytes())


def unmask_entry_bytes(chunk_count: int) -> int:
    """Wire size of one unmask entry (metering helper)."""
    return 4 + 1 + 4 + 8 * chunk_count
