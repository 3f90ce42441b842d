"""Key agreement, deterministic mask streams, and LWE masking primitives.

The mask PRNG is a SHA-256 hash-counter stream so that two parties holding
the same seed derive bit-identical masks (required for pairwise
cancellation and for the metered wire format).  Domain tags ("pairwise",
"personal", "A-matrix") keep the streams of one seed from ever colliding.

The Diffie-Hellman production profile is the 2048-bit MODP safe-prime
group with g=2; a toy profile (p=1019) exists only so subgroup membership
can be checked exhaustively in tests.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidPublicKey
from .field import DEFAULT_FIELD, FieldPrime, add_mod, mul_mod

# RFC 3526 group 14 (2048-bit MODP).  p = 7 mod 8, so g=2 generates the
# prime-order subgroup of size (p-1)/2.
_MODP_2048 = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)


@dataclass(frozen=True)
class DhParams:
    """Cyclic-group parameters: g generates the order-subgroup_order
    subgroup of Z_p*."""

    p: int
    g: int
    subgroup_order: int
    hash_name: str = "sha256"

    @property
    def residue_bytes(self) -> int:
        """Fixed serialization width of group residues."""
        return (self.p.bit_length() + 7) // 8


DH_GROUP_2048 = DhParams(p=_MODP_2048, g=2, subgroup_order=(_MODP_2048 - 1) // 2)

# 1019 = 2*509 + 1 (both prime); 4 = 2^2 is a QR, hence has order 509.
DH_GROUP_TEST = DhParams(p=1019, g=4, subgroup_order=509)


@dataclass(frozen=True)
class KeyPair:
    sk: int
    pk: int


def dh_keygen(params: DhParams, rng) -> KeyPair:
    """Uniform secret in [1, subgroup_order); pk = g^sk mod p."""
    order = params.subgroup_order
    nbytes = (order.bit_length() + 7) // 8
    excess = nbytes * 8 - order.bit_length()
    while True:
        v = int.from_bytes(rng.bytes(nbytes), "big") >> excess
        if 1 <= v < order:
            return KeyPair(sk=v, pk=pow(params.g, v, params.p))


def dh_agree(sk: int, peer_pk: int, params: DhParams) -> bytes:
    """Shared 32-byte mask seed: SHA-256 of the fixed-width big-endian
    encoding of peer_pk^sk mod p.  Symmetric in the two parties."""
    if not 1 < peer_pk < params.p or pow(peer_pk, params.subgroup_order, params.p) != 1:
        raise InvalidPublicKey(f"residue {peer_pk} not in the prime-order subgroup")
    shared = pow(peer_pk, sk, params.p)
    h = hashlib.new(params.hash_name)
    h.update(shared.to_bytes(params.residue_bytes, "big"))
    return h.digest()


# --- deterministic mask streams ----------------------------------------------

TAG_PAIRWISE = b"pairwise"
TAG_PERSONAL = b"personal"
TAG_MATRIX = b"A-matrix"


def stream_expand(seed: bytes, domain_tag: bytes, count: int,
                  field: FieldPrime = DEFAULT_FIELD) -> np.ndarray:
    """Expand a seed into `count` uniform field elements.

    Element i is SHA-256(seed || domain_tag || i as 8-byte big-endian)
    read as a big-endian 256-bit integer, reduced mod q.  Draws at or
    above floor(2^256/q)*q are rejected and redrawn with a retry counter
    byte appended (retry r hashes seed || tag || i || byte(r)), which
    removes the modulo bias while staying deterministic.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    q = field.q
    out = np.empty(count, dtype=np.uint64)
    if count == 0:
        return out
    bound = ((1 << 256) // q) * q
    prefix = hashlib.sha256()
    prefix.update(seed)
    prefix.update(domain_tag)
    copy = prefix.copy
    from_bytes = int.from_bytes
    for i in range(count):
        ctr = i.to_bytes(8, "big")
        h = copy()
        h.update(ctr)
        v = from_bytes(h.digest(), "big")
        retry = 1
        while v >= bound:  # pragma: no cover - probability < q / 2^256
            h = copy()
            h.update(ctr)
            h.update(bytes([retry & 0xFF]))
            v = from_bytes(h.digest(), "big")
            retry += 1
        out[i] = v % q
    return out


# --- LWE masking --------------------------------------------------------------


@dataclass(frozen=True)
class LweParams:
    """Dimensions and noise level for LWE masking.

    n_lwe is the secret length; 710 is the floor the security analysis
    assumes, but smaller values are accepted for desk-scale tests.  sigma
    is the Gaussian parameter of the error, in integer units of the
    encoded (field) domain.  The public matrix is never transmitted: all
    parties regenerate it from matrix_seed.
    """

    n_lwe: int = 710
    sigma: float = 3.0
    matrix_seed: bytes = bytes(32)

    def __post_init__(self):
        if self.n_lwe < 1:
            raise ValueError("n_lwe must be >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


def lwe_matrix(params: LweParams, m: int,
               field: FieldPrime = DEFAULT_FIELD) -> np.ndarray:
    """The public m x n_lwe matrix, expanded row-major from matrix_seed.

    Identical across all clients holding the same seed.
    """
    flat = stream_expand(params.matrix_seed, TAG_MATRIX, m * params.n_lwe, field)
    return flat.reshape(m, params.n_lwe)


def gaussian_error(sigma: float, m: int, rng,
                   field: FieldPrime = DEFAULT_FIELD) -> np.ndarray:
    """Rounded-continuous-Gaussian error vector mapped into F_q.

    Negative draws land in the upper half of the field.  This is a
    rounded N(0, sigma^2), not an exact discrete Gaussian; the
    differential-privacy fidelity gap is documented, sigma stays
    configurable.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    draws = np.rint(rng.normal(0.0, sigma, size=m)).astype(np.int64)
    return (draws % np.int64(field.q)).astype(np.uint64)


def mat_vec_mod(A: np.ndarray, s: np.ndarray,
                field: FieldPrime = DEFAULT_FIELD) -> np.ndarray:
    """Reference exact A @ s mod q using Python integers.

    Independent of the limb-decomposition fast path; kept as the oracle
    side of the dual-route check.
    """
    m, d = A.shape
    if len(s) != d:
        raise DimensionMismatch(f"matrix is {m}x{d}, vector has {len(s)}")
    q = field.q
    s_int = [int(v) for v in s]
    out = np.empty(m, dtype=np.uint64)
    for i in range(m):
        row = A[i]
        out[i] = sum(int(a) * b for a, b in zip(row, s_int)) % q
    return out


def lwe_mask(w: np.ndarray, s: np.ndarray, e: np.ndarray, A: np.ndarray,
             field: FieldPrime = DEFAULT_FIELD) -> np.ndarray:
    """h = w + A.s + e (mod q)."""
    m, d = A.shape
    if len(w) != m or len(e) != m or len(s) != d:
        raise DimensionMismatch(
            f"A is {m}x{d}, w has {len(w)}, e has {len(e)}, s has {len(s)}")
    h = add_mod(w, mat_vec_mod(A, s, field), field)
    return add_mod(h, e, field)


class LweMatrixOps:
    """Exact modular mat-vec products against a fixed public matrix.

    The matrix is split into limbs small enough that float64 BLAS matmuls
    stay exact (limb products summed over the inner dimension never exceed
    2^53), then recombined mod q.  Bit-identical to mat_vec_mod.
    """

    def __init__(self, A: np.ndarray, field: FieldPrime = DEFAULT_FIELD):
        self.field = field
        self.shape = A.shape
        _, d = A.shape
        # 2^(2*limb_bits) * d must stay below 2^53 for exact accumulation
        self._limb_bits = (53 - max(d, 1).bit_length()) // 2
        self._n_limbs = -(-field.bit_width // self._limb_bits)
        mask = np.uint64((1 << self._limb_bits) - 1)
        self._limbs = [
            ((A >> np.uint64(self._limb_bits * i)) & mask).astype(np.float64)
            for i in range(self._n_limbs)
        ]
        self._weights = [
            pow(2, self._limb_bits * w, field.q)
            for w in range(2 * self._n_limbs - 1)
        ]

    def matvec(self, s: np.ndarray) -> np.ndarray:
        m, d = self.shape
        if len(s) != d:
            raise DimensionMismatch(f"matrix is {m}x{d}, vector has {len(s)}")
        q = self.field.q
        lb = np.uint64(self._limb_bits)
        mask = np.uint64((1 << self._limb_bits) - 1)
        s = np.asarray(s, dtype=np.uint64)
        S = np.empty((d, self._n_limbs), dtype=np.float64)
        for j in range(self._n_limbs):
            S[:, j] = ((s >> (lb * np.uint64(j))) & mask).astype(np.float64)
        acc = np.zeros(m, dtype=np.uint64)
        for i, limb in enumerate(self._limbs):
            prods = limb @ S  # exact: < 2^53
            for j in range(self._n_limbs):
                part = prods[:, j].astype(np.uint64)
                if q <= (1 << 53):
                    part %= np.uint64(q)
                weighted = mul_mod(part, np.uint64(self._weights[i + j]), self.field)
                acc = add_mod(acc, weighted, self.field)
        return acc


# One big matrix at a time is plenty: the simulator shares a single matrix
# across all clients of a round, and rebuilding small test matrices is cheap.
_OPS_CACHE: dict[tuple, LweMatrixOps] = {}
_OPS_CACHE_SMALL_LIMIT = 1 << 22  # elements


def lwe_matrix_ops(params: LweParams, m: int,
                   field: FieldPrime = DEFAULT_FIELD) -> LweMatrixOps:
    """Shared, cached matvec handle for the public matrix."""
    key = (params.matrix_seed, m, params.n_lwe, field.q)
    ops = _OPS_CACHE.get(key)
    if ops is None:
        if m * params.n_lwe > _OPS_CACHE_SMALL_LIMIT:
            _OPS_CACHE.clear()
        elif len(_OPS_CACHE) >= 8:
            _OPS_CACHE.pop(next(iter(_OPS_CACHE)))
        ops = LweMatrixOps(lwe_matrix(params, m, field), field)
        _OPS_CACHE[key] = ops
    return ops
