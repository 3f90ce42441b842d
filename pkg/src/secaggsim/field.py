"""Prime-field arithmetic over F_q and fixed-point encoding of real vectors.

Scalars are plain Python ints in [0, q); vectors are numpy uint64 arrays.
The default modulus is the Mersenne prime 2^61 - 1, which keeps every
element in one machine word and leaves headroom so sums over hundreds of
clients (clip 2^20, 16 fractional bits) never wrap.

Small primes (7, 17, 127, ...) are supported for exhaustive tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DecodeRange, ZeroInverse

M61 = (1 << 61) - 1  # 2^61 - 1, prime

_MASK31 = (1 << 31) - 1
_MASK30 = (1 << 30) - 1

# Deterministic Miller-Rabin witnesses, valid for all n < 3.3e24.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for word-sized moduli."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class FieldPrime:
    """A prime modulus q together with its wire width.

    Field elements serialize as 8-byte big-endian unsigned integers, so q
    must fit in 64 bits.
    """

    q: int = M61

    def __post_init__(self):
        if self.q >= (1 << 64):
            raise ValueError("modulus must fit in 64 bits for the wire format")
        if not is_prime(self.q):
            raise ValueError(f"{self.q} is not prime")

    @property
    def bit_width(self) -> int:
        return (self.q - 1).bit_length()

    def reduce(self, x: int) -> int:
        return x % self.q

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b + self.q) % self.q

    def mul(self, a: int, b: int) -> int:
        return a * b % self.q

    def neg(self, a: int) -> int:
        return (self.q - a) % self.q

    def inv(self, a: int) -> int:
        """Multiplicative inverse via Fermat (q prime)."""
        if a % self.q == 0:
            raise ZeroInverse("0 has no inverse")
        return pow(a, self.q - 2, self.q)

    def rand(self, rng) -> int:
        """Uniform element of [0, q) from a numpy Generator."""
        return int(rng.integers(0, self.q, dtype=np.uint64))


DEFAULT_FIELD = FieldPrime(M61)


def field_arith(a: int, b: int, op: str, field: FieldPrime = DEFAULT_FIELD) -> int:
    """Dispatch add/sub/mul on reduced scalars."""
    if op == "add":
        return field.add(a, b)
    if op == "sub":
        return field.sub(a, b)
    if op == "mul":
        return field.mul(a, b)
    raise ValueError(f"unknown op {op!r}")


def mod_inverse(a: int, field: FieldPrime = DEFAULT_FIELD) -> int:
    return field.inv(a)


# --- vectorized modular arithmetic (numpy uint64) --------------------------


def _as_u64(a) -> np.ndarray:
    return np.asarray(a, dtype=np.uint64)


def add_mod(a, b, field: FieldPrime) -> np.ndarray:
    """(a + b) mod q elementwise; operands must already be reduced."""
    s = _as_u64(a) + _as_u64(b)  # < 2^62, no overflow for q < 2^61
    np.subtract(s, np.uint64(field.q), out=s, where=s >= np.uint64(field.q))
    return s


def sub_mod(a, b, field: FieldPrime) -> np.ndarray:
    a = _as_u64(a)
    b = _as_u64(b)
    return np.where(a >= b, a - b, a + np.uint64(field.q) - b)


def neg_mod(a, field: FieldPrime) -> np.ndarray:
    a = _as_u64(a)
    return np.where(a == 0, a, np.uint64(field.q) - a)


def mul_mod_m61(a, b) -> np.ndarray:
    """Exact (a*b) mod 2^61-1 on uint64 arrays, operands < 2^61.

    Schoolbook 31/30-bit split; 2^61 = 1 (mod M61) folds the high halves:
    a*b = ah*bh*2^62 + (ah*bl + al*bh)*2^31 + al*bl, and cross*2^31 is
    re-split so every intermediate stays below 2^64.
    """
    a = _as_u64(a)
    b = _as_u64(b)
    ah = a >> np.uint64(31)
    al = a & np.uint64(_MASK31)
    bh = b >> np.uint64(31)
    bl = b & np.uint64(_MASK31)
    cross = ah * bl + al * bh  # < 2^62
    t = (
        (ah * bh << np.uint64(1))
        + (cross >> np.uint64(30))
        + ((cross & np.uint64(_MASK30)) << np.uint64(31))
        + al * bl
    )  # < 2^63 + eps
    m = np.uint64(M61)
    t = (t >> np.uint64(61)) + (t & m)
    t = (t >> np.uint64(61)) + (t & m)
    np.subtract(t, m, out=t, where=t >= m)
    return t


def mul_mod(a, b, field: FieldPrime) -> np.ndarray:
    """Elementwise (a*b) mod q with a fast path per modulus size."""
    if field.q == M61:
        return mul_mod_m61(a, b)
    if field.q < (1 << 32):
        # products fit in uint64
        return (_as_u64(a) * _as_u64(b)) % np.uint64(field.q)
    a_obj = np.asarray(a, dtype=object)
    b_obj = np.asarray(b, dtype=object)
    return ((a_obj * b_obj) % field.q).astype(np.uint64)


def sum_mod(vectors, field: FieldPrime) -> np.ndarray:
    """Sum a sequence of reduced uint64 vectors mod q."""
    it = iter(vectors)
    acc = _as_u64(next(it)).copy()
    for v in it:
        acc = add_mod(acc, v, field)
    return acc


# --- wire format ------------------------------------------------------------


def elems_to_bytes(v) -> bytes:
    """Serialize field elements as 8-byte big-endian words (bit-exact)."""
    return _as_u64(v).astype(">u8").tobytes()


def bytes_to_elems(data: bytes) -> np.ndarray:
    return np.frombuffer(data, dtype=">u8").astype(np.uint64)


# --- fixed-point codec ------------------------------------------------------


@dataclass(frozen=True)
class FixedPointConfig:
    """Real <-> field codec: x maps to round(x * 2^frac_bits) mod q.

    Inputs beyond clip_magnitude are clipped, not rejected: gradient
    vectors can carry outliers and aggregation should not abort.
    Negative values occupy the upper half of the field, with an ambiguous
    middle band left as a decode guard.
    """

    frac_bits: int = 16
    clip_magnitude: float = float(1 << 20)

    def __post_init__(self):
        if self.frac_bits < 1:
            raise ValueError("frac_bits must be >= 1")
        if self.clip_magnitude <= 0:
            raise ValueError("clip_magnitude must be positive")

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    def check_capacity(self, summand_count: int, field: FieldPrime) -> None:
        """Require 2 * n * clip * 2^f < q so n-client sums never wrap."""
        bound = 2 * summand_count * int(self.clip_magnitude) * self.scale
        if bound >= field.q:
            raise ValueError(
                f"field too small: {summand_count} summands at clip "
                f"{self.clip_magnitude} need 2*n*clip*2^f < q"
            )


def fp_encode(x: float, cfg: FixedPointConfig = FixedPointConfig(),
              field: FieldPrime = DEFAULT_FIELD) -> int:
    x = min(max(x, -cfg.clip_magnitude), cfg.clip_magnitude)
    return round(x * cfg.scale) % field.q


def fp_decode(e: int, summand_count: int = 1,
              cfg: FixedPointConfig = FixedPointConfig(),
              field: FieldPrime = DEFAULT_FIELD) -> float:
    pos_max = summand_count * int(cfg.clip_magnitude) * cfg.scale
    neg_min = field.q - pos_max
    if e <= pos_max:
        signed = e
    elif e >= neg_min:
        signed = e - field.q
    else:
        raise DecodeRange(f"element {e} outside +/-{pos_max} band")
    return signed / cfg.scale


def encode_vec(x, cfg: FixedPointConfig = FixedPointConfig(),
               field: FieldPrime = DEFAULT_FIELD) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=np.float64),
                -cfg.clip_magnitude, cfg.clip_magnitude)
    scaled = np.rint(x * cfg.scale).astype(np.int64)
    return (scaled % np.int64(field.q)).astype(np.uint64)


def decode_vec(e, summand_count: int = 1,
               cfg: FixedPointConfig = FixedPointConfig(),
               field: FieldPrime = DEFAULT_FIELD) -> np.ndarray:
    e = _as_u64(e)
    pos_max = summand_count * int(cfg.clip_magnitude) * cfg.scale
    neg_min = field.q - pos_max
    if np.any((e > np.uint64(pos_max)) & (e < np.uint64(neg_min))):
        raise DecodeRange("vector has elements in the ambiguous middle band")
    signed = e.astype(np.int64)
    signed = np.where(e >= np.uint64(neg_min), signed - np.int64(field.q), signed)
    return signed / float(cfg.scale)
